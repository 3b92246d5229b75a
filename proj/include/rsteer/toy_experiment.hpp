#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rsteer/activation.hpp"
#include "rsteer/toy_model.hpp"
#include "rsteer/world.hpp"

namespace rsteer {

enum class PromptSplit { All, Train, HeldOut };

std::optional<PromptSplit> parse_split(std::string_view name);
std::vector<const ToyPrompt*> select_prompts(const RoleFactWorld& world, PromptSplit split,
                                             const std::set<QueryType>& labels = {});

/// Last-token post-block states for every selected prompt at every layer in
/// `layers`. An empty label set selects all labels.
ActivationSet collect_activations(const ToyModel& model, const RoleFactWorld& world, std::span<const int> layers,
                                  PromptSplit split, const std::string& model_id,
                                  const std::set<QueryType>& labels = {});

struct CategoryBehavior {
  std::size_t n = 0;
  std::size_t refused = 0;  // first generated token is the refuse token
  std::size_t correct = 0;  // first generated token is the prompt's target

  double refuse_rate() const { return n ? static_cast<double>(refused) / static_cast<double>(n) : 0.0; }
  double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
};

struct ToyResponse {
  std::string id;
  QueryType label = QueryType::NonConflict;
  std::string text;  // generated tokens by name, space separated
  int steered_steps = 0;
};

struct BehaviorReport {
  std::map<QueryType, CategoryBehavior> categories;
  std::vector<ToyResponse> responses;
};

BehaviorReport evaluate_behavior(const ToyModel& model, const RoleFactWorld& world, PromptSplit split,
                                 const SteeringPlan* steering, int max_new = 1);

}  // namespace rsteer
