#include "rsteer/toy_experiment.hpp"

#include "rsteer/error.hpp"

namespace rsteer {

std::optional<PromptSplit> parse_split(std::string_view name) {
  if (name == "all") return PromptSplit::All;
  if (name == "train") return PromptSplit::Train;
  if (name == "heldout") return PromptSplit::HeldOut;
  return std::nullopt;
}

std::vector<const ToyPrompt*> select_prompts(const RoleFactWorld& world, PromptSplit split,
                                             const std::set<QueryType>& labels) {
  std::vector<const ToyPrompt*> out;
  for (const auto& p : world.prompts) {
    if (split == PromptSplit::Train && p.held_out) continue;
    if (split == PromptSplit::HeldOut && !p.held_out) continue;
    if (!labels.empty() && !labels.count(p.label)) continue;
    out.push_back(&p);
  }
  return out;
}

ActivationSet collect_activations(const ToyModel& model, const RoleFactWorld& world, std::span<const int> layers,
                                  PromptSplit split, const std::string& model_id, const std::set<QueryType>& labels) {
  std::vector<HookSpec> hooks;
  for (int layer : layers) {
    if (layer < 0 || layer >= model.config.n_layers) {
      throw Error("toymodel", ErrorCode::LayerOutOfRange, "layer " + std::to_string(layer) + " out of range");
    }
    hooks.push_back(HookSpec::capture(layer));
  }
  ActivationSet set;
  set.model_id = model_id;
  set.hidden_dim = static_cast<std::uint32_t>(model.config.d_model);
  for (const ToyPrompt* p : select_prompts(world, split, labels)) {
    const auto tokens = world.prompt_tokens(*p);
    const ForwardResult fwd = forward_with_hooks(model, tokens, hooks);
    for (std::size_t h = 0; h < hooks.size(); ++h) {
      ActivationRecord r;
      r.query_id = p->id;
      r.label = p->label;
      r.layer = static_cast<std::uint16_t>(hooks[h].layer);
      r.position = kLastToken;
      r.vector = fwd.captured.at(h).cast<float>();
      set.records.push_back(std::move(r));
    }
  }
  set.refresh_layers();
  set.validate();
  return set;
}

BehaviorReport evaluate_behavior(const ToyModel& model, const RoleFactWorld& world, PromptSplit split,
                                 const SteeringPlan* steering, int max_new) {
  BehaviorReport report;
  for (const ToyPrompt* p : select_prompts(world, split)) {
    const auto tokens = world.prompt_tokens(*p);
    const Generation gen = generate(model, tokens, steering, max_new);
    auto& cat = report.categories[p->label];
    ++cat.n;
    const int first = gen.tokens.empty() ? -1 : gen.tokens.front();
    if (first == tokens::kRefuse) ++cat.refused;
    if (first == p->target()) ++cat.correct;
    ToyResponse r{p->id, p->label, {}, gen.steered_steps};
    for (int t : gen.tokens) r.text += (r.text.empty() ? "" : " ") + token_name(t, world);
    report.responses.push_back(std::move(r));
  }
  return report;
}

}  // namespace rsteer
