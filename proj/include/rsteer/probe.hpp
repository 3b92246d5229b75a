#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsteer/activation.hpp"
#include "rsteer/query_type.hpp"

namespace rsteer {

/// Layer sizes (input_dim, hidden_dim, 2), ReLU between the two affine maps,
/// Adam with a linear decay of the learning rate to zero.
struct ProbeConfig {
  int input_dim = 0;
  int hidden_dim = 512;
  int epochs = 10;
  double learning_rate = 5e-5;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Learning rate in effect after `step` of `total_steps` optimizer steps.
constexpr double linear_decay_lr(double base, long step, long total_steps) {
  return base * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

struct Probe {
  Eigen::MatrixXd w1;  // input_dim x hidden_dim
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden_dim x 2
  Eigen::VectorXd b2;
  long steps_taken = 0;
  double final_learning_rate = 0.0;

  /// n x 2 class scores for the rows of `features`.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& features) const;
  std::vector<int> predict(const Eigen::MatrixXd& features) const;
};

/// Rows of `features` are examples; labels are 1 (refuse) or 0 (answer).
/// Throws SingleClass when only one label is present.
Probe train_probe(const Eigen::MatrixXd& features, std::span<const int> labels, const ProbeConfig& config);

struct ProbeResult {
  int layer = 0;
  std::uint64_t seed = 0;
  std::map<QueryType, double> accuracy;  // only categories with test samples
  std::optional<double> contextual;      // mean of the present contextual categories
  std::optional<double> parametric;      // mean of the present parametric categories
};

/// Test samples grouped by category; conflict categories are expected to be
/// classified as 1, NonConflict as 0. Empty categories are omitted.
ProbeResult eval_probe(const Probe& probe, const std::map<QueryType, Eigen::MatrixXd>& test);

/// Fills the composite fields from `accuracy`.
void compute_composites(ProbeResult& result);

struct SweepOptions {
  std::vector<int> layers;  // empty = all layers in the set
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6};
  std::vector<QueryType> train_categories = {QueryType::NonConflict, QueryType::RoleSetting,
                                             QueryType::FactualKnowledge};
  int train_per_category = 200;
  int test_per_category = 50;
  int threads = 1;
};

struct LayerSummary {
  int layer = 0;
  std::string category;  // query type name, "contextual" or "parametric"
  double mean_accuracy = 0.0;
  double variance = 0.0;  // population variance across seeds
  int n_seeds = 0;
};

struct SweepResult {
  std::vector<ProbeResult> results;  // layer-major, then seed order
  std::vector<LayerSummary> summary;
};

/// One probe per (layer, seed). Per category, samples are ordered by query id
/// and shuffled with the seed, so every layer sees the same split.
SweepResult layerwise_sweep(const ActivationSet& activations, const ProbeConfig& config, const SweepOptions& options);

std::string sweep_csv(std::span<const LayerSummary> summary);

}  // namespace rsteer
