#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsteer/steering.hpp"
#include "rsteer/world.hpp"

namespace rsteer {

struct ToyConfig {
  int vocab_size = 64;
  int d_model = 48;
  int n_layers = 3;
  int n_heads = 4;
  int max_seq = 16;
  std::uint64_t seed = 1;

  int head_dim() const { return d_model / n_heads; }
  int mlp_dim() const { return 4 * d_model; }

  /// Throws InvalidArgument on a non-positive size, d_model % n_heads != 0, or
  /// a vocabulary smaller than `min_vocab`.
  void validate(int min_vocab = tokens::kReservedCount) const;

  bool operator==(const ToyConfig&) const = default;
};

/// Pre-LN transformer block. Weight matrices are applied on the right
/// (row-vector states times weight).
struct BlockParams {
  Eigen::VectorXd ln1_gain, ln1_bias;
  Eigen::MatrixXd w_query, w_key, w_value, w_out;
  Eigen::VectorXd b_query, b_key, b_value, b_out;
  Eigen::VectorXd ln2_gain, ln2_bias;
  Eigen::MatrixXd w_up;
  Eigen::VectorXd b_up;
  Eigen::MatrixXd w_down;
  Eigen::VectorXd b_down;
};

struct ToyParams {
  Eigen::MatrixXd token_embedding;     // vocab x d
  Eigen::MatrixXd position_embedding;  // max_seq x d
  std::vector<BlockParams> blocks;
  Eigen::VectorXd final_gain, final_bias;
  Eigen::MatrixXd unembedding;  // d x vocab

  static ToyParams zeros(const ToyConfig& config);

  /// Every tensor in declaration order; this order is the checkpoint layout.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;

  bool operator==(const ToyParams& other) const;
};

struct ToyModel {
  ToyConfig config;
  ToyParams params;

  /// Seeded initialization; every value is representable as a 32-bit float so
  /// a checkpoint round trip is exact.
  static ToyModel initialize(const ToyConfig& config);
};

enum class HookMode { Capture, Intervene };

struct HookSpec {
  int layer = 0;
  HookMode mode = HookMode::Capture;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> transform;  // Intervene only

  static HookSpec capture(int layer) { return {layer, HookMode::Capture, {}}; }
  static HookSpec intervene(int layer, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f) {
    return {layer, HookMode::Intervene, std::move(f)};
  }
};

struct ForwardResult {
  Eigen::MatrixXd logits;                        // seq x vocab
  std::map<std::size_t, Eigen::VectorXd> captured;  // hook index -> state
  std::vector<std::vector<Eigen::MatrixXd>> attention;  // [layer][head], seq x seq
};

/// Runs the model over `tokens`. Hooks act on the post-block residual stream
/// at the last token, in list order within a layer. A Capture hook records
/// the state seen at its point in the list; an Intervene hook replaces it with
/// transform(state) before the next layer runs.
ForwardResult forward_with_hooks(const ToyModel& model, std::span<const int> tokens,
                                 std::span<const HookSpec> hooks = {});

/// Final layer norm plus unembedding of one residual-stream state.
Eigen::VectorXd readout(const ToyModel& model, const Eigen::VectorXd& state);

struct SteeringPlan {
  SteeringConfig config;
  RejectionDirection direction;
};

struct Generation {
  std::vector<int> tokens;  // newly generated tokens only
  int steered_steps = 0;    // decoding steps where the gate fired
};

/// Greedy decoding. Stops at the end token, at max_new tokens, or when the
/// context is full. With a plan, gate_and_steer is applied to the plan's layer
/// at every step (or only the first when apply_every_step is false).
Generation generate(const ToyModel& model, std::span<const int> prompt, const SteeringPlan* steering,
                    int max_new);

struct TrainOptions {
  int steps = 2000;
  double learning_rate = 3e-3;
  int batch_size = 32;
  double weight_decay = 0.5;  // decoupled, applied to weight matrices only
};

struct TrainResult {
  ToyModel model;
  double final_loss = 0.0;
};

struct Example {
  std::vector<int> tokens;
  int target = 0;
};

/// Mean next-token cross-entropy at the last position and its gradient.
std::pair<double, ToyParams> loss_and_gradient(const ToyModel& model, std::span<const Example> batch);
double loss(const ToyModel& model, std::span<const Example> batch);

/// Adam on the non-held-out prompts of `world`; deterministic given
/// config.seed. Parameters are rounded to 32-bit floats on return. Throws
/// Divergence if the loss becomes non-finite.
TrainResult train_toy(const ToyConfig& config, const RoleFactWorld& world, const TrainOptions& options);

std::vector<Example> training_examples(const RoleFactWorld& world, bool held_out);

/// Checkpoint: u32 LE header length, JSON header with the config, then all
/// tensors in declaration order as little-endian 32-bit floats.
void save_checkpoint(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace rsteer
