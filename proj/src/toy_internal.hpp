#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "rsteer/toy_model.hpp"

namespace rsteer::detail {

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Eigen::MatrixXd normalized;  // (x - mean) / std, before gain and bias
  Eigen::VectorXd inv_std;
};

struct BlockCache {
  Eigen::MatrixXd input;
  LayerNormCache ln1;
  Eigen::MatrixXd h1, q, k, v;
  std::vector<Eigen::MatrixXd> probs;  // per head
  Eigen::MatrixXd heads;               // concatenated head outputs
  Eigen::MatrixXd mid;
  LayerNormCache ln2;
  Eigen::MatrixXd h2, up, act;
};

struct ForwardCache {
  std::vector<BlockCache> blocks;
  Eigen::MatrixXd final_input;  // residual stream after the last block
};

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain, const Eigen::VectorXd& bias,
                           LayerNormCache* cache);

/// dx from dy; accumulates gain/bias gradients.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const LayerNormCache& cache, const Eigen::VectorXd& gain,
                                    Eigen::VectorXd& dgain, Eigen::VectorXd& dbias);

double gelu(double u);
double gelu_derivative(double u);

/// Residual stream after all blocks (seq x d). Hooks are applied as described
/// on forward_with_hooks. `cache` and `result` may be null.
Eigen::MatrixXd run_blocks(const ToyModel& model, std::span<const int> tokens, std::span<const HookSpec> hooks,
                           ForwardCache* cache, ForwardResult* result);

}  // namespace rsteer::detail
