#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rsteer/error.hpp"
#include "rsteer/rng.hpp"
#include "rsteer/stats.hpp"

namespace rsteer {

/// Variance-masked mean of conflict-minus-nonconflict differences.
struct RejectionDirection {
  Eigen::VectorXd vector;
  std::vector<bool> mask;  // true = component zeroed
  int layer = 0;
  std::string source_model_id;
  std::string target_model_id;  // set when applied to a different model
  std::size_t n_conflict = 0;
  std::size_t n_nonconflict = 0;
  double mask_quantile = 0.5;

  Eigen::Index dim() const { return vector.size(); }
  bool operator==(const RejectionDirection& o) const {
    return vector.size() == o.vector.size() && vector == o.vector && mask == o.mask && layer == o.layer &&
           source_model_id == o.source_model_id && target_model_id == o.target_model_id &&
           n_conflict == o.n_conflict && n_nonconflict == o.n_nonconflict && mask_quantile == o.mask_quantile;
  }
};

inline constexpr double kGateDisabled = std::numeric_limits<double>::infinity();

struct SteeringConfig {
  int layer = 0;
  double threshold = kGateDisabled;  // cosine threshold, or +inf to disable
  double scale = 0.0;
  bool apply_every_step = true;

  void validate() const {
    const bool tau_ok = threshold == kGateDisabled || (threshold >= -1.0 && threshold <= 1.0);
    if (!tau_ok) throw Error("steering", ErrorCode::InvalidArgument, "threshold must lie in [-1, 1] or be +inf");
    if (!std::isfinite(scale) || scale < 0.0) {
      throw Error("steering", ErrorCode::InvalidArgument, "scale must be finite and non-negative");
    }
  }
};

/// Shuffles both lists independently with `seed`, truncates to the shorter
/// length and returns conflict[i] - nonconflict[i] in 64-bit.
template <typename Scalar>
std::vector<Eigen::VectorXd> pair_and_diff(std::span<const VectorX<Scalar>> conflict,
                                           std::span<const VectorX<Scalar>> nonconflict, std::uint64_t seed) {
  if (conflict.empty() || nonconflict.empty()) {
    throw Error("steering", ErrorCode::InvalidArgument, "pair_and_diff needs non-empty conflict and nonconflict sets");
  }
  const Eigen::Index d = detail::common_dimension(conflict);
  if (detail::common_dimension(nonconflict) != d) {
    throw Error("steering", ErrorCode::DimensionMismatch, "conflict and nonconflict dimensions differ");
  }
  Rng rng(seed);
  std::vector<std::size_t> ci(conflict.size()), ni(nonconflict.size());
  std::iota(ci.begin(), ci.end(), std::size_t{0});
  std::iota(ni.begin(), ni.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(ci));
  rng.shuffle(std::span<std::size_t>(ni));

  const std::size_t n = std::min(ci.size(), ni.size());
  std::vector<Eigen::VectorXd> diffs;
  diffs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    diffs.push_back(conflict[ci[i]].template cast<double>() - nonconflict[ni[i]].template cast<double>());
  }
  return diffs;
}

/// Components of `variance` strictly above its (1 - q) quantile (linear
/// interpolation between order statistics). q = 0 masks nothing.
std::vector<bool> high_variance_mask(const Eigen::VectorXd& variance, double q);

/// Direction from already-formed difference vectors.
RejectionDirection direction_from_differences(std::span<const Eigen::VectorXd> diffs, double mask_quantile);

/// Steps 1-2 of representation editing: pair, difference, mean, mask.
/// Throws DegenerateDirection when the masked center is (numerically) zero.
template <typename Scalar>
RejectionDirection compute_rejection_direction(std::span<const VectorX<Scalar>> conflict,
                                               std::span<const VectorX<Scalar>> nonconflict, double mask_quantile,
                                               std::uint64_t seed) {
  if (!(mask_quantile >= 0.0 && mask_quantile < 1.0)) {
    throw Error("steering", ErrorCode::InvalidArgument, "mask quantile must lie in [0, 1)");
  }
  const auto diffs = pair_and_diff(conflict, nonconflict, seed);
  RejectionDirection dir = direction_from_differences(diffs, mask_quantile);
  dir.n_conflict = conflict.size();
  dir.n_nonconflict = nonconflict.size();
  return dir;
}

struct Calibration {
  double threshold = 0.0;
  double mean_conflict = 0.0;
  double mean_nonconflict = 0.0;
  double accuracy = 0.5;  // balanced accuracy on the holdout at `threshold`
  bool defined = true;    // false when the class means coincide
};

/// Threshold = midpoint of the two class-mean cosine similarities.
template <typename Scalar>
Calibration calibrate_threshold(const RejectionDirection& direction, std::span<const VectorX<Scalar>> holdout_conflict,
                                std::span<const VectorX<Scalar>> holdout_nonconflict);

/// Balanced accuracy of the rule "conflict iff similarity > threshold".
double threshold_accuracy(std::span<const double> conflict_sims, std::span<const double> nonconflict_sims,
                          double threshold);

Calibration calibrate_from_similarities(std::span<const double> conflict_sims, std::span<const double> nonconflict_sims);

template <typename Scalar>
Calibration calibrate_threshold(const RejectionDirection& direction, std::span<const VectorX<Scalar>> holdout_conflict,
                                std::span<const VectorX<Scalar>> holdout_nonconflict) {
  if (holdout_conflict.empty() || holdout_nonconflict.empty()) {
    throw Error("steering", ErrorCode::InvalidArgument, "calibration needs both holdout classes");
  }
  auto sims = [&](std::span<const VectorX<Scalar>> vs) {
    std::vector<double> out;
    out.reserve(vs.size());
    for (const auto& v : vs) {
      if (v.size() != direction.dim()) {
        throw Error("steering", ErrorCode::DimensionMismatch, "holdout vector dimension differs from direction");
      }
      out.push_back(cosine_similarity(v, direction.vector));
    }
    return out;
  };
  const auto c = sims(holdout_conflict);
  const auto n = sims(holdout_nonconflict);
  return calibrate_from_similarities(c, n);
}

/// Step 3: if cosine(state, direction) > threshold return state + scale * direction,
/// otherwise return the state unchanged. A zero-norm state has cosine 0.
Eigen::VectorXd gate_and_steer(const Eigen::VectorXd& state, const RejectionDirection& direction,
                               const SteeringConfig& config);

/// True when gate_and_steer would modify `state`.
bool gate_fires(const Eigen::VectorXd& state, const RejectionDirection& direction, const SteeringConfig& config);

void save_direction(const RejectionDirection& direction, const std::filesystem::path& path);
RejectionDirection load_direction(const std::filesystem::path& path);

/// Validates a direction estimated on one model for use on another.
RejectionDirection apply_foreign_direction(const RejectionDirection& direction, std::uint32_t target_hidden_dim,
                                           const std::string& target_model_id = {});

}  // namespace rsteer
