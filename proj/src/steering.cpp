#include "rsteer/steering.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace rsteer {

using json = nlohmann::json;

std::vector<bool> high_variance_mask(const Eigen::VectorXd& variance, double q) {
  const auto d = static_cast<std::size_t>(variance.size());
  std::vector<bool> mask(d, false);
  if (d == 0 || q <= 0.0) return mask;

  std::vector<double> sorted(variance.data(), variance.data() + d);
  std::sort(sorted.begin(), sorted.end());
  const double pos = (1.0 - q) * static_cast<double>(d - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, d - 1);
  const double frac = pos - static_cast<double>(lo);
  const double cut = frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);

  for (std::size_t i = 0; i < d; ++i) mask[i] = variance[static_cast<Eigen::Index>(i)] > cut;
  return mask;
}

RejectionDirection direction_from_differences(std::span<const Eigen::VectorXd> diffs, double mask_quantile) {
  RejectionDirection dir;
  dir.mask_quantile = mask_quantile;
  const Eigen::VectorXd center = mean_vector<double>(diffs);
  const Eigen::VectorXd var = componentwise_variance<double>(diffs);
  dir.mask = high_variance_mask(var, mask_quantile);
  dir.vector = center;
  for (Eigen::Index i = 0; i < center.size(); ++i) {
    if (dir.mask[static_cast<std::size_t>(i)]) dir.vector[i] = 0.0;
  }

  // Relative test: identical class sets leave only rounding residue in the center.
  double scale = 0.0;
  for (const auto& d : diffs) scale = std::max(scale, d.cwiseAbs().maxCoeff());
  if (center.norm() <= 1e-12 * std::max(scale, 1e-300) || dir.vector.norm() == 0.0) {
    throw Error("steering", ErrorCode::DegenerateDirection,
                "conflict and non-conflict centroids coincide on the unmasked components");
  }
  return dir;
}

double threshold_accuracy(std::span<const double> conflict_sims, std::span<const double> nonconflict_sims,
                          double threshold) {
  const auto hit_c = std::count_if(conflict_sims.begin(), conflict_sims.end(), [&](double s) { return s > threshold; });
  const auto hit_n =
      std::count_if(nonconflict_sims.begin(), nonconflict_sims.end(), [&](double s) { return !(s > threshold); });
  return 0.5 * (static_cast<double>(hit_c) / static_cast<double>(conflict_sims.size()) +
                static_cast<double>(hit_n) / static_cast<double>(nonconflict_sims.size()));
}

Calibration calibrate_from_similarities(std::span<const double> conflict_sims, std::span<const double> nonconflict_sims) {
  if (conflict_sims.empty() || nonconflict_sims.empty()) {
    throw Error("steering", ErrorCode::InvalidArgument, "calibration needs both holdout classes");
  }
  Calibration cal;
  cal.mean_conflict = std::accumulate(conflict_sims.begin(), conflict_sims.end(), 0.0) /
                      static_cast<double>(conflict_sims.size());
  cal.mean_nonconflict = std::accumulate(nonconflict_sims.begin(), nonconflict_sims.end(), 0.0) /
                         static_cast<double>(nonconflict_sims.size());
  cal.threshold = 0.5 * (cal.mean_conflict + cal.mean_nonconflict);
  if (cal.mean_conflict == cal.mean_nonconflict) {
    cal.defined = false;
    cal.accuracy = 0.5;
    return cal;
  }
  cal.accuracy = threshold_accuracy(conflict_sims, nonconflict_sims, cal.threshold);
  return cal;
}

bool gate_fires(const Eigen::VectorXd& state, const RejectionDirection& direction, const SteeringConfig& config) {
  if (state.size() != direction.dim()) {
    throw Error("steering", ErrorCode::DimensionMismatch, "state and direction dimensions differ");
  }
  return cosine_similarity(state, direction.vector) > config.threshold;
}

Eigen::VectorXd gate_and_steer(const Eigen::VectorXd& state, const RejectionDirection& direction,
                               const SteeringConfig& config) {
  if (!gate_fires(state, direction, config)) return state;
  return state + config.scale * direction.vector;
}

void save_direction(const RejectionDirection& direction, const std::filesystem::path& path) {
  json j;
  j["format"] = "rsteer-direction";
  j["version"] = 1;
  j["dim"] = direction.dim();
  j["layer"] = direction.layer;
  j["source_model_id"] = direction.source_model_id;
  j["target_model_id"] = direction.target_model_id;
  j["n_conflict"] = direction.n_conflict;
  j["n_nonconflict"] = direction.n_nonconflict;
  j["mask_quantile"] = direction.mask_quantile;
  j["vector"] = std::vector<double>(direction.vector.data(), direction.vector.data() + direction.vector.size());
  j["mask"] = direction.mask;

  std::ofstream out(path);
  if (!out) throw Error("steering", ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RejectionDirection load_direction(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("steering", ErrorCode::IoError, "cannot read " + path.string());
  RejectionDirection dir;
  try {
    const json j = json::parse(in);
    const auto values = j.at("vector").get<std::vector<double>>();
    dir.mask = j.at("mask").get<std::vector<bool>>();
    dir.layer = j.at("layer").get<int>();
    dir.source_model_id = j.at("source_model_id").get<std::string>();
    dir.target_model_id = j.value("target_model_id", std::string{});
    dir.n_conflict = j.at("n_conflict").get<std::size_t>();
    dir.n_nonconflict = j.at("n_nonconflict").get<std::size_t>();
    dir.mask_quantile = j.at("mask_quantile").get<double>();
    const auto dim = j.at("dim").get<long long>();
    if (dim <= 0 || static_cast<std::size_t>(dim) != values.size()) {
      throw Error("steering", ErrorCode::MalformedDirection, "direction dimension must be positive and match the vector");
    }
    dir.vector = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  } catch (const json::exception& e) {
    throw Error("steering", ErrorCode::MalformedDirection, std::string("malformed direction file: ") + e.what());
  }
  if (dir.mask.size() != static_cast<std::size_t>(dir.dim())) {
    throw Error("steering", ErrorCode::MalformedDirection, "mask length differs from vector length");
  }
  for (Eigen::Index i = 0; i < dir.dim(); ++i) {
    if (dir.mask[static_cast<std::size_t>(i)] && dir.vector[i] != 0.0) {
      throw Error("steering", ErrorCode::MalformedDirection, "masked component is nonzero");
    }
  }
  if (!dir.vector.allFinite() || dir.vector.isZero(0.0)) {
    throw Error("steering", ErrorCode::MalformedDirection, "direction must be finite and nonzero");
  }
  return dir;
}

RejectionDirection apply_foreign_direction(const RejectionDirection& direction, std::uint32_t target_hidden_dim,
                                           const std::string& target_model_id) {
  if (direction.dim() != static_cast<Eigen::Index>(target_hidden_dim)) {
    throw Error("steering", ErrorCode::DimensionMismatch,
                "direction has dimension " + std::to_string(direction.dim()) + ", target model has " +
                    std::to_string(target_hidden_dim));
  }
  RejectionDirection out = direction;
  out.target_model_id = target_model_id;
  return out;
}

}  // namespace rsteer
