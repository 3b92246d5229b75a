#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "rsteer/query_type.hpp"

namespace rsteer {

/// Marker for the last token of a prompt.
inline constexpr std::int32_t kLastToken = -1;

struct ActivationRecord {
  std::string query_id;
  QueryType label = QueryType::NonConflict;
  std::uint16_t layer = 0;
  std::int32_t position = kLastToken;
  Eigen::VectorXf vector;

  /// Bitwise comparison of the vector payload.
  bool operator==(const ActivationRecord& other) const {
    return query_id == other.query_id && label == other.label && layer == other.layer &&
           position == other.position && vector.size() == other.vector.size() &&
           std::memcmp(vector.data(), other.vector.data(), sizeof(float) * static_cast<std::size_t>(vector.size())) == 0;
  }
};

struct ActivationSet {
  std::string model_id;
  std::uint32_t hidden_dim = 0;
  std::vector<std::uint16_t> layers_present;  // sorted, unique
  std::vector<ActivationRecord> records;

  bool operator==(const ActivationSet&) const = default;

  /// Throws InvariantViolation / DimensionMismatch naming the first offending record.
  void validate() const;

  /// Rebuilds layers_present from the records.
  void refresh_layers();

  /// Vectors at `layer` (last-token position only) whose label satisfies `pred`.
  template <typename Pred>
  std::vector<Eigen::VectorXf> vectors(std::uint16_t layer, Pred pred) const {
    std::vector<Eigen::VectorXf> out;
    for (const auto& r : records) {
      if (r.layer == layer && r.position == kLastToken && pred(r.label)) out.push_back(r.vector);
    }
    return out;
  }

  std::vector<const ActivationRecord*> at_layer(std::uint16_t layer) const;
};

}  // namespace rsteer
