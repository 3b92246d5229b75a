#include "rsteer/activation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "rsteer/error.hpp"

namespace rsteer {

void ActivationSet::validate() const {
  if (!std::is_sorted(layers_present.begin(), layers_present.end()) ||
      std::adjacent_find(layers_present.begin(), layers_present.end()) != layers_present.end()) {
    throw Error("core", ErrorCode::InvariantViolation, "layers_present must be sorted and unique");
  }
  std::set<std::tuple<std::string, std::uint16_t, std::int32_t>> keys;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (static_cast<std::uint32_t>(r.vector.size()) != hidden_dim) {
      throw Error("core", ErrorCode::DimensionMismatch,
                  "record " + std::to_string(i) + " has dimension " + std::to_string(r.vector.size()) +
                      ", expected " + std::to_string(hidden_dim));
    }
    if (!std::binary_search(layers_present.begin(), layers_present.end(), r.layer)) {
      throw Error("core", ErrorCode::InvariantViolation,
                  "record " + std::to_string(i) + " layer " + std::to_string(r.layer) + " not in layers_present");
    }
    if (!r.vector.allFinite()) {
      throw Error("core", ErrorCode::InvariantViolation, "record " + std::to_string(i) + " has non-finite components");
    }
    if (!keys.emplace(r.query_id, r.layer, r.position).second) {
      throw Error("core", ErrorCode::InvariantViolation,
                  "duplicate (query_id, layer, position) for '" + r.query_id + "'");
    }
  }
}

void ActivationSet::refresh_layers() {
  std::set<std::uint16_t> layers;
  for (const auto& r : records) layers.insert(r.layer);
  layers_present.assign(layers.begin(), layers.end());
}

std::vector<const ActivationRecord*> ActivationSet::at_layer(std::uint16_t layer) const {
  std::vector<const ActivationRecord*> out;
  for (const auto& r : records) {
    if (r.layer == layer && r.position == kLastToken) out.push_back(&r);
  }
  return out;
}

}  // namespace rsteer
