#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rsteer/query_type.hpp"

namespace rsteer {

/// Per-type mean sample scores for one model. Cells are indexed by QueryType code.
struct ScoreTable {
  std::string model;
  std::array<std::optional<double>, 5> cells{};
  std::array<std::size_t, 5> counts{};

  std::optional<double> cell(QueryType qt) const { return cells[static_cast<std::size_t>(qt)]; }
  bool complete() const;
  /// Mean of the five cells. Throws MissingQueryType if any is absent.
  double overall() const;
  /// Mean of the cells that are present; nullopt when none are.
  std::optional<double> overall_partial() const;
};

using TypedScore = std::pair<QueryType, double>;

/// Requires all five query types. Throws MissingQueryType otherwise.
ScoreTable aggregate(std::span<const TypedScore> scores, std::string model = {});
/// Same means; absent types stay empty.
ScoreTable aggregate_partial(std::span<const TypedScore> scores, std::string model = {});

/// Half-up rounding to two decimals. Applied at display time only.
double round2(double x);
std::string format2(double x);

struct TableDelta {
  std::array<std::optional<double>, 5> cells{};
  std::optional<double> overall;
  /// Differences of the values as displayed (each side rounded first).
  std::array<std::optional<double>, 5> cells_displayed{};
  std::optional<double> overall_displayed;
};

/// after - before per cell. Throws MismatchedTables when the present types differ.
TableDelta compare_tables(const ScoreTable& before, const ScoreTable& after);

/// "↑0.13", "↓0.01" or "0.00" from the rounded magnitude.
std::string format_delta(double delta);

/// Aligned text table: Model | Non-Conflict | ... | Average. Missing cells print "-".
/// When `deltas` is given it must match `rows`; each cell gets " (mark)".
std::string render_text(std::span<const ScoreTable> rows, std::span<const std::optional<TableDelta>> deltas = {});
std::string render_csv(std::span<const ScoreTable> rows, std::span<const std::optional<TableDelta>> deltas = {});

}  // namespace rsteer
