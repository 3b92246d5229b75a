#include "rsteer/score_table.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rsteer/error.hpp"

namespace rsteer {

namespace {

ScoreTable fold(std::span<const TypedScore> scores, std::string model) {
  ScoreTable t;
  t.model = std::move(model);
  std::array<double, 5> sums{};
  for (const auto& [qt, s] : scores) {
    if (!std::isfinite(s)) throw Error("judge", ErrorCode::InvalidArgument, "non-finite sample score");
    const auto k = static_cast<std::size_t>(qt);
    sums[k] += s;
    ++t.counts[k];
  }
  for (std::size_t k = 0; k < 5; ++k) {
    if (t.counts[k] > 0) t.cells[k] = sums[k] / static_cast<double>(t.counts[k]);
  }
  return t;
}

std::string cell_text(const std::optional<double>& v, const std::optional<TableDelta>& delta,
                      const std::optional<double>& d) {
  if (!v) return "-";
  std::string s = format2(*v);
  if (delta && d) s += " (" + format_delta(*d) + ")";
  return s;
}

std::vector<std::vector<std::string>> table_cells(std::span<const ScoreTable> rows,
                                                  std::span<const std::optional<TableDelta>> deltas) {
  if (!deltas.empty() && deltas.size() != rows.size()) {
    throw Error("judge", ErrorCode::InvalidArgument, "one delta entry per row required");
  }
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> header{"Model"};
  for (QueryType qt : kAllQueryTypes) {
    header.emplace_back(qt == QueryType::NonConflict ? "Non-Conflict" : std::string(display_name(qt)));
  }
  header.emplace_back("Average");
  out.push_back(header);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::optional<TableDelta> none;
    const auto& delta = deltas.empty() ? none : deltas[r];
    std::vector<std::string> line{row.model};
    for (std::size_t k = 0; k < 5; ++k) {
      line.push_back(cell_text(row.cells[k], delta, delta ? delta->cells_displayed[k] : std::nullopt));
    }
    line.push_back(cell_text(row.overall_partial(), delta, delta ? delta->overall_displayed : std::nullopt));
    out.push_back(std::move(line));
  }
  return out;
}

// Display width in code points; the arrow marks are multi-byte.
std::size_t width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

}  // namespace

bool ScoreTable::complete() const {
  return std::all_of(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); });
}

double ScoreTable::overall() const {
  double sum = 0.0;
  for (QueryType qt : kAllQueryTypes) {
    const auto c = cell(qt);
    if (!c) {
      throw Error("judge", ErrorCode::MissingQueryType,
                  fmt::format("no scores for {}; the overall average is undefined", to_string(qt)));
    }
    sum += *c;
  }
  return sum / 5.0;
}

std::optional<double> ScoreTable::overall_partial() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c) {
      sum += *c;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

ScoreTable aggregate(std::span<const TypedScore> scores, std::string model) {
  ScoreTable t = fold(scores, std::move(model));
  (void)t.overall();
  return t;
}

ScoreTable aggregate_partial(std::span<const TypedScore> scores, std::string model) {
  return fold(scores, std::move(model));
}

double round2(double x) {
  const double mag = std::floor(std::abs(x) * 100.0 + 0.5 + 1e-9) / 100.0;
  return x < 0.0 ? -mag : mag;
}

std::string format2(double x) {
  const double r = round2(x);
  return fmt::format("{:.2f}", r == 0.0 ? 0.0 : r);
}

TableDelta compare_tables(const ScoreTable& before, const ScoreTable& after) {
  TableDelta d;
  for (std::size_t k = 0; k < 5; ++k) {
    if (before.cells[k].has_value() != after.cells[k].has_value()) {
      throw Error("judge", ErrorCode::MismatchedTables,
                  fmt::format("{} is present in only one table", to_string(static_cast<QueryType>(k))));
    }
    if (before.cells[k]) {
      d.cells[k] = *after.cells[k] - *before.cells[k];
      d.cells_displayed[k] = round2(*after.cells[k]) - round2(*before.cells[k]);
    }
  }
  const auto b = before.overall_partial();
  const auto a = after.overall_partial();
  if (a && b) {
    d.overall = *a - *b;
    d.overall_displayed = round2(*a) - round2(*b);
  }
  return d;
}

std::string format_delta(double delta) {
  const double r = round2(delta);
  if (r == 0.0) return "0.00";
  return fmt::format("{}{:.2f}", r > 0.0 ? "↑" : "↓", std::abs(r));
}

std::string render_text(std::span<const ScoreTable> rows, std::span<const std::optional<TableDelta>> deltas) {
  const auto cells = table_cells(rows, deltas);
  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], width(line[c]));
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const auto& s = cells[r][c];
      const std::string pad(widths[c] - width(s), ' ');
      if (c > 0) line += " | ";
      line += c == 0 ? s + pad : pad + s;
    }
    out += line + "\n";
    if (r == 0) {
      std::string rule;
      for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c > 0) rule += "-+-";
        rule += std::string(widths[c], '-');
      }
      out += rule + "\n";
    }
  }
  return out;
}

std::string render_csv(std::span<const ScoreTable> rows, std::span<const std::optional<TableDelta>> deltas) {
  const auto cells = table_cells(rows, deltas);
  std::string out;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      const auto& s = line[c];
      const bool quote = s.find_first_of(",\"") != std::string::npos;
      std::string field = s;
      if (quote) {
        field.clear();
        for (char ch : s) field += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        field = "\"" + field + "\"";
      }
      out += (c > 0 ? "," : "") + field;
    }
    out += "\n";
  }
  return out;
}

}  // namespace rsteer
