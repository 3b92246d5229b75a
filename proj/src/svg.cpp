#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "rsteer/embed.hpp"
#include "rsteer/error.hpp"

namespace rsteer {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 30.0;
constexpr double kPlotRight = 470.0;  // legend lives to the right
constexpr double kMarkerSize = 4.0;

std::string_view color_of(QueryType qt) {
  switch (qt) {
    case QueryType::NonConflict: return "#1f77b4";
    case QueryType::RoleSetting: return "#d62728";
    case QueryType::RoleProfile: return "#ff7f0e";
    case QueryType::FactualKnowledge: return "#2ca02c";
    case QueryType::AbsentKnowledge: return "#9467bd";
  }
  return "#000000";
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string marker(int shape, double x, double y, std::string_view fill, std::string_view cls) {
  const double r = kMarkerSize;
  switch (shape % 5) {
    case 0:
      return fmt::format(R"(<circle class="{}" cx="{:.2f}" cy="{:.2f}" r="{:.2f}" fill="{}"/>)", cls, x, y, r, fill);
    case 1:
      return fmt::format(R"(<rect class="{}" x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="{}"/>)", cls,
                         x - r, y - r, 2 * r, 2 * r, fill);
    case 2:
      return fmt::format(R"(<polygon class="{}" points="{:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f}" fill="{}"/>)", cls, x,
                         y - r, x - r, y + r, x + r, y + r, fill);
    case 3:
      return fmt::format(
          R"(<polygon class="{}" points="{:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f}" fill="{}"/>)", cls, x,
          y - r, x + r, y, x, y + r, x - r, y, fill);
    default:
      return fmt::format(R"(<path class="{}" d="M{:.2f},{:.2f}L{:.2f},{:.2f}M{:.2f},{:.2f}L{:.2f},{:.2f}" stroke="{}"/>)",
                         cls, x - r, y - r, x + r, y + r, x - r, y + r, x + r, y - r, fill);
  }
}

}  // namespace

std::string scatter_svg(std::span<const EmbeddedPoint> points) {
  std::set<std::string> series_names;
  std::set<QueryType> labels;
  for (const auto& p : points) {
    series_names.insert(p.series);
    labels.insert(p.label);
  }
  std::map<std::string, int> shape_of;
  for (const auto& s : series_names) shape_of.emplace(s, static_cast<int>(shape_of.size()));

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    auto [xlo, xhi] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) { return a.x < b.x; });
    auto [ylo, yhi] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) { return a.y < b.y; });
    xmin = xlo->x, xmax = xhi->x, ymin = ylo->y, ymax = yhi->y;
  }
  auto to_px = [](double v, double lo, double hi, double from, double to) {
    if (hi - lo <= 0.0) return 0.5 * (from + to);
    return from + (v - lo) / (hi - lo) * (to - from);
  };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      kWidth, kHeight, kWidth, kHeight);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#ffffff\"/>\n", kWidth, kHeight);
  svg += fmt::format(
      "<rect x=\"{:.0f}\" y=\"{:.0f}\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"none\" stroke=\"#888888\"/>\n",
      kMargin - 10, kMargin - 10, kPlotRight - kMargin + 20, kHeight - 2 * kMargin + 20);
  svg += "<g id=\"points\">\n";
  for (const auto& p : points) {
    const double x = to_px(p.x, xmin, xmax, kMargin, kPlotRight);
    const double y = to_px(p.y, ymin, ymax, kHeight - kMargin, kMargin);
    svg += marker(shape_of[p.series], x, y, color_of(p.label), "marker") + "\n";
  }
  svg += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
  double ly = kMargin;
  for (QueryType qt : labels) {
    svg += marker(0, kPlotRight + 30, ly, color_of(qt), "legend") + "\n";
    svg += fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\">{}</text>\n", kPlotRight + 40, ly + 4, escape(display_name(qt)));
    ly += 18;
  }
  ly += 8;
  for (const auto& [name, shape] : shape_of) {
    svg += marker(shape, kPlotRight + 30, ly, "#555555", "legend") + "\n";
    svg += fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\">{}</text>\n", kPlotRight + 40, ly + 4,
                       escape(name.empty() ? "(no series)" : name));
    ly += 18;
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

void emit_scatter_svg(std::span<const EmbeddedPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("embed", ErrorCode::IoError, "cannot write " + path.string());
  out << scatter_svg(points);
  if (!out) throw Error("embed", ErrorCode::IoError, "write failed for " + path.string());
}

std::string points_csv(std::span<const EmbeddedPoint> points) {
  std::string csv = "query_id,label,role,series,x,y\n";
  for (const auto& p : points) {
    csv += fmt::format("{},{},{},{},{:.6f},{:.6f}\n", p.query_id, to_string(p.label), p.role, p.series, p.x, p.y);
  }
  return csv;
}

}  // namespace rsteer
