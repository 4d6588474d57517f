#include "cotkit/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>

#include "cotkit/behavior_stats.hpp"
#include "cotkit/error.hpp"

namespace cotkit {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string num(double v) { return fmt("%.2f", v); }

constexpr const char* kBarColors[kNumLabels] = {"#4c72b0", "#55a868", "#c4a000", "#c44e52"};

std::string render_distribution(const BehaviorDistribution& d) {
  constexpr double kWidth = 480, kHeight = 320, kLeft = 50, kBottom = 270, kPlotHeight = 220, kBarWidth = 70,
                   kGap = 30;
  std::ostringstream svg;
  svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kWidth << R"(" height=")" << kHeight
      << R"(" viewBox="0 0 )" << kWidth << ' ' << kHeight << R"(" font-family="sans-serif" font-size="12">)" << '\n';
  svg << R"(  <title>Behavior distribution</title>)" << '\n';
  svg << R"(  <line x1=")" << kLeft << R"(" y1=")" << kBottom << R"(" x2=")" << kWidth - 10 << R"(" y2=")" << kBottom
      << R"(" stroke="#333"/>)" << '\n';
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const std::string name(label_name(kAllLabels[i]));
    const double p = std::clamp(d.proportions[i], 0.0, 1.0);
    const double h = p * kPlotHeight;
    const double x = kLeft + kGap / 2 + static_cast<double>(i) * (kBarWidth + kGap);
    svg << R"(  <rect class="bar" data-label=")" << name << R"(" x=")" << num(x) << R"(" y=")" << num(kBottom - h)
        << R"(" width=")" << num(kBarWidth) << R"(" height=")" << num(h) << R"(" fill=")" << kBarColors[i] << R"("/>)"
        << '\n';
    svg << R"(  <text x=")" << num(x + kBarWidth / 2) << R"(" y=")" << num(kBottom - h - 6)
        << R"(" text-anchor="middle">)" << fmt("%.1f", d.proportions[i] * 100.0) << "%</text>\n";
    svg << R"(  <text x=")" << num(x + kBarWidth / 2) << R"(" y=")" << num(kBottom + 18)
        << R"(" text-anchor="middle">)" << name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string heat_color(double p) {
  p = std::clamp(p, 0.0, 1.0);
  const int r = static_cast<int>(255 - p * (255 - 33));
  const int g = static_cast<int>(255 - p * (255 - 102));
  const int b = static_cast<int>(255 - p * (255 - 172));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string render_transition(const TransitionMatrix& m) {
  constexpr double kCell = 80, kLeft = 100, kTop = 60, kWidth = kLeft + 4 * kCell + 20, kHeight = kTop + 4 * kCell + 20;
  std::ostringstream svg;
  svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kWidth << R"(" height=")" << kHeight
      << R"(" viewBox="0 0 )" << kWidth << ' ' << kHeight << R"(" font-family="sans-serif" font-size="12">)" << '\n';
  svg << R"(  <title>Behavior transition matrix</title>)" << '\n';
  svg << "  <defs>\n"
      << R"svg(    <pattern id="hatch" width="8" height="8" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">)svg"
      << '\n'
      << R"(      <rect width="8" height="8" fill="#f0f0f0"/><line x1="0" y1="0" x2="0" y2="8" stroke="#999" stroke-width="2"/>)"
      << '\n'
      << "    </pattern>\n  </defs>\n";
  for (std::size_t j = 0; j < kNumLabels; ++j) {
    svg << R"(  <text x=")" << num(kLeft + (static_cast<double>(j) + 0.5) * kCell) << R"(" y=")" << num(kTop - 10)
        << R"(" text-anchor="middle">)" << label_name(kAllLabels[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const double y = kTop + static_cast<double>(i) * kCell;
    const std::string from(label_name(kAllLabels[i]));
    svg << R"(  <text x=")" << num(kLeft - 8) << R"(" y=")" << num(y + kCell / 2 + 4) << R"(" text-anchor="end">)"
        << from << "</text>\n";
    if (!m.defined_rows[i]) {
      svg << R"(  <rect class="undefined-row" data-from=")" << from << R"(" x=")" << num(kLeft) << R"(" y=")"
          << num(y) << R"(" width=")" << num(4 * kCell) << R"(" height=")" << num(kCell)
          << R"svg(" fill="url(#hatch)" stroke="#fff"/>)svg" << '\n';
      continue;
    }
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      const double x = kLeft + static_cast<double>(j) * kCell;
      const double p = m.probs[i][j];
      svg << R"(  <rect class="cell" data-from=")" << from << R"(" data-to=")" << label_name(kAllLabels[j])
          << R"(" x=")" << num(x) << R"(" y=")" << num(y) << R"(" width=")" << num(kCell) << R"(" height=")"
          << num(kCell) << R"(" fill=")" << heat_color(p) << R"(" stroke="#fff"/>)" << '\n';
      svg << R"(  <text x=")" << num(x + kCell / 2) << R"(" y=")" << num(y + kCell / 2 + 4)
          << R"(" text-anchor="middle" fill=")" << (p > 0.55 ? "#fff" : "#000") << R"(">)" << fmt("%.2f", p)
          << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

std::string render_svg(const Json& report) {
  const std::string kind = report.is_object() ? report.value("kind", "") : "";
  if (kind == "distribution") return render_distribution(distribution_from_report(report));
  if (kind == "transition") return render_transition(transition_from_report(report));
  fail(ErrorCode::kSchema, "cannot render report of kind '" + kind + "'");
}

}  // namespace cotkit
