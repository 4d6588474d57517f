#include <doctest.h>

#include "cotkit/behavior_stats.hpp"
#include "cotkit/error.hpp"
#include "cotkit/svg.hpp"

using namespace cotkit;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("distribution chart has one bar per label with percentages") {
  BehaviorDistribution d;
  d.counts = {333, 620, 40, 7};
  d.proportions = {0.333, 0.62, 0.04, 0.007};
  const auto svg = render_svg(distribution_report(d));
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count_of(svg, "class=\"bar\"") == 4);
  CHECK(svg.find("33.3%") != std::string::npos);
  CHECK(svg.find("62.0%") != std::string::npos);
  CHECK(svg.find("0.7%") != std::string::npos);
  CHECK(render_svg(distribution_report(d)) == svg);
}

TEST_CASE("transition heatmap hatches undefined rows") {
  TransitionMatrix m;
  m.counts[0] = {53, 47, 0, 0};
  m.probs[0] = {0.53, 0.47, 0, 0};
  m.defined_rows[0] = true;
  const auto svg = render_svg(transition_report(m));
  CHECK(count_of(svg, "class=\"cell\"") == 4);
  CHECK(count_of(svg, "class=\"undefined-row\"") == 3);
  CHECK(svg.find(">0.53<") != std::string::npos);
  CHECK(svg.find(">0.47<") != std::string::npos);
}

TEST_CASE("unknown report kinds are rejected") {
  CHECK_THROWS_AS(render_svg(Json{{"kind", "histogram"}}), Error);
  CHECK_THROWS_AS(render_svg(Json::array()), Error);
}
