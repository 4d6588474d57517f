#pragma once

#include <string>

#include "cotkit/json.hpp"

namespace cotkit {

/// Static SVG for a "distribution" report (bar chart, percentages with one
/// decimal) or a "transition" report (4x4 heatmap, probabilities with two
/// decimals, undefined rows hatched and unlabeled). Output bytes depend only
/// on the report contents.
std::string render_svg(const Json& report);

}  // namespace cotkit
