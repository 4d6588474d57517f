#pragma once

#include <nlohmann/json.hpp>

namespace cotkit {

// Insertion-ordered so emitted records and reports keep their schema order.
using Json = nlohmann::ordered_json;

}  // namespace cotkit
