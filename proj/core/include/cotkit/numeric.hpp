#pragma once

#include <cmath>
#include <cstddef>

namespace cotkit {

/// floor(x + 1/2), with a small tolerance so decimal fractions like 0.3 * 5
/// round the way they read.
inline std::size_t round_half_up(double x) noexcept {
  if (!(x > 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

}  // namespace cotkit
