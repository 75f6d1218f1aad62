#pragma once

#include <cmath>
#include <cstdint>

namespace shrinkdim {

/// Additive-recurrence (golden ratio) low-discrepancy point in (0, 1).
inline double weyl_point(std::uint64_t index, std::uint64_t seed) {
  constexpr double g = 0.6180339887498948482;
  const double start = std::fmod(0.5 + 0.7548776662466927 * static_cast<double>(seed % 1000003), 1.0);
  double u = std::fmod(start + g * static_cast<double>(index), 1.0);
  if (u <= 0.0) u += 0.5;
  return u;
}

/// Uniform double in [0, 1) from a 64-bit random word (platform independent).
inline double unit_from_bits(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace shrinkdim
