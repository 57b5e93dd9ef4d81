#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hyperbench/core.hpp"

namespace hyperbench {

/// Percentile of `values` using linear interpolation between adjacent order
/// statistics: position p/100 * (n - 1) in the sorted sequence.
template <typename T>
double percentile(std::span<const T> values, double p) {
  if (values.empty()) throw ParameterError("percentile of an empty sequence");
  if (!(p >= 0.0 && p <= 100.0)) throw ParameterError("percentile must lie in [0, 100]");
  std::vector<T> v(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = static_cast<double>(v[lo]);
  if (frac == 0.0 || lo + 1 >= v.size()) return a;
  const double b = static_cast<double>(*std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end()));
  return a + frac * (b - a);
}

/// Clips the cube to its global [p_lo, p_hi] percentile values and rescales
/// that range affinely onto [0, 1]. Percentiles are taken over all pixels and
/// bands jointly.
inline HsiCube build_ground_truth(const HsiCube& raw, double p_lo = 1.0, double p_hi = 99.0) {
  if (!(p_lo >= 0.0 && p_lo < p_hi && p_hi <= 100.0)) {
    throw ParameterError("percentiles must satisfy 0 <= p_lo < p_hi <= 100");
  }
  const double lo = percentile(raw.data(), p_lo);
  const double hi = percentile(raw.data(), p_hi);
  if (!(hi > lo)) throw ValidationError("degenerate dynamic range");

  HsiCube out = raw;
  const double range = hi - lo;
  for (double& v : out.data()) {
    v = (std::clamp(v, lo, hi) - lo) / range;
  }
  return out;
}

}  // namespace hyperbench
