#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hyperbench/core.hpp"

namespace hyperbench {

/// Neumaier-compensated running sum. Accumulation order is fixed by the
/// caller, so results are reproducible run to run.
template <typename T = double>
class CompensatedSum {
 public:
  void add(T x) noexcept {
    const T t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  T value() const noexcept { return sum_ + comp_; }

 private:
  T sum_{};
  T comp_{};
};

namespace metric_detail {

inline void require_same_shape(const HsiCube& x, const HsiCube& xhat, const char* metric) {
  if (!x.same_shape(xhat)) {
    throw ShapeError(std::string(metric) + ": shape mismatch " + x.shape_string() + " vs " +
                     xhat.shape_string());
  }
}

struct BandStats {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  double cov = 0.0;
};

// Population statistics of band k of both cubes (two-pass).
inline BandStats band_stats(const HsiCube& x, const HsiCube& y, std::size_t k) {
  const std::size_t n = x.pixels();
  const std::size_t bands = x.bands();
  const auto xd = x.data();
  const auto yd = y.data();
  CompensatedSum<> sx, sy;
  for (std::size_t p = 0; p < n; ++p) {
    sx.add(xd[p * bands + k]);
    sy.add(yd[p * bands + k]);
  }
  BandStats s;
  s.mean_x = sx.value() / static_cast<double>(n);
  s.mean_y = sy.value() / static_cast<double>(n);
  CompensatedSum<> vx, vy, cxy;
  for (std::size_t p = 0; p < n; ++p) {
    const double dx = xd[p * bands + k] - s.mean_x;
    const double dy = yd[p * bands + k] - s.mean_y;
    vx.add(dx * dx);
    vy.add(dy * dy);
    cxy.add(dx * dy);
  }
  s.var_x = vx.value() / static_cast<double>(n);
  s.var_y = vy.value() / static_cast<double>(n);
  s.cov = cxy.value() / static_cast<double>(n);
  return s;
}

inline double band_mse(const HsiCube& x, const HsiCube& y, std::size_t k) {
  const std::size_t n = x.pixels();
  const std::size_t bands = x.bands();
  CompensatedSum<> s;
  for (std::size_t p = 0; p < n; ++p) {
    const double d = y.data()[p * bands + k] - x.data()[p * bands + k];
    s.add(d * d);
  }
  return s.value() / static_cast<double>(n);
}

}  // namespace metric_detail

inline constexpr double kSamEpsilon = 1e-8;
inline constexpr double kSamDelta = 1e-9;

/// Square root of the mean squared difference over all entries.
inline double rmse(const HsiCube& x, const HsiCube& xhat) {
  metric_detail::require_same_shape(x, xhat, "rmse");
  CompensatedSum<> s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = xhat.data()[i] - x.data()[i];
    s.add(d * d);
  }
  return std::sqrt(s.value() / static_cast<double>(x.size()));
}

/// 20 log10(MAX / rmse); +inf when the cubes are identical.
inline double psnr_from_rmse(double rmse_value, double max_value = 1.0) {
  if (!(max_value > 0.0)) throw ParameterError("psnr: max_value must be positive");
  if (rmse_value == 0.0) return kInf;
  return 20.0 * std::log10(max_value / rmse_value);
}

inline double psnr(const HsiCube& x, const HsiCube& xhat, double max_value = 1.0) {
  return psnr_from_rmse(rmse(x, xhat), max_value);
}

/// Global per-band SSIM (one mean/variance/covariance per band), averaged
/// over bands. c1 = (0.01 MAX)^2, c2 = (0.03 MAX)^2.
inline double ssim(const HsiCube& x, const HsiCube& xhat, double max_value = 1.0) {
  metric_detail::require_same_shape(x, xhat, "ssim");
  const double c1 = (0.01 * max_value) * (0.01 * max_value);
  const double c2 = (0.03 * max_value) * (0.03 * max_value);
  CompensatedSum<> total;
  for (std::size_t k = 0; k < x.bands(); ++k) {
    const auto s = metric_detail::band_stats(x, xhat, k);
    const double num = (2.0 * s.mean_x * s.mean_y + c1) * (2.0 * s.cov + c2);
    const double den = (s.mean_x * s.mean_x + s.mean_y * s.mean_y + c1) * (s.var_x + s.var_y + c2);
    total.add(std::clamp(num / den, -1.0, 1.0));
  }
  return total.value() / static_cast<double>(x.bands());
}

struct UiqiResult {
  double value = 0.0;
  std::vector<std::size_t> degenerate_bands;  // bands scored by the fallback rule
};

/// Universal image quality index with global per-band statistics. A band
/// whose denominator vanishes scores 1 if the two bands are identical and 0
/// otherwise, and is listed in `degenerate_bands`.
inline UiqiResult uiqi_detailed(const HsiCube& x, const HsiCube& xhat) {
  metric_detail::require_same_shape(x, xhat, "uiqi");
  UiqiResult result;
  CompensatedSum<> total;
  const std::size_t bands = x.bands();
  for (std::size_t k = 0; k < bands; ++k) {
    const auto s = metric_detail::band_stats(x, xhat, k);
    const double den = (s.var_x + s.var_y) * (s.mean_x * s.mean_x + s.mean_y * s.mean_y);
    double q = 0.0;
    if (den == 0.0 || !std::isfinite(den)) {
      bool equal = true;
      for (std::size_t p = 0; p < x.pixels() && equal; ++p) {
        equal = x.data()[p * bands + k] == xhat.data()[p * bands + k];
      }
      q = equal ? 1.0 : 0.0;
      result.degenerate_bands.push_back(k);
    } else {
      q = std::clamp(4.0 * s.cov * s.mean_x * s.mean_y / den, -1.0, 1.0);
    }
    total.add(q);
  }
  result.value = total.value() / static_cast<double>(bands);
  return result;
}

inline double uiqi(const HsiCube& x, const HsiCube& xhat) { return uiqi_detailed(x, xhat).value; }

/// 100 / factor * sqrt(mean_k RMSE_k^2 / mu_k^2), mu_k the ground-truth band
/// mean.
inline double ergas(const HsiCube& x, const HsiCube& xhat, int factor) {
  metric_detail::require_same_shape(x, xhat, "ergas");
  if (factor < 1) throw ParameterError("ergas: factor must be >= 1");
  CompensatedSum<> total;
  for (std::size_t k = 0; k < x.bands(); ++k) {
    CompensatedSum<> m;
    for (std::size_t p = 0; p < x.pixels(); ++p) m.add(x.data()[p * x.bands() + k]);
    const double mu = m.value() / static_cast<double>(x.pixels());
    if (mu == 0.0) throw ValidationError("ERGAS undefined for zero-mean band " + std::to_string(k));
    total.add(metric_detail::band_mse(x, xhat, k) / (mu * mu));
  }
  return 100.0 / factor * std::sqrt(total.value() / static_cast<double>(x.bands()));
}

/// Mean spectral angle in degrees, with the arccos argument computed as
/// min(<x, y> / (|x||y| + eps), 1 - delta).
inline double sam(const HsiCube& x, const HsiCube& xhat) {
  metric_detail::require_same_shape(x, xhat, "sam");
  CompensatedSum<> total;
  for (std::size_t r = 0; r < x.height(); ++r) {
    for (std::size_t c = 0; c < x.width(); ++c) {
      const auto a = x.pixel(r, c);
      const auto b = xhat.pixel(r, c);
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
      }
      double cosine = std::min(dot / (std::sqrt(na) * std::sqrt(nb) + kSamEpsilon), 1.0 - kSamDelta);
      cosine = std::max(cosine, -1.0);
      total.add(180.0 / std::numbers::pi * std::acos(cosine));
    }
  }
  return total.value() / static_cast<double>(x.pixels());
}

/// All six metrics. Failures are rethrown with the metric name attached.
inline MetricReport evaluate_all(const HsiCube& x, const HsiCube& xhat, int factor,
                                 double max_value = 1.0) {
  MetricReport m;
  auto guarded = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      const std::string what = e.what();
      if (what.rfind(name, 0) == 0) throw;
      throw Error(std::string(name) + ": " + what);
    }
  };
  m.rmse = guarded("rmse", [&] { return rmse(x, xhat); });
  m.psnr_db = guarded("psnr", [&] { return psnr_from_rmse(m.rmse, max_value); });
  m.ssim = guarded("ssim", [&] { return ssim(x, xhat, max_value); });
  m.uiqi = guarded("uiqi", [&] { return uiqi(x, xhat); });
  m.ergas = guarded("ergas", [&] { return ergas(x, xhat, factor); });
  m.sam_deg = guarded("sam", [&] { return sam(x, xhat); });
  return m;
}

}  // namespace hyperbench
