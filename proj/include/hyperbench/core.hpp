#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hyperbench/error.hpp"

namespace hyperbench {

// ---------------------------------------------------------------------------
// HsiCube
// ---------------------------------------------------------------------------

/// A rows x cols x bands radiance array with optional band-center wavelengths
/// in nanometres. Storage is pixel-interleaved: element (r, c, b) lives at
/// (r * width + c) * bands + b, which is also NPY C-order for shape (H, W, C).
class HsiCube {
 public:
  HsiCube() = default;

  /// Zero-filled (or `fill`-filled) cube. Dimensions must be positive.
  HsiCube(std::size_t height, std::size_t width, std::size_t bands, double fill = 0.0)
      : height_(height), width_(width), bands_(bands) {
    if (height == 0 || width == 0 || bands == 0) {
      throw ValidationError("cube dimensions must be positive");
    }
    data_.assign(height * width * bands, fill);
  }

  /// Validating constructor; throws ValidationError naming the first
  /// violated invariant.
  static HsiCube from_data(std::size_t height, std::size_t width, std::size_t bands,
                           std::vector<double> data,
                           std::optional<std::vector<double>> wavelengths = std::nullopt);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(std::size_t r, std::size_t c, std::size_t b) const noexcept {
    return (r * width_ + c) * bands_ + b;
  }

  double& operator()(std::size_t r, std::size_t c, std::size_t b) noexcept {
    return data_[index(r, c, b)];
  }
  double operator()(std::size_t r, std::size_t c, std::size_t b) const noexcept {
    return data_[index(r, c, b)];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Spectrum of one pixel.
  std::span<const double> pixel(std::size_t r, std::size_t c) const noexcept {
    return std::span<const double>(data_).subspan(index(r, c, 0), bands_);
  }
  std::span<double> pixel(std::size_t r, std::size_t c) noexcept {
    return std::span<double>(data_).subspan(index(r, c, 0), bands_);
  }

  const std::optional<std::vector<double>>& wavelengths() const noexcept { return wavelengths_; }
  void set_wavelengths(std::optional<std::vector<double>> wl);

  bool same_shape(const HsiCube& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && bands_ == other.bands_;
  }

  std::string shape_string() const {
    std::ostringstream os;
    os << "(" << height_ << ", " << width_ << ", " << bands_ << ")";
    return os.str();
  }

  /// Values and wavelengths compared bitwise.
  friend bool operator==(const HsiCube& a, const HsiCube& b) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t bands_ = 0;
  std::vector<double> data_;
  std::optional<std::vector<double>> wavelengths_;
};

inline void check_wavelengths(std::span<const double> wl, std::size_t bands) {
  if (wl.size() != bands) {
    std::ostringstream os;
    os << "wavelength length mismatch: " << wl.size() << " wavelengths for " << bands << " bands";
    throw ValidationError(os.str());
  }
  for (std::size_t i = 0; i < wl.size(); ++i) {
    if (!std::isfinite(wl[i])) throw ValidationError("wavelengths must be finite");
    if (i > 0 && !(wl[i] > wl[i - 1])) {
      throw ValidationError("wavelengths not strictly increasing");
    }
  }
}

inline void HsiCube::set_wavelengths(std::optional<std::vector<double>> wl) {
  if (wl) check_wavelengths(*wl, bands_);
  wavelengths_ = std::move(wl);
}

inline HsiCube HsiCube::from_data(std::size_t height, std::size_t width, std::size_t bands,
                                  std::vector<double> data,
                                  std::optional<std::vector<double>> wavelengths) {
  if (height == 0 || width == 0 || bands == 0) {
    throw ValidationError("cube dimensions must be positive");
  }
  if (data.size() != height * width * bands) {
    std::ostringstream os;
    os << "data holds " << data.size() << " values, expected " << height * width * bands;
    throw ValidationError(os.str());
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      const std::size_t b = i % bands;
      const std::size_t c = (i / bands) % width;
      const std::size_t r = i / (bands * width);
      std::ostringstream os;
      os << "non-finite entry at (" << r << "," << c << "," << b << ")";
      throw ValidationError(os.str());
    }
  }
  HsiCube cube;
  cube.height_ = height;
  cube.width_ = width;
  cube.bands_ = bands;
  cube.data_ = std::move(data);
  cube.set_wavelengths(std::move(wavelengths));
  return cube;
}

/// Re-checks every HsiCube invariant on an existing value.
inline void validate(const HsiCube& cube) {
  HsiCube::from_data(cube.height(), cube.width(), cube.bands(),
                     std::vector<double>(cube.data().begin(), cube.data().end()),
                     cube.wavelengths());
}

// ---------------------------------------------------------------------------
// Point spread functions
// ---------------------------------------------------------------------------

enum class PsfFamily {
  gaussian,
  kolmogorov,
  airy,
  moffat,
  sinc,
  lorentzian_sq,
  hermite,
  parabolic,
  gabor,
  delta,
};

inline constexpr std::array<PsfFamily, 10> kAllPsfFamilies = {
    PsfFamily::gaussian, PsfFamily::kolmogorov,    PsfFamily::airy,
    PsfFamily::moffat,   PsfFamily::sinc,          PsfFamily::lorentzian_sq,
    PsfFamily::hermite,  PsfFamily::parabolic,     PsfFamily::gabor,
    PsfFamily::delta,
};

inline std::string_view to_string(PsfFamily f) noexcept {
  switch (f) {
    case PsfFamily::gaussian: return "gaussian";
    case PsfFamily::kolmogorov: return "kolmogorov";
    case PsfFamily::airy: return "airy";
    case PsfFamily::moffat: return "moffat";
    case PsfFamily::sinc: return "sinc";
    case PsfFamily::lorentzian_sq: return "lorentzian_sq";
    case PsfFamily::hermite: return "hermite";
    case PsfFamily::parabolic: return "parabolic";
    case PsfFamily::gabor: return "gabor";
    case PsfFamily::delta: return "delta";
  }
  return "unknown";
}

inline PsfFamily psf_family_from_string(std::string_view name) {
  for (PsfFamily f : kAllPsfFamilies) {
    if (to_string(f) == name) return f;
  }
  throw ParameterError("unknown PSF family '" + std::string(name) + "'");
}

/// Family, optional kernel side and a name->value parameter map. Missing
/// parameters take the family defaults when the kernel is built.
struct PsfSpec {
  PsfFamily family = PsfFamily::gaussian;
  std::optional<int> size;
  std::map<std::string, double> params;

  friend bool operator==(const PsfSpec&, const PsfSpec&) = default;
};

/// A normalized, odd-sided 2-D kernel. `params` holds the fully resolved
/// parameter record (defaults filled in, "size" included).
struct PsfKernel {
  PsfFamily family = PsfFamily::delta;
  int size = 1;
  std::vector<double> weights{1.0};  // row-major size x size
  std::map<std::string, double> params;

  double at(int i, int j) const noexcept {
    return weights[static_cast<std::size_t>(i) * static_cast<std::size_t>(size) +
                   static_cast<std::size_t>(j)];
  }
  int radius() const noexcept { return size / 2; }
};

inline void validate(const PsfKernel& k) {
  if (k.size < 1 || k.size % 2 == 0) throw ValidationError("kernel side must be odd and >= 1");
  if (k.weights.size() != static_cast<std::size_t>(k.size) * static_cast<std::size_t>(k.size)) {
    throw ValidationError("kernel weight count does not match its side length");
  }
  double sum = 0.0;
  for (double w : k.weights) {
    if (!std::isfinite(w)) throw ValidationError("kernel has a non-finite weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("kernel weights do not sum to 1");
  if (k.family == PsfFamily::delta && (k.size != 1 || k.weights[0] != 1.0)) {
    throw ValidationError("delta kernel must be [[1.0]]");
  }
}

// ---------------------------------------------------------------------------
// Spectral response
// ---------------------------------------------------------------------------

/// Row-normalized msi_bands x hsi_bands projection.
struct SrfMatrix {
  std::size_t rows = 0;  // c
  std::size_t cols = 0;  // C
  std::vector<double> weights;  // row-major
  std::string sensor;
  std::vector<double> source_wavelengths;

  double at(std::size_t k, std::size_t b) const noexcept { return weights[k * cols + b]; }
};

inline void validate(const SrfMatrix& s) {
  if (s.rows == 0 || s.cols == 0 || s.weights.size() != s.rows * s.cols) {
    throw ValidationError("SRF matrix shape is inconsistent");
  }
  for (std::size_t k = 0; k < s.rows; ++k) {
    double sum = 0.0;
    bool positive = false;
    for (std::size_t b = 0; b < s.cols; ++b) {
      const double w = s.at(k, b);
      if (!std::isfinite(w) || w < 0.0) {
        throw ValidationError("SRF row " + std::to_string(k) + " has a negative entry");
      }
      positive = positive || w > 0.0;
      sum += w;
    }
    if (!positive) throw ValidationError("SRF row " + std::to_string(k) + " is all zero");
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError("SRF row " + std::to_string(k) + " does not sum to 1");
    }
  }
}

// ---------------------------------------------------------------------------
// Configuration, metrics and records
// ---------------------------------------------------------------------------

/// An SNR in decibels, or nullopt for "no noise".
using Snr = std::optional<double>;

inline std::string snr_to_string(const Snr& s) {
  if (!s) return "none";
  std::ostringstream os;
  os.precision(17);
  os << *s;
  return os.str();
}

/// One fully specified experiment point.
struct DegradationConfig {
  PsfSpec psf;
  std::string srf;  // sensor id or path to a curve CSV
  int factor = 1;
  Snr lr_snr_db;
  Snr msi_snr_db;
  std::uint64_t seed = 0;
  std::pair<double, double> clip_percentiles{1.0, 99.0};
};

inline void validate(const DegradationConfig& c) {
  if (c.factor < 1) throw ValidationError("factor must be >= 1");
  if (c.lr_snr_db && !std::isfinite(*c.lr_snr_db)) throw ValidationError("lr_snr_db must be finite");
  if (c.msi_snr_db && !std::isfinite(*c.msi_snr_db)) {
    throw ValidationError("msi_snr_db must be finite");
  }
  const auto [lo, hi] = c.clip_percentiles;
  if (!(lo >= 0.0 && lo < hi && hi <= 100.0)) {
    throw ValidationError("clip percentiles must satisfy 0 <= lo < hi <= 100");
  }
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct MetricReport {
  double rmse = 0.0;
  double psnr_db = kInf;  // +inf when rmse == 0
  double ssim = 1.0;
  double uiqi = 1.0;
  double ergas = 0.0;
  double sam_deg = 0.0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

inline void validate(const MetricReport& m) {
  if (!(m.rmse >= 0.0)) throw ValidationError("rmse must be nonnegative");
  if ((m.rmse == 0.0) != (m.psnr_db == kInf)) {
    throw ValidationError("psnr must be +inf exactly when rmse is 0");
  }
  if (!(m.sam_deg >= 0.0 && m.sam_deg <= 180.0)) throw ValidationError("sam out of [0, 180]");
  if (!(m.ssim >= -1.0 && m.ssim <= 1.0)) throw ValidationError("ssim out of [-1, 1]");
  if (!(m.uiqi >= -1.0 && m.uiqi <= 1.0)) throw ValidationError("uiqi out of [-1, 1]");
  if (!(m.ergas >= 0.0)) throw ValidationError("ergas must be nonnegative");
}

enum class RunStatus { ok, method_error, timeout, metric_error, input_error };

inline std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::method_error: return "method_error";
    case RunStatus::timeout: return "timeout";
    case RunStatus::metric_error: return "metric_error";
    case RunStatus::input_error: return "input_error";
  }
  return "unknown";
}

inline RunStatus run_status_from_string(std::string_view s) {
  for (RunStatus v : {RunStatus::ok, RunStatus::method_error, RunStatus::timeout,
                      RunStatus::metric_error, RunStatus::input_error}) {
    if (to_string(v) == s) return v;
  }
  throw ParameterError("unknown run status '" + std::string(s) + "'");
}

struct ExperimentRecord {
  DegradationConfig config;
  std::map<std::string, double> psf_params;  // resolved kernel parameters
  std::string dataset_id;
  std::string method_id;
  std::optional<MetricReport> metrics;
  double wall_time_s = 0.0;
  RunStatus status = RunStatus::ok;
  std::size_t run_index = 0;
  std::string message;
};

inline void validate(const ExperimentRecord& r) {
  if ((r.status == RunStatus::ok) != r.metrics.has_value()) {
    throw ValidationError("metrics must be present exactly when status is ok");
  }
  if (!(r.wall_time_s >= 0.0)) throw ValidationError("wall time must be nonnegative");
  validate(r.config);
  if (r.metrics) validate(*r.metrics);
}

}  // namespace hyperbench
