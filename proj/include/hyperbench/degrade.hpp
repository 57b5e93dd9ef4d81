#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <utility>

#include "hyperbench/core.hpp"
#include "hyperbench/psf.hpp"
#include "hyperbench/srf.hpp"

namespace hyperbench {

// ---------------------------------------------------------------------------
// Seeded noise streams
// ---------------------------------------------------------------------------

namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ULL) noexcept {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Key of the stream named `tag` under `seed`.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view tag) noexcept {
  return mix64(mix64(seed + kGolden) ^ fnv1a(tag));
}

/// Counter-based draw: the value at position `counter` depends only on
/// (key, counter), never on the order in which positions are visited.
constexpr std::uint64_t draw(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(key ^ mix64(counter + kGolden));
}

/// Uniform on (0, 1] from the top 53 bits.
constexpr double to_unit_open_closed(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal at stream position `i` (Box-Muller over counters 2i, 2i+1).
inline double normal(std::uint64_t key, std::uint64_t i) noexcept {
  const double u1 = to_unit_open_closed(draw(key, 2 * i));
  const double u2 = to_unit_open_closed(draw(key, 2 * i + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng

// ---------------------------------------------------------------------------
// Spatial operators
// ---------------------------------------------------------------------------

/// Drops bottom rows and right columns so both dimensions become multiples
/// of `factor`.
inline HsiCube crop_to_factor(const HsiCube& cube, int factor) {
  if (factor < 1) throw ParameterError("factor must be >= 1");
  const auto f = static_cast<std::size_t>(factor);
  if (f > cube.height() || f > cube.width()) {
    throw ParameterError("factor " + std::to_string(factor) + " exceeds a dimension of " +
                         cube.shape_string());
  }
  const std::size_t h = cube.height() / f * f;
  const std::size_t w = cube.width() / f * f;
  if (h == cube.height() && w == cube.width()) return cube;
  HsiCube out(h, w, cube.bands());
  out.set_wavelengths(cube.wavelengths());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto src = cube.pixel(r, c);
      std::copy(src.begin(), src.end(), out.pixel(r, c).begin());
    }
  }
  return out;
}

/// Area resampling by an integer factor: each output pixel is the mean of its
/// factor x factor source block, band by band.
inline HsiCube downsample_area(const HsiCube& cube, int factor) {
  if (factor < 1) throw ParameterError("factor must be >= 1");
  if (factor == 1) return cube;
  const auto f = static_cast<std::size_t>(factor);
  if (cube.height() % f != 0 || cube.width() % f != 0) {
    throw ShapeError("dimensions " + cube.shape_string() + " not divisible by factor " +
                     std::to_string(factor));
  }
  const std::size_t h = cube.height() / f;
  const std::size_t w = cube.width() / f;
  const std::size_t bands = cube.bands();
  const double inv = 1.0 / static_cast<double>(f * f);
  HsiCube out(h, w, bands);
  out.set_wavelengths(cube.wavelengths());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      auto dst = out.pixel(r, c);
      for (std::size_t dr = 0; dr < f; ++dr) {
        for (std::size_t dc = 0; dc < f; ++dc) {
          const auto src = cube.pixel(r * f + dr, c * f + dc);
          for (std::size_t b = 0; b < bands; ++b) dst[b] += src[b];
        }
      }
      for (double& v : dst) v *= inv;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

struct NoisyCube {
  HsiCube cube;
  double realized_snr_db = 0.0;
};

/// Adds i.i.d. zero-mean Gaussian noise with variance P / 10^(snr/10), where
/// P is the mean squared value over the whole cube. The noise is a pure
/// function of (seed, stream_tag) and the element index.
inline NoisyCube add_awgn(const HsiCube& cube, double snr_db, std::uint64_t seed,
                          std::string_view stream_tag) {
  if (!std::isfinite(snr_db)) throw ParameterError("snr_db must be finite");
  double power = 0.0;
  for (double v : cube.data()) power += v * v;
  power /= static_cast<double>(cube.size());
  if (!(power > 0.0)) throw ValidationError("cannot add noise at a given SNR to an all-zero cube");

  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  const std::uint64_t key = rng::stream_key(seed, stream_tag);
  NoisyCube out{cube, 0.0};
  double noise_power = 0.0;
  auto data = out.cube.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double n = sigma * rng::normal(key, i);
    data[i] += n;
    noise_power += n * n;
  }
  noise_power /= static_cast<double>(data.size());
  out.realized_snr_db = 10.0 * std::log10(power / noise_power);
  return out;
}

// ---------------------------------------------------------------------------
// Observation pairs
// ---------------------------------------------------------------------------

struct ObservationPair {
  HsiCube lr_hsi;  // h x w x C
  HsiCube hr_msi;  // H x W x c
  HsiCube gt;      // H x W x C, cropped to the factor
  Snr realized_lr_snr_db;
  Snr realized_msi_snr_db;
};

/// LR-HSI = noise(downsample(blur(gt))) and HR-MSI = noise(S gt), after
/// cropping gt to a multiple of the factor. Noise stages are skipped when
/// the corresponding SNR is absent.
inline ObservationPair generate_pair(const HsiCube& gt, const DegradationConfig& config,
                                     const SrfMatrix& srf, const PsfKernel& kernel) {
  validate(config);
  if (srf.cols != gt.bands()) {
    throw ShapeError("SRF expects " + std::to_string(srf.cols) + " bands, ground truth has " +
                     std::to_string(gt.bands()));
  }
  ObservationPair pair;
  pair.gt = crop_to_factor(gt, config.factor);

  pair.lr_hsi = downsample_area(blur(pair.gt, kernel), config.factor);
  if (config.lr_snr_db) {
    auto noisy = add_awgn(pair.lr_hsi, *config.lr_snr_db, config.seed, "lr");
    pair.lr_hsi = std::move(noisy.cube);
    pair.realized_lr_snr_db = noisy.realized_snr_db;
  }

  pair.hr_msi = apply_srf(pair.gt, srf);
  if (config.msi_snr_db) {
    auto noisy = add_awgn(pair.hr_msi, *config.msi_snr_db, config.seed, "msi");
    pair.hr_msi = std::move(noisy.cube);
    pair.realized_msi_snr_db = noisy.realized_snr_db;
  }
  return pair;
}

inline ObservationPair generate_pair(const HsiCube& gt, const DegradationConfig& config,
                                     const SrfMatrix& srf) {
  return generate_pair(gt, config, srf, make_kernel(config.psf));
}

}  // namespace hyperbench
