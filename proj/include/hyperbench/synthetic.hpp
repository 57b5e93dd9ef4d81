#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hyperbench/core.hpp"
#include "hyperbench/degrade.hpp"

namespace hyperbench {

/// Seeded linear-mixing scene: `endmembers` smooth spectra mixed by spatially
/// varying abundances that sum to one at every pixel. Band centres are spread
/// evenly over [first_nm, last_nm].
inline HsiCube synthetic_scene(std::size_t height, std::size_t width, std::size_t bands,
                               std::size_t endmembers, std::uint64_t seed,
                               double first_nm = 400.0, double last_nm = 1000.0) {
  if (endmembers == 0 || bands < 2) throw ParameterError("synthetic scene needs >= 1 endmember and >= 2 bands");
  const std::uint64_t key = rng::stream_key(seed, "synthetic-scene");
  std::uint64_t counter = 0;
  auto uniform = [&](double lo, double hi) {
    const double u = rng::to_unit_open_closed(rng::draw(key, counter++));
    return lo + (hi - lo) * u;
  };

  // spectra: baseline plus three Gaussian bumps, rescaled into [0.05, 0.95]
  std::vector<double> spectra(endmembers * bands);
  for (std::size_t e = 0; e < endmembers; ++e) {
    const double base = uniform(0.0, 0.3);
    double bump_c[3], bump_w[3], bump_a[3];
    for (int k = 0; k < 3; ++k) {
      bump_c[k] = uniform(0.0, 1.0);
      bump_w[k] = uniform(0.05, 0.3);
      bump_a[k] = uniform(0.2, 1.0);
    }
    double lo = kInf, hi = -kInf;
    for (std::size_t b = 0; b < bands; ++b) {
      const double t = static_cast<double>(b) / static_cast<double>(bands - 1);
      double v = base;
      for (int k = 0; k < 3; ++k) {
        const double d = (t - bump_c[k]) / bump_w[k];
        v += bump_a[k] * std::exp(-0.5 * d * d);
      }
      spectra[e * bands + b] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (std::size_t b = 0; b < bands; ++b) {
      spectra[e * bands + b] = 0.05 + 0.9 * (spectra[e * bands + b] - lo) / (hi - lo + 1e-12);
    }
  }

  // abundances: each endmember owns a few blobs; weights normalized per pixel
  constexpr int kBlobs = 4;
  struct Blob {
    double r, c, s, a;
  };
  std::vector<Blob> blobs(endmembers * kBlobs);
  for (auto& bl : blobs) {
    bl = {uniform(0.0, static_cast<double>(height)), uniform(0.0, static_cast<double>(width)),
          uniform(2.0, 0.25 * static_cast<double>(std::min(height, width)) + 2.0), uniform(0.5, 2.0)};
  }

  HsiCube cube(height, width, bands);
  std::vector<double> abundance(endmembers);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      double total = 0.0;
      for (std::size_t e = 0; e < endmembers; ++e) {
        double field = 0.02;
        for (int k = 0; k < kBlobs; ++k) {
          const auto& bl = blobs[e * kBlobs + static_cast<std::size_t>(k)];
          const double dr = (static_cast<double>(r) - bl.r) / bl.s;
          const double dc = (static_cast<double>(c) - bl.c) / bl.s;
          field += bl.a * std::exp(-0.5 * (dr * dr + dc * dc));
        }
        abundance[e] = field * field;
        total += abundance[e];
      }
      auto px = cube.pixel(r, c);
      for (std::size_t b = 0; b < bands; ++b) {
        double v = 0.0;
        for (std::size_t e = 0; e < endmembers; ++e) v += abundance[e] / total * spectra[e * bands + b];
        px[b] = v;
      }
    }
  }
  std::vector<double> wl(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    wl[b] = first_nm + (last_nm - first_nm) * static_cast<double>(b) / static_cast<double>(bands - 1);
  }
  cube.set_wavelengths(std::move(wl));
  return cube;
}

}  // namespace hyperbench
