#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hyperbench/core.hpp"

namespace hyperbench {

struct SrfCurve {
  std::string name;
  std::vector<double> wavelengths_nm;  // strictly increasing
  std::vector<double> response;        // >= 0
};

/// Per-band spectral response curves of one multispectral sensor.
struct SrfCurveSet {
  std::string sensor;
  std::vector<SrfCurve> bands;
};

inline void validate(const SrfCurveSet& set) {
  if (set.bands.empty()) throw ValidationError("SRF curve set has no bands");
  for (const auto& c : set.bands) {
    if (c.wavelengths_nm.size() < 2 || c.wavelengths_nm.size() != c.response.size()) {
      throw ValidationError("SRF band '" + c.name + "' needs at least 2 samples");
    }
    bool positive = false;
    for (std::size_t i = 0; i < c.response.size(); ++i) {
      if (i > 0 && !(c.wavelengths_nm[i] > c.wavelengths_nm[i - 1])) {
        throw ValidationError("SRF band '" + c.name + "' wavelengths not strictly increasing");
      }
      if (!(c.response[i] >= 0.0)) throw ValidationError("SRF band '" + c.name + "' has a negative response");
      positive = positive || c.response[i] > 0.0;
    }
    if (!positive) throw ValidationError("SRF band '" + c.name + "' is identically zero");
  }
}

namespace srf_detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw FormatError(where + ": cannot parse '" + s + "' as a number");
  }
  return v;
}

}  // namespace srf_detail

/// Reads a curve CSV: header `wavelength_nm,<band1>,...`, then one row per
/// wavelength sample. The sensor id is the file stem.
inline SrfCurveSet load_srf_curves(const std::filesystem::path& path) {
  using srf_detail::parse_number;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open SRF file " + path.string());

  SrfCurveSet set;
  set.sensor = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (srf_detail::trim(line).empty()) continue;
    const auto cells = srf_detail::split_commas(line);
    const std::string where = path.filename().string() + " line " + std::to_string(line_no);
    if (set.bands.empty() && columns == 0) {
      if (cells.size() < 2 || cells[0] != "wavelength_nm") {
        throw FormatError(where + ": header must start with 'wavelength_nm' followed by band names");
      }
      columns = cells.size();
      for (std::size_t i = 1; i < cells.size(); ++i) set.bands.push_back({cells[i], {}, {}});
      continue;
    }
    if (cells.size() != columns) {
      throw FormatError(where + ": expected " + std::to_string(columns) + " columns, found " +
                        std::to_string(cells.size()));
    }
    const double wl = parse_number(cells[0], where);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const double r = parse_number(cells[i], where);
      auto& band = set.bands[i - 1];
      if (r < 0.0) {
        throw FormatError(where + ": negative response in band '" + band.name + "'");
      }
      if (!band.wavelengths_nm.empty() && !(wl > band.wavelengths_nm.back())) {
        throw FormatError(where + ": wavelengths not strictly increasing");
      }
      band.wavelengths_nm.push_back(wl);
      band.response.push_back(r);
    }
  }
  if (columns == 0) throw FormatError(path.string() + ": empty SRF file");
  try {
    validate(set);
  } catch (const ValidationError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return set;
}

/// Linear interpolation of one curve at `wl`; zero outside its support.
inline double sample_curve(const SrfCurve& curve, double wl) {
  const auto& x = curve.wavelengths_nm;
  if (wl < x.front() || wl > x.back()) return 0.0;
  const auto it = std::upper_bound(x.begin(), x.end(), wl);
  if (it == x.end()) return curve.response.back();
  const auto hi = static_cast<std::size_t>(it - x.begin());
  const std::size_t lo = hi - 1;
  const double t = (wl - x[lo]) / (x[hi] - x[lo]);
  return curve.response[lo] + t * (curve.response[hi] - curve.response[lo]);
}

/// Samples every curve at the hyperspectral band centres and normalizes each
/// row to unit sum.
inline SrfMatrix build_srf_matrix(const SrfCurveSet& curves, std::span<const double> hsi_wavelengths) {
  validate(curves);
  if (hsi_wavelengths.size() < 2) throw ParameterError("need at least 2 hyperspectral wavelengths");
  check_wavelengths(hsi_wavelengths, hsi_wavelengths.size());

  SrfMatrix m;
  m.rows = curves.bands.size();
  m.cols = hsi_wavelengths.size();
  m.sensor = curves.sensor;
  m.source_wavelengths.assign(hsi_wavelengths.begin(), hsi_wavelengths.end());
  m.weights.assign(m.rows * m.cols, 0.0);
  for (std::size_t k = 0; k < m.rows; ++k) {
    double sum = 0.0;
    for (std::size_t b = 0; b < m.cols; ++b) {
      const double v = sample_curve(curves.bands[k], hsi_wavelengths[b]);
      m.weights[k * m.cols + b] = v;
      sum += v;
    }
    if (!(sum > 0.0)) {
      throw ValidationError("band " + std::to_string(k) + " ('" + curves.bands[k].name +
                            "') has no spectral overlap with the hyperspectral wavelengths");
    }
    for (std::size_t b = 0; b < m.cols; ++b) m.weights[k * m.cols + b] /= sum;
  }
  return m;
}

/// Per-pixel projection y = S x.
inline HsiCube apply_srf(const HsiCube& cube, const SrfMatrix& srf) {
  if (cube.bands() != srf.cols) {
    throw ShapeError("band-count mismatch: cube has " + std::to_string(cube.bands()) +
                     " bands, SRF expects " + std::to_string(srf.cols));
  }
  HsiCube out(cube.height(), cube.width(), srf.rows);
  for (std::size_t r = 0; r < cube.height(); ++r) {
    for (std::size_t c = 0; c < cube.width(); ++c) {
      const auto x = cube.pixel(r, c);
      auto y = out.pixel(r, c);
      for (std::size_t k = 0; k < srf.rows; ++k) {
        double acc = 0.0;
        const double* row = &srf.weights[k * srf.cols];
        for (std::size_t b = 0; b < srf.cols; ++b) acc += row[b] * x[b];
        y[k] = acc;
      }
    }
  }
  return out;
}

/// Identity SRF over C bands (c = C).
inline SrfMatrix identity_srf(std::size_t bands) {
  SrfMatrix m;
  m.rows = m.cols = bands;
  m.sensor = "identity";
  m.weights.assign(bands * bands, 0.0);
  for (std::size_t i = 0; i < bands; ++i) m.weights[i * bands + i] = 1.0;
  return m;
}

#ifndef HYPERBENCH_DEFAULT_ASSETS
#define HYPERBENCH_DEFAULT_ASSETS "assets/srf"
#endif

/// Directory holding the shipped sensor CSVs; HYPERBENCH_ASSETS overrides it.
inline std::filesystem::path srf_asset_dir() {
  if (const char* env = std::getenv("HYPERBENCH_ASSETS"); env && *env) return env;
  return HYPERBENCH_DEFAULT_ASSETS;
}

/// Accepts either a shipped sensor id ("ikonos-4") or a path to a curve CSV.
inline SrfCurveSet load_srf(const std::string& id_or_path) {
  const std::filesystem::path as_path(id_or_path);
  if (as_path.extension() == ".csv" || id_or_path.find('/') != std::string::npos) {
    return load_srf_curves(as_path);
  }
  const auto asset = srf_asset_dir() / (id_or_path + ".csv");
  if (!std::filesystem::exists(asset)) {
    throw IoError("unknown SRF sensor '" + id_or_path + "' (looked for " + asset.string() + ")");
  }
  return load_srf_curves(asset);
}

}  // namespace hyperbench
