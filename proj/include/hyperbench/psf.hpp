#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "hyperbench/core.hpp"

namespace hyperbench {

namespace psf_detail {

struct ParamInfo {
  const char* name;
  double fallback;
  bool positive;  // must be strictly positive
};

inline std::vector<ParamInfo> param_table(PsfFamily f) {
  switch (f) {
    case PsfFamily::gaussian: return {{"sigma", 1.7, true}};
    case PsfFamily::kolmogorov: return {{"fc", 0.35, true}};
    case PsfFamily::airy: return {{"s", 2.5, true}};
    case PsfFamily::moffat: return {{"alpha", 2.0, true}, {"beta", 2.5, true}};
    case PsfFamily::sinc: return {{"s", 2.0, true}};
    case PsfFamily::lorentzian_sq: return {{"gamma", 1.5, true}};
    case PsfFamily::hermite: return {{"sigma", 1.7, true}};
    // the default radius depends on the kernel side; filled in by resolve()
    case PsfFamily::parabolic: return {{"a", 0.0, true}};
    case PsfFamily::gabor:
      return {{"sigma", 2.0, true}, {"lambda", 4.0, true}, {"gamma", 0.5, true},
              {"theta", 30.0, false}};
    case PsfFamily::delta: return {};
  }
  return {};
}

inline int default_size(PsfFamily f, const std::map<std::string, double>& params) {
  if (f == PsfFamily::delta) return 1;
  if (f == PsfFamily::gaussian) {
    const auto it = params.find("sigma");
    const double sigma = it == params.end() ? 1.7 : it->second;
    const int s = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
    return std::min(s, 31);
  }
  return 13;
}

// Kernel values for families that are functions of |di|, |dj| symmetric in
// swapping them. Evaluating on the canonical (min, max) pair makes the
// dihedral symmetry exact in floating point.
inline std::vector<double> fill_dihedral(int size, const std::function<double(int, int)>& g) {
  const int half = size / 2;
  std::vector<double> table(static_cast<std::size_t>((half + 1) * (half + 1)));
  for (int a = 0; a <= half; ++a) {
    for (int b = a; b <= half; ++b) {
      table[static_cast<std::size_t>(a * (half + 1) + b)] = g(a, b);
    }
  }
  std::vector<double> w(static_cast<std::size_t>(size * size));
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const int ai = std::abs(i - half);
      const int aj = std::abs(j - half);
      const int a = std::min(ai, aj);
      const int b = std::max(ai, aj);
      w[static_cast<std::size_t>(i * size + j)] = table[static_cast<std::size_t>(a * (half + 1) + b)];
    }
  }
  return w;
}

inline double sinc(double t) {
  if (t == 0.0) return 1.0;
  const double x = std::numbers::pi * t;
  return std::sin(x) / x;
}

inline double hermite2(double t) { return 4.0 * t * t - 2.0; }

// Long-exposure atmospheric PSF: the OTF exp(-3.44 (f/fc)^(5/3)) sampled on
// an oversampled frequency grid and inverse transformed at integer offsets.
// The OTF is even in both axes, so the transform reduces to a cosine sum.
inline std::vector<double> kolmogorov_table(int size, double fc) {
  const int half = size / 2;
  int n = 64;
  while (n < 8 * size) n *= 2;
  const int kmax = n / 2;
  std::vector<double> otf(static_cast<std::size_t>((2 * kmax + 1) * (2 * kmax + 1)));
  for (int ky = -kmax; ky <= kmax; ++ky) {
    for (int kx = -kmax; kx <= kmax; ++kx) {
      const double f = std::hypot(static_cast<double>(kx), static_cast<double>(ky)) / n;
      otf[static_cast<std::size_t>((ky + kmax) * (2 * kmax + 1) + (kx + kmax))] =
          std::exp(-3.44 * std::pow(f / fc, 5.0 / 3.0));
    }
  }
  // cosines[d][k] = cos(2 pi k d / n)
  std::vector<double> cosines(static_cast<std::size_t>((half + 1) * (2 * kmax + 1)));
  for (int d = 0; d <= half; ++d) {
    for (int k = -kmax; k <= kmax; ++k) {
      cosines[static_cast<std::size_t>(d * (2 * kmax + 1) + (k + kmax))] =
          std::cos(2.0 * std::numbers::pi * k * d / n);
    }
  }
  std::vector<double> table(static_cast<std::size_t>((half + 1) * (half + 1)), 0.0);
  const std::size_t stride = static_cast<std::size_t>(2 * kmax + 1);
  for (int a = 0; a <= half; ++a) {
    for (int b = a; b <= half; ++b) {
      double acc = 0.0;
      for (std::size_t ky = 0; ky < stride; ++ky) {
        double row = 0.0;
        for (std::size_t kx = 0; kx < stride; ++kx) {
          row += otf[ky * stride + kx] * cosines[static_cast<std::size_t>(b) * stride + kx];
        }
        acc += row * cosines[static_cast<std::size_t>(a) * stride + ky];
      }
      table[static_cast<std::size_t>(a * (half + 1) + b)] = std::max(acc, 0.0);
    }
  }
  return table;
}

}  // namespace psf_detail

/// Fills in family defaults and checks every parameter. Returns the resolved
/// parameter record with "size" included.
inline std::map<std::string, double> resolve_psf_params(const PsfSpec& spec, int& size_out) {
  const auto table = psf_detail::param_table(spec.family);
  std::set<std::string> known;
  for (const auto& p : table) known.insert(p.name);
  for (const auto& [name, value] : spec.params) {
    if (name == "size") continue;
    if (!known.count(name)) {
      throw ParameterError("unknown parameter '" + name + "' for PSF family " +
                           std::string(to_string(spec.family)));
    }
    if (!std::isfinite(value)) throw ParameterError("parameter '" + name + "' must be finite");
  }

  std::optional<int> size = spec.size;
  if (auto it = spec.params.find("size"); it != spec.params.end()) {
    if (it->second != std::floor(it->second)) throw ParameterError("parameter 'size' must be an integer");
    size = static_cast<int>(it->second);
  }
  int side = spec.family == PsfFamily::delta ? 1 : size.value_or(psf_detail::default_size(spec.family, spec.params));
  if (side < 1 || side % 2 == 0) throw ParameterError("parameter 'size' must be odd and >= 1");

  std::map<std::string, double> resolved;
  for (const auto& p : table) {
    double v = p.fallback;
    if (auto it = spec.params.find(p.name); it != spec.params.end()) {
      v = it->second;
    } else if (spec.family == PsfFamily::parabolic && std::string(p.name) == "a") {
      v = side / 2.0;
    }
    if (p.positive && !(v > 0.0)) {
      throw ParameterError("parameter '" + std::string(p.name) + "' must be strictly positive");
    }
    resolved[p.name] = v;
  }
  resolved["size"] = side;
  size_out = side;
  return resolved;
}

/// Builds the normalized kernel for `spec`. Entry (i, j) is evaluated at the
/// pixel offsets (di, dj) = (i - size/2, j - size/2).
inline PsfKernel make_kernel(const PsfSpec& spec) {
  using psf_detail::fill_dihedral;
  int size = 1;
  auto params = resolve_psf_params(spec, size);
  const int half = size / 2;

  PsfKernel k;
  k.family = spec.family;
  k.size = size;
  k.params = params;
  if (spec.family == PsfFamily::delta) {
    k.weights = {1.0};
    return k;
  }

  auto r2 = [](int a, int b) { return static_cast<double>(a * a + b * b); };
  std::vector<double> w;
  switch (spec.family) {
    case PsfFamily::gaussian: {
      const double s = params["sigma"];
      w = fill_dihedral(size, [&](int a, int b) { return std::exp(-r2(a, b) / (2.0 * s * s)); });
      break;
    }
    case PsfFamily::kolmogorov: {
      const auto table = psf_detail::kolmogorov_table(size, params["fc"]);
      w = fill_dihedral(size, [&](int a, int b) {
        return table[static_cast<std::size_t>(a * (half + 1) + b)];
      });
      break;
    }
    case PsfFamily::airy: {
      const double s = params["s"];
      w = fill_dihedral(size, [&](int a, int b) {
        const double x = std::numbers::pi * std::sqrt(r2(a, b)) / s;
        if (x == 0.0) return 1.0;
        const double j = 2.0 * std::cyl_bessel_j(1.0, x) / x;
        return j * j;
      });
      break;
    }
    case PsfFamily::moffat: {
      const double alpha = params["alpha"];
      const double beta = params["beta"];
      w = fill_dihedral(size, [&](int a, int b) {
        return std::pow(1.0 + r2(a, b) / (alpha * alpha), -beta);
      });
      break;
    }
    case PsfFamily::sinc: {
      const double s = params["s"];
      w = fill_dihedral(size, [&](int a, int b) {
        return psf_detail::sinc(a / s) * psf_detail::sinc(b / s);
      });
      break;
    }
    case PsfFamily::lorentzian_sq: {
      const double g = params["gamma"];
      w = fill_dihedral(size, [&](int a, int b) {
        const double l = 1.0 / (1.0 + r2(a, b) / (g * g));
        return l * l;
      });
      break;
    }
    case PsfFamily::hermite: {
      const double s = params["sigma"];
      w = fill_dihedral(size, [&](int a, int b) {
        const double mod = 1.0 + 0.25 * psf_detail::hermite2(a / s) * psf_detail::hermite2(b / s);
        return mod * std::exp(-r2(a, b) / (2.0 * s * s));
      });
      break;
    }
    case PsfFamily::parabolic: {
      const double a2 = params["a"] * params["a"];
      w = fill_dihedral(size, [&](int a, int b) { return std::max(0.0, 1.0 - r2(a, b) / a2); });
      break;
    }
    case PsfFamily::gabor: {
      const double sigma = params["sigma"];
      const double lambda = params["lambda"];
      const double gamma = params["gamma"];
      // phase is fixed at 0, so theta and theta + 180 describe the same kernel
      double theta_deg = std::fmod(params["theta"], 180.0);
      if (theta_deg < 0.0) theta_deg += 180.0;
      const double theta = theta_deg * std::numbers::pi / 180.0;
      const double ct = std::cos(theta);
      const double st = std::sin(theta);
      w.resize(static_cast<std::size_t>(size * size));
      for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
          const double x = j - half;  // column offset
          const double y = i - half;  // row offset
          const double u = x * ct + y * st;
          const double v = -x * st + y * ct;
          w[static_cast<std::size_t>(i * size + j)] =
              std::exp(-(u * u + gamma * gamma * v * v) / (2.0 * sigma * sigma)) *
              std::cos(2.0 * std::numbers::pi * u / lambda);
        }
      }
      break;
    }
    case PsfFamily::delta: break;
  }

  double sum = 0.0;
  for (double v : w) sum += v;
  const bool sign_indefinite = spec.family == PsfFamily::sinc ||
                               spec.family == PsfFamily::hermite ||
                               spec.family == PsfFamily::gabor;
  if ((sign_indefinite && sum < 1e-3) || !(sum > 0.0)) {
    throw ParameterError("non-normalizable kernel: raw sum " + std::to_string(sum));
  }
  for (double& v : w) v /= sum;
  k.weights = std::move(w);
  return k;
}

/// Families whose kernels are invariant under the dihedral group of the square.
inline bool is_isotropic(PsfFamily f) noexcept { return f != PsfFamily::gabor; }

/// Reflect-padding index (mirror about the edge sample, edge not repeated).
inline std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) noexcept {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

/// Convolves every band with `kernel` using reflect padding. Output has the
/// input's shape.
inline HsiCube blur(const HsiCube& cube, const PsfKernel& kernel) {
  if (static_cast<std::size_t>(kernel.size) > std::min(cube.height(), cube.width())) {
    throw ShapeError("kernel larger than image: side " + std::to_string(kernel.size) +
                     " vs image " + cube.shape_string());
  }
  if (kernel.size == 1) {
    HsiCube out = cube;
    if (kernel.weights[0] != 1.0) {
      for (double& v : out.data()) v *= kernel.weights[0];
    }
    return out;
  }

  const auto h = static_cast<std::ptrdiff_t>(cube.height());
  const auto w = static_cast<std::ptrdiff_t>(cube.width());
  const std::size_t bands = cube.bands();
  const int half = kernel.radius();
  HsiCube out(cube.height(), cube.width(), bands);
  out.set_wavelengths(cube.wavelengths());
  const auto src = cube.data();
  auto dst = out.data();

  // out(r, c) = sum_{i, j} k(i, j) * x(r - di, c - dj)
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double* acc = &dst[(static_cast<std::size_t>(r) * cube.width() + static_cast<std::size_t>(c)) * bands];
      for (int i = 0; i < kernel.size; ++i) {
        const std::ptrdiff_t rr = reflect_index(r - (i - half), h);
        for (int j = 0; j < kernel.size; ++j) {
          const double kw = kernel.at(i, j);
          if (kw == 0.0) continue;
          const std::ptrdiff_t cc = reflect_index(c - (j - half), w);
          const double* s = &src[(static_cast<std::size_t>(rr) * cube.width() + static_cast<std::size_t>(cc)) * bands];
          for (std::size_t b = 0; b < bands; ++b) acc[b] += kw * s[b];
        }
      }
    }
  }
  return out;
}

}  // namespace hyperbench
