#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <optional>
#include <spawn.h>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include "hyperbench/core.hpp"
#include "hyperbench/degrade.hpp"
#include "hyperbench/io.hpp"
#include "hyperbench/psf.hpp"

extern char** environ;

namespace hyperbench {

inline constexpr std::string_view kProtocolVersion = "hb-proto-1";

enum class MethodKind { builtin_upsample, builtin_regression, external };

inline std::string_view to_string(MethodKind k) noexcept {
  switch (k) {
    case MethodKind::builtin_upsample: return "builtin_upsample";
    case MethodKind::builtin_regression: return "builtin_regression";
    case MethodKind::external: return "external";
  }
  return "unknown";
}

inline MethodKind method_kind_from_string(std::string_view s) {
  for (auto k : {MethodKind::builtin_upsample, MethodKind::builtin_regression, MethodKind::external}) {
    if (to_string(k) == s) return k;
  }
  throw ParameterError("unknown method kind '" + std::string(s) + "'");
}

struct MethodSpec {
  std::string method_id;
  MethodKind kind = MethodKind::builtin_upsample;
  std::vector<std::string> command;  // external only; the workdir is appended
  double timeout_s = 3600.0;
};

inline void validate(const MethodSpec& m) {
  if (m.method_id.empty()) throw ValidationError("method_id must not be empty");
  if (m.kind == MethodKind::external && m.command.empty()) {
    throw ValidationError("external method '" + m.method_id + "' needs a command");
  }
  if (!(m.timeout_s > 0.0)) throw ValidationError("timeout must be positive");
}

/// Outcome of one method invocation. `recon` is set exactly when status is ok.
struct MethodResult {
  RunStatus status = RunStatus::ok;
  std::optional<HsiCube> recon;
  std::string message;
  double wall_time_s = 0.0;
};

// ---------------------------------------------------------------------------
// Builtin baselines
// ---------------------------------------------------------------------------

/// Bilinear upsampling of the LR-HSI by `factor`. Output pixel i samples the
/// input at (i + 0.5) / factor - 0.5, clamped to the valid range.
inline HsiCube builtin_upsample(const ObservationPair& pair, int factor) {
  if (factor < 1) throw ParameterError("factor must be >= 1");
  const HsiCube& lr = pair.lr_hsi;
  const auto f = static_cast<std::size_t>(factor);
  const std::size_t H = lr.height() * f;
  const std::size_t W = lr.width() * f;
  const std::size_t bands = lr.bands();

  struct Tap {
    std::size_t i0, i1;
    double t;
  };
  auto taps = [f](std::size_t out, std::size_t in) {
    std::vector<Tap> v(out);
    for (std::size_t i = 0; i < out; ++i) {
      double s = (static_cast<double>(i) + 0.5) / static_cast<double>(f) - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      v[i] = {i0, std::min(i0 + 1, in - 1), s - static_cast<double>(i0)};
    }
    return v;
  };
  const auto ty = taps(H, lr.height());
  const auto tx = taps(W, lr.width());

  HsiCube out(H, W, bands);
  out.set_wavelengths(lr.wavelengths());
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const auto a = lr.pixel(ty[r].i0, tx[c].i0);
      const auto b = lr.pixel(ty[r].i0, tx[c].i1);
      const auto d = lr.pixel(ty[r].i1, tx[c].i0);
      const auto e = lr.pixel(ty[r].i1, tx[c].i1);
      auto dst = out.pixel(r, c);
      const double wy = ty[r].t, wx = tx[c].t;
      for (std::size_t k = 0; k < bands; ++k) {
        const double top = (1.0 - wx) * a[k] + wx * b[k];
        const double bottom = (1.0 - wx) * d[k] + wx * e[k];
        dst[k] = (1.0 - wy) * top + wy * bottom;
      }
    }
  }
  return out;
}

/// Per-pixel affine spectral regression. The HR-MSI is degraded to LR
/// resolution with the same blur and area downsampling as the LR-HSI; a ridge
/// least-squares map from [msi, 1] to the LR-HSI spectrum is fitted on those
/// pairs and applied to every HR-MSI pixel, clamped to [0, 1].
inline HsiCube builtin_regression(const ObservationPair& pair, const SrfMatrix& srf,
                                  const PsfKernel& kernel, int factor) {
  const HsiCube& msi = pair.hr_msi;
  const HsiCube& lr = pair.lr_hsi;
  if (msi.bands() != srf.rows || lr.bands() != srf.cols) {
    throw ShapeError("regression: SRF shape does not match the observation pair");
  }
  const HsiCube lr_msi = downsample_area(blur(msi, kernel), factor);
  if (lr_msi.height() != lr.height() || lr_msi.width() != lr.width()) {
    throw ShapeError("regression: degraded MSI " + lr_msi.shape_string() + " does not match LR-HSI " +
                     lr.shape_string());
  }

  const auto c = static_cast<Eigen::Index>(msi.bands());
  const auto C = static_cast<Eigen::Index>(lr.bands());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(c + 1, c + 1);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(c + 1, C);
  Eigen::VectorXd a(c + 1);
  for (std::size_t p = 0; p < lr.pixels(); ++p) {
    const auto x = lr_msi.data().subspan(p * lr_msi.bands(), lr_msi.bands());
    const auto y = lr.data().subspan(p * lr.bands(), lr.bands());
    for (Eigen::Index i = 0; i < c; ++i) a[i] = x[static_cast<std::size_t>(i)];
    a[c] = 1.0;
    gram.noalias() += a * a.transpose();
    for (Eigen::Index j = 0; j < C; ++j) cross.col(j) += a * y[static_cast<std::size_t>(j)];
  }
  const double lambda = 1e-6 * gram.trace() / static_cast<double>(c + 1);
  gram.diagonal().array() += lambda;
  const Eigen::MatrixXd weights = gram.ldlt().solve(cross);

  HsiCube out(msi.height(), msi.width(), lr.bands());
  out.set_wavelengths(lr.wavelengths());
  for (std::size_t p = 0; p < msi.pixels(); ++p) {
    const auto x = msi.data().subspan(p * msi.bands(), msi.bands());
    auto dst = out.data().subspan(p * out.bands(), out.bands());
    for (Eigen::Index j = 0; j < C; ++j) {
      double v = weights(c, j);
      for (Eigen::Index i = 0; i < c; ++i) v += x[static_cast<std::size_t>(i)] * weights(i, j);
      dst[static_cast<std::size_t>(j)] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// External methods
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json protocol_meta(const ObservationPair& pair, const SrfMatrix& srf,
                                            const PsfKernel& kernel, const DegradationConfig& config) {
  nlohmann::ordered_json meta;
  meta["protocol"] = kProtocolVersion;
  meta["factor"] = config.factor;
  meta["lr_snr_db"] = config.lr_snr_db ? nlohmann::ordered_json(*config.lr_snr_db) : nlohmann::ordered_json(nullptr);
  meta["msi_snr_db"] = config.msi_snr_db ? nlohmann::ordered_json(*config.msi_snr_db) : nlohmann::ordered_json(nullptr);
  meta["seed"] = config.seed;
  meta["height"] = pair.gt.height();
  meta["width"] = pair.gt.width();
  meta["lr_height"] = pair.lr_hsi.height();
  meta["lr_width"] = pair.lr_hsi.width();
  meta["hsi_bands"] = pair.gt.bands();
  meta["msi_bands"] = pair.hr_msi.bands();
  if (pair.gt.wavelengths()) {
    meta["wavelengths_nm"] = *pair.gt.wavelengths();
  } else {
    meta["wavelengths_nm"] = nullptr;
  }
  meta["psf_family"] = to_string(kernel.family);
  meta["psf_params"] = nlohmann::ordered_json::parse(psf_params_json(kernel.params));
  meta["srf_sensor"] = srf.sensor;
  return meta;
}

/// Writes the five protocol files into `workdir`.
inline void write_protocol_inputs(const std::filesystem::path& workdir, const ObservationPair& pair,
                                  const SrfMatrix& srf, const PsfKernel& kernel,
                                  const DegradationConfig& config) {
  write_npy(workdir / "lr_hsi.npy", cube_to_npy(pair.lr_hsi));
  write_npy(workdir / "hr_msi.npy", cube_to_npy(pair.hr_msi));
  write_npy(workdir / "srf.npy", {{srf.rows, srf.cols}, srf.weights, Dtype::f64});
  write_npy(workdir / "psf.npy",
            {{static_cast<std::size_t>(kernel.size), static_cast<std::size_t>(kernel.size)}, kernel.weights, Dtype::f64});
  io_detail::write_file_atomic(workdir / "meta.json", protocol_meta(pair, srf, kernel, config).dump(2) + "\n");
}

struct ProcessOutcome {
  bool started = false;
  bool timed_out = false;
  int exit_code = -1;
  std::string error;
};

/// Runs argv with stdout/stderr redirected to files, killing the whole
/// process group once `timeout_s` elapses.
inline ProcessOutcome run_process(const std::vector<std::string>& argv, const std::filesystem::path& stdout_path,
                                  const std::filesystem::path& stderr_path, double timeout_s) {
  ProcessOutcome out;
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, args[0], &actions, &attr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    out.error = "cannot start '" + argv[0] + "': " + std::strerror(rc);
    return out;
  }
  out.started = true;

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  auto pause = std::chrono::milliseconds(1);
  int status = 0;
  for (;;) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) {
      out.error = std::string("waitpid failed: ") + std::strerror(errno);
      return out;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      out.timed_out = true;
      return out;
    }
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::milliseconds(50));
  }
  if (WIFEXITED(status)) {
    out.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    out.exit_code = 128 + WTERMSIG(status);
  }
  return out;
}

inline std::string file_tail(const std::filesystem::path& path, std::size_t max_bytes = 2000) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (s.size() > max_bytes) s = s.substr(s.size() - max_bytes);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

/// Executes one method on one observation pair. Method-side failures come
/// back as a non-ok MethodResult; only infrastructure faults (an unusable
/// workdir) throw.
inline MethodResult run_method(const MethodSpec& spec, const ObservationPair& pair, const SrfMatrix& srf,
                               const PsfKernel& kernel, const DegradationConfig& config,
                               const std::filesystem::path& workdir) {
  validate(spec);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  MethodResult result;

  auto finish = [&](HsiCube recon) {
    if (!recon.same_shape(pair.gt)) {
      result.status = RunStatus::method_error;
      result.message = "reconstruction shape " + recon.shape_string() + " does not match " + pair.gt.shape_string();
      return;
    }
    if (!recon.wavelengths()) recon.set_wavelengths(pair.gt.wavelengths());
    try {
      validate(recon);
    } catch (const ValidationError& e) {
      result.status = RunStatus::method_error;
      result.message = std::string("invalid reconstruction: ") + e.what();
      return;
    }
    result.recon = std::move(recon);
  };

  if (spec.kind != MethodKind::external) {
    try {
      finish(spec.kind == MethodKind::builtin_upsample ? builtin_upsample(pair, config.factor)
                                                       : builtin_regression(pair, srf, kernel, config.factor));
    } catch (const Error& e) {
      result.status = RunStatus::method_error;
      result.message = e.what();
    }
    result.wall_time_s = elapsed();
    return result;
  }

  std::filesystem::create_directories(workdir);
  if (!std::filesystem::is_empty(workdir)) throw IoError("workdir " + workdir.string() + " is not empty");
  write_protocol_inputs(workdir, pair, srf, kernel, config);

  auto argv = spec.command;
  argv.push_back(workdir.string());
  const auto proc = run_process(argv, workdir / "stdout.txt", workdir / "stderr.txt", spec.timeout_s);
  result.wall_time_s = elapsed();
  if (proc.timed_out) {
    result.status = RunStatus::timeout;
    result.message = "timed out after " + format_number(spec.timeout_s) + " s";
    return result;
  }
  if (!proc.started || proc.exit_code != 0) {
    result.status = RunStatus::method_error;
    result.message = proc.started ? "exit code " + std::to_string(proc.exit_code) : proc.error;
    if (const auto tail = file_tail(workdir / "stderr.txt"); !tail.empty()) result.message += ": " + tail;
    return result;
  }
  const auto recon_path = workdir / "recon.npy";
  if (!std::filesystem::exists(recon_path)) {
    result.status = RunStatus::method_error;
    result.message = "method exited 0 but wrote no recon.npy";
    return result;
  }
  try {
    finish(npy_to_cube(read_npy(recon_path), "recon.npy"));
  } catch (const Error& e) {
    result.status = RunStatus::method_error;
    result.message = std::string("bad recon.npy: ") + e.what();
  }
  return result;
}

}  // namespace hyperbench
