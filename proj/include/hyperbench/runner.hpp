#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hyperbench/core.hpp"
#include "hyperbench/degrade.hpp"
#include "hyperbench/groundtruth.hpp"
#include "hyperbench/io.hpp"
#include "hyperbench/method.hpp"
#include "hyperbench/metrics.hpp"
#include "hyperbench/psf.hpp"
#include "hyperbench/srf.hpp"

namespace hyperbench {

struct DatasetEntry {
  std::string id;
  std::filesystem::path path;
  std::optional<std::filesystem::path> wavelengths;  // sidecar overriding the cube's own
};

enum class Pairing { cartesian, zipped };

/// A declarative experiment grid. With zipped pairing the srf, factor and SNR
/// lists advance together (they must have equal lengths); PSFs, methods and
/// datasets are always crossed with them.
struct GridSpec {
  std::vector<DatasetEntry> datasets;
  std::vector<PsfSpec> psfs;
  std::vector<std::string> srfs;
  std::vector<int> factors;
  std::vector<Snr> lr_snrs_db;
  std::vector<Snr> msi_snrs_db;
  std::vector<MethodSpec> methods;
  std::uint64_t base_seed = 0;
  Pairing pairing = Pairing::cartesian;
  std::pair<double, double> clip_percentiles{1.0, 99.0};
};

inline void validate(const GridSpec& g) {
  auto nonempty = [](std::size_t n, const char* what) {
    if (n == 0) throw ValidationError(std::string("grid field '") + what + "' must not be empty");
  };
  nonempty(g.datasets.size(), "datasets");
  nonempty(g.psfs.size(), "psfs");
  nonempty(g.srfs.size(), "srfs");
  nonempty(g.factors.size(), "factors");
  nonempty(g.lr_snrs_db.size(), "lr_snrs_db");
  nonempty(g.msi_snrs_db.size(), "msi_snrs_db");
  nonempty(g.methods.size(), "methods");
  if (g.pairing == Pairing::zipped) {
    const std::size_t n = g.factors.size();
    if (g.srfs.size() != n || g.lr_snrs_db.size() != n || g.msi_snrs_db.size() != n) {
      throw ValidationError("zipped pairing needs srfs, factors, lr_snrs_db and msi_snrs_db of equal length");
    }
  }
  for (int f : g.factors) {
    if (f < 1) throw ValidationError("factors must be >= 1");
  }
  for (const auto& m : g.methods) validate(m);
  std::map<std::string, int> ids;
  for (const auto& d : g.datasets) {
    if (d.id.empty()) throw ValidationError("dataset id must not be empty");
    if (++ids[d.id] > 1) throw ValidationError("duplicate dataset id '" + d.id + "'");
  }
}

/// One expanded run.
struct GridRun {
  std::size_t index = 0;
  std::size_t dataset_index = 0;
  std::size_t method_index = 0;
  std::size_t psf_index = 0;
  std::string dataset_id;
  MethodSpec method;
  DegradationConfig config;
};

inline std::string psf_canonical(const PsfSpec& p) {
  std::string s(to_string(p.family));
  if (p.size) s += ";size=" + std::to_string(*p.size);
  for (const auto& [k, v] : p.params) s += ";" + k + "=" + format_number(v);
  return s;
}

/// Per-run noise seed: a 64-bit hash of the base seed and every degradation
/// axis of the run. Methods sharing a configuration share its observations.
inline std::uint64_t run_seed(std::uint64_t base_seed, const std::string& dataset_id, const PsfSpec& psf,
                              const std::string& srf, int factor, const Snr& lr, const Snr& msi) {
  std::string key = dataset_id;
  for (const auto& part : {psf_canonical(psf), srf, std::to_string(factor), snr_to_string(lr), snr_to_string(msi)}) {
    key += '\x1f';
    key += part;
  }
  return rng::mix64(rng::mix64(base_seed ^ rng::kGolden) ^ rng::fnv1a(key));
}

/// Deterministic expansion: datasets, then methods, then PSFs, then either
/// the full srf x factor x lr_snr x msi_snr product or the zipped points.
inline std::vector<GridRun> expand_grid(const GridSpec& g) {
  validate(g);
  struct Point {
    std::string srf;
    int factor;
    Snr lr, msi;
  };
  std::vector<Point> points;
  if (g.pairing == Pairing::zipped) {
    for (std::size_t i = 0; i < g.factors.size(); ++i) {
      points.push_back({g.srfs[i], g.factors[i], g.lr_snrs_db[i], g.msi_snrs_db[i]});
    }
  } else {
    for (const auto& s : g.srfs)
      for (int f : g.factors)
        for (const auto& lr : g.lr_snrs_db)
          for (const auto& msi : g.msi_snrs_db) points.push_back({s, f, lr, msi});
  }

  std::vector<GridRun> runs;
  runs.reserve(g.datasets.size() * g.methods.size() * g.psfs.size() * points.size());
  for (std::size_t d = 0; d < g.datasets.size(); ++d) {
    for (std::size_t m = 0; m < g.methods.size(); ++m) {
      for (std::size_t p = 0; p < g.psfs.size(); ++p) {
        for (const auto& pt : points) {
          GridRun run;
          run.index = runs.size();
          run.dataset_index = d;
          run.method_index = m;
          run.psf_index = p;
          run.dataset_id = g.datasets[d].id;
          run.method = g.methods[m];
          run.config.psf = g.psfs[p];
          run.config.srf = pt.srf;
          run.config.factor = pt.factor;
          run.config.lr_snr_db = pt.lr;
          run.config.msi_snr_db = pt.msi;
          run.config.clip_percentiles = g.clip_percentiles;
          run.config.seed = run_seed(g.base_seed, run.dataset_id, g.psfs[p], pt.srf,
                                     pt.factor, pt.lr, pt.msi);
          runs.push_back(std::move(run));
        }
      }
    }
  }
  return runs;
}

/// The 70-configuration robustness study: ten PSFs at their defaults crossed
/// with seven zipped (factor, SRF, LR-HSI SNR) operating points, HR-MSI SNR
/// fixed at 40 dB. Datasets and methods are left empty for the caller.
inline GridSpec canned_study_spec() {
  GridSpec g;
  for (PsfFamily f : kAllPsfFamilies) g.psfs.push_back({f, std::nullopt, {}});
  g.pairing = Pairing::zipped;
  g.factors = {4, 8, 8, 8, 8, 16, 32};
  g.srfs = {"ikonos-4", "ikonos-3", "ikonos-4", "worldview2-8", "worldview3-16", "ikonos-4", "ikonos-4"};
  g.lr_snrs_db = {35.0, 30.0, 30.0, 30.0, 30.0, 25.0, 20.0};
  g.msi_snrs_db = std::vector<Snr>(7, 40.0);
  return g;
}

// ---------------------------------------------------------------------------
// Grid config files (JSON)
// ---------------------------------------------------------------------------

namespace grid_detail {

inline Snr snr_from_json(const nlohmann::json& j) {
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "none")) return std::nullopt;
  if (j.is_number()) return j.get<double>();
  throw FormatError("SNR must be a number or \"none\", got " + j.dump());
}

inline nlohmann::ordered_json snr_to_json(const Snr& s) {
  return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json("none");
}

inline PsfSpec psf_from_json(const nlohmann::json& j) {
  PsfSpec p;
  if (j.is_string()) {
    p.family = psf_family_from_string(j.get<std::string>());
    return p;
  }
  p.family = psf_family_from_string(j.at("family").get<std::string>());
  if (j.contains("size")) p.size = j.at("size").get<int>();
  if (j.contains("params")) {
    for (const auto& [k, v] : j.at("params").items()) p.params[k] = v.get<double>();
  }
  return p;
}

inline nlohmann::ordered_json psf_to_json(const PsfSpec& p) {
  nlohmann::ordered_json j;
  j["family"] = to_string(p.family);
  if (p.size) j["size"] = *p.size;
  j["params"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : p.params) j["params"][k] = v;
  return j;
}

inline MethodSpec method_from_json(const nlohmann::json& j) {
  MethodSpec m;
  m.method_id = j.at("id").get<std::string>();
  m.kind = method_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("command")) m.command = j.at("command").get<std::vector<std::string>>();
  if (j.contains("timeout_s")) m.timeout_s = j.at("timeout_s").get<double>();
  return m;
}

inline nlohmann::ordered_json method_to_json(const MethodSpec& m) {
  nlohmann::ordered_json j;
  j["id"] = m.method_id;
  j["kind"] = to_string(m.kind);
  if (m.kind == MethodKind::external) j["command"] = m.command;
  j["timeout_s"] = m.timeout_s;
  return j;
}

}  // namespace grid_detail

/// Parses a grid document. Relative dataset paths resolve against
/// `base_dir`. Keys starting with '_' are comments; other unknown keys are
/// rejected.
inline GridSpec grid_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using namespace grid_detail;
  static const std::vector<std::string> known = {"datasets", "psfs", "srfs", "factors", "lr_snrs_db",
                                                 "msi_snrs_db", "methods", "base_seed", "pairing",
                                                 "clip_percentiles"};
  if (!j.is_object()) throw FormatError("grid config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!k.empty() && k[0] == '_') continue;
    if (std::find(known.begin(), known.end(), k) == known.end()) throw FormatError("unknown grid key '" + k + "'");
  }
  GridSpec g;
  try {
    for (const auto& d : j.value("datasets", nlohmann::json::array())) {
      DatasetEntry e;
      e.id = d.at("id").get<std::string>();
      e.path = d.at("path").get<std::string>();
      if (e.path.is_relative() && !base_dir.empty()) e.path = base_dir / e.path;
      if (d.contains("wavelengths") && !d.at("wavelengths").is_null()) {
        std::filesystem::path w = d.at("wavelengths").get<std::string>();
        if (w.is_relative() && !base_dir.empty()) w = base_dir / w;
        e.wavelengths = w;
      }
      g.datasets.push_back(std::move(e));
    }
    for (const auto& p : j.value("psfs", nlohmann::json::array())) g.psfs.push_back(psf_from_json(p));
    g.srfs = j.value("srfs", std::vector<std::string>{});
    g.factors = j.value("factors", std::vector<int>{});
    for (const auto& s : j.value("lr_snrs_db", nlohmann::json::array())) g.lr_snrs_db.push_back(snr_from_json(s));
    for (const auto& s : j.value("msi_snrs_db", nlohmann::json::array())) g.msi_snrs_db.push_back(snr_from_json(s));
    for (const auto& m : j.value("methods", nlohmann::json::array())) g.methods.push_back(method_from_json(m));
    if (!j.contains("base_seed")) throw FormatError("grid config must set base_seed");
    g.base_seed = j.at("base_seed").get<std::uint64_t>();
    const auto pairing = j.value("pairing", std::string("cartesian"));
    if (pairing == "cartesian") {
      g.pairing = Pairing::cartesian;
    } else if (pairing == "zipped") {
      g.pairing = Pairing::zipped;
    } else {
      throw FormatError("pairing must be 'cartesian' or 'zipped'");
    }
    if (j.contains("clip_percentiles")) {
      const auto c = j.at("clip_percentiles").get<std::vector<double>>();
      if (c.size() != 2) throw FormatError("clip_percentiles needs exactly two values");
      g.clip_percentiles = {c[0], c[1]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad grid config: ") + e.what());
  }
  return g;
}

inline nlohmann::ordered_json grid_to_json(const GridSpec& g) {
  using namespace grid_detail;
  nlohmann::ordered_json j;
  j["datasets"] = nlohmann::ordered_json::array();
  for (const auto& d : g.datasets) {
    nlohmann::ordered_json e;
    e["id"] = d.id;
    e["path"] = d.path.string();
    if (d.wavelengths) e["wavelengths"] = d.wavelengths->string();
    j["datasets"].push_back(e);
  }
  j["psfs"] = nlohmann::ordered_json::array();
  for (const auto& p : g.psfs) j["psfs"].push_back(psf_to_json(p));
  j["srfs"] = g.srfs;
  j["factors"] = g.factors;
  j["lr_snrs_db"] = nlohmann::ordered_json::array();
  for (const auto& s : g.lr_snrs_db) j["lr_snrs_db"].push_back(snr_to_json(s));
  j["msi_snrs_db"] = nlohmann::ordered_json::array();
  for (const auto& s : g.msi_snrs_db) j["msi_snrs_db"].push_back(snr_to_json(s));
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& m : g.methods) j["methods"].push_back(method_to_json(m));
  j["base_seed"] = g.base_seed;
  j["pairing"] = g.pairing == Pairing::zipped ? "zipped" : "cartesian";
  j["clip_percentiles"] = {g.clip_percentiles.first, g.clip_percentiles.second};
  return j;
}

inline GridSpec load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return grid_from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Reads a dataset and attaches wavelengths from its sidecar when given.
inline HsiCube load_dataset(const DatasetEntry& d) {
  if (!std::filesystem::exists(d.path)) throw IoError("dataset '" + d.id + "' not found at " + d.path.string());
  HsiCube cube = read_cube(d.path);
  if (d.wavelengths) cube.set_wavelengths(read_wavelengths(*d.wavelengths));
  return cube;
}

inline const std::vector<double>& require_wavelengths(const HsiCube& cube, const std::string& dataset_id) {
  if (!cube.wavelengths()) {
    throw ValidationError("dataset '" + dataset_id + "' has no band wavelengths; supply a wavelength file");
  }
  return *cube.wavelengths();
}

inline std::string sanitize_id(const std::string& s) {
  std::string out = s;
  for (char& ch : out) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  }
  return out;
}

/// generate -> run method -> evaluate for one prepared configuration. Never
/// throws for method or metric failures; those become the record status.
inline ExperimentRecord execute_run(const std::string& dataset_id, const HsiCube& gt, const MethodSpec& method,
                                    const DegradationConfig& config, const SrfMatrix& srf, const PsfKernel& kernel,
                                    const std::filesystem::path& workdir, std::size_t run_index) {
  ExperimentRecord rec;
  rec.config = config;
  rec.psf_params = kernel.params;
  rec.dataset_id = dataset_id;
  rec.method_id = method.method_id;
  rec.run_index = run_index;

  ObservationPair pair;
  try {
    pair = generate_pair(gt, config, srf, kernel);
  } catch (const Error& e) {
    rec.status = RunStatus::input_error;
    rec.message = std::string("degradation failed: ") + e.what();
    return rec;
  }

  MethodResult result = run_method(method, pair, srf, kernel, config, workdir);
  rec.wall_time_s = result.wall_time_s;
  if (result.status != RunStatus::ok) {
    rec.status = result.status;
    rec.message = result.message;
    return rec;
  }
  try {
    rec.metrics = evaluate_all(pair.gt, *result.recon, config.factor, 1.0);
    rec.status = RunStatus::ok;
  } catch (const Error& e) {
    rec.status = RunStatus::metric_error;
    rec.message = e.what();
  }
  if (rec.status == RunStatus::ok && method.kind == MethodKind::external) {
    std::error_code ec;
    std::filesystem::remove_all(workdir, ec);
  }
  return rec;
}

struct GridSummary {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_status;
  std::filesystem::path log_path;

  std::size_t count(RunStatus s) const {
    const auto it = by_status.find(std::string(to_string(s)));
    return it == by_status.end() ? 0 : it->second;
  }
};

inline std::filesystem::path results_csv(const std::filesystem::path& out_dir) { return out_dir / "results.csv"; }

/// Runs every expanded configuration on a pool of `workers` threads and
/// appends one record per run to out_dir/results.csv (+ .jsonl). Rows land
/// in completion order; `run_index` restores expansion order.
inline GridSummary run_grid(const GridSpec& spec, const std::filesystem::path& out_dir, std::size_t workers = 1) {
  const auto runs = expand_grid(spec);
  std::filesystem::create_directories(out_dir);
  RecordLog log(results_csv(out_dir));

  // Shared read-only inputs, built once before the workers start.
  struct DatasetState {
    std::optional<HsiCube> gt;
    std::string error;
  };
  std::vector<DatasetState> datasets(spec.datasets.size());
  for (std::size_t d = 0; d < spec.datasets.size(); ++d) {
    try {
      const HsiCube raw = load_dataset(spec.datasets[d]);
      datasets[d].gt = build_ground_truth(raw, spec.clip_percentiles.first, spec.clip_percentiles.second);
    } catch (const Error& e) {
      datasets[d].error = std::string("dataset error: ") + e.what();
    }
  }
  struct KernelState {
    std::optional<PsfKernel> kernel;
    std::string error;
  };
  std::vector<KernelState> kernels(spec.psfs.size());
  for (std::size_t p = 0; p < spec.psfs.size(); ++p) {
    try {
      kernels[p].kernel = make_kernel(spec.psfs[p]);
    } catch (const Error& e) {
      kernels[p].error = std::string("PSF error: ") + e.what();
    }
  }
  struct SrfState {
    std::optional<SrfMatrix> matrix;
    std::string error;
  };
  std::map<std::pair<std::size_t, std::string>, SrfState> srfs;
  std::map<std::string, std::optional<SrfCurveSet>> curves;
  std::map<std::string, std::string> curve_errors;
  for (const auto& run : runs) {
    const auto key = std::make_pair(run.dataset_index, run.config.srf);
    if (srfs.count(key) || !datasets[run.dataset_index].gt) continue;
    SrfState state;
    try {
      if (!curves.count(run.config.srf)) {
        try {
          curves[run.config.srf] = load_srf(run.config.srf);
        } catch (const Error& e) {
          curves[run.config.srf] = std::nullopt;
          curve_errors[run.config.srf] = e.what();
        }
      }
      const auto& set = curves[run.config.srf];
      if (!set) throw IoError(curve_errors[run.config.srf]);
      const auto& gt = *datasets[run.dataset_index].gt;
      state.matrix = build_srf_matrix(*set, require_wavelengths(gt, run.dataset_id));
    } catch (const Error& e) {
      state.error = std::string("SRF error: ") + e.what();
    }
    srfs.emplace(key, std::move(state));
  }

  std::atomic<std::size_t> next{0};
  std::mutex summary_mutex;
  GridSummary summary;
  summary.total = runs.size();
  summary.log_path = log.path();

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      const GridRun& run = runs[i];
      ExperimentRecord rec;
      const auto& ds = datasets[run.dataset_index];
      const auto& ks = kernels[run.psf_index];
      std::string setup_error = ds.error;
      if (setup_error.empty()) setup_error = ks.error;
      if (setup_error.empty()) setup_error = srfs.at({run.dataset_index, run.config.srf}).error;
      if (!setup_error.empty()) {
        rec.config = run.config;
        rec.dataset_id = run.dataset_id;
        rec.method_id = run.method.method_id;
        rec.run_index = run.index;
        rec.status = RunStatus::input_error;
        rec.message = setup_error;
        if (ks.kernel) rec.psf_params = ks.kernel->params;
      } else {
        const auto workdir = out_dir / "work" / (std::to_string(run.index) + "_" + sanitize_id(run.method.method_id));
        if (run.method.kind == MethodKind::external) {
          std::error_code ec;
          std::filesystem::remove_all(workdir, ec);
        }
        try {
          rec = execute_run(run.dataset_id, *ds.gt, run.method, run.config,
                            *srfs.at({run.dataset_index, run.config.srf}).matrix, *ks.kernel, workdir, run.index);
        } catch (const Error& e) {
          rec.config = run.config;
          rec.dataset_id = run.dataset_id;
          rec.method_id = run.method.method_id;
          rec.run_index = run.index;
          rec.psf_params = ks.kernel->params;
          rec.status = RunStatus::input_error;
          rec.message = e.what();
        }
      }
      log.append(rec);
      std::lock_guard lock(summary_mutex);
      ++summary.by_status[std::string(to_string(rec.status))];
    }
  };

  const std::size_t n = std::max<std::size_t>(1, std::min(workers, runs.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  std::error_code ec;
  if (std::filesystem::is_empty(out_dir / "work", ec)) std::filesystem::remove(out_dir / "work", ec);
  return summary;
}

/// One full pipeline execution appended to `log_csv`. Input problems
/// (missing dataset, unknown SRF, bad PSF) throw before anything is logged;
/// method and metric failures are logged and returned as the record status.
inline ExperimentRecord run_single(const DatasetEntry& dataset, const MethodSpec& method,
                                   const DegradationConfig& config, const std::filesystem::path& log_csv,
                                   const std::filesystem::path& workdir) {
  validate(config);
  validate(method);
  const HsiCube raw = load_dataset(dataset);
  const HsiCube gt = build_ground_truth(raw, config.clip_percentiles.first, config.clip_percentiles.second);
  const PsfKernel kernel = make_kernel(config.psf);
  const SrfMatrix srf = build_srf_matrix(load_srf(config.srf), require_wavelengths(gt, dataset.id));
  // fail on degradation problems before logging anything
  (void)crop_to_factor(gt, config.factor);

  ExperimentRecord rec = execute_run(dataset.id, gt, method, config, srf, kernel, workdir, 0);
  if (rec.status == RunStatus::input_error) throw Error(rec.message);
  append_record(rec, log_csv);
  return rec;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;      // finite values used for mean/std
  std::size_t inf_count = 0;  // +inf PSNR rows, excluded from mean/std
};

struct AggregateRow {
  std::vector<std::string> keys;
  std::vector<MetricSummary> metrics;
};

struct AggregateTable {
  std::vector<std::string> group_by;
  std::vector<std::string> metrics;
  std::vector<AggregateRow> rows;
};

/// Groups the ok rows of a results CSV and summarizes each metric. Groups
/// come out sorted by key; values are summed in sorted order so the result
/// does not depend on row completion order.
inline AggregateTable aggregate(const std::filesystem::path& log_path, const std::vector<std::string>& group_by,
                                const std::vector<std::string>& metrics) {
  AggregateTable out{group_by, metrics, {}};
  const LogTable log = read_log_csv(log_path);
  if (log.header.empty()) return out;

  std::vector<std::size_t> key_cols, metric_cols;
  for (const auto& g : group_by) key_cols.push_back(log.column(g));
  for (const auto& m : metrics) metric_cols.push_back(log.column(m));
  const std::size_t status_col = log.column("status");

  std::map<std::vector<std::string>, std::vector<std::vector<double>>> groups;
  for (const auto& row : log.rows) {
    if (row[status_col] != "ok") continue;
    std::vector<std::string> key;
    for (auto c : key_cols) key.push_back(row[c]);
    auto& values = groups[key];
    values.resize(metric_cols.size());
    for (std::size_t m = 0; m < metric_cols.size(); ++m) values[m].push_back(parse_number(row[metric_cols[m]]));
  }
  for (auto& [key, values] : groups) {
    AggregateRow r{key, {}};
    for (auto& v : values) {
      MetricSummary s;
      std::vector<double> finite;
      for (double x : v) {
        if (std::isinf(x)) {
          ++s.inf_count;
        } else {
          finite.push_back(x);
        }
      }
      std::sort(finite.begin(), finite.end());
      s.count = finite.size();
      if (!finite.empty()) {
        CompensatedSum<> sum;
        for (double x : finite) sum.add(x);
        s.mean = sum.value() / static_cast<double>(finite.size());
        CompensatedSum<> sq;
        for (double x : finite) sq.add((x - s.mean) * (x - s.mean));
        s.std = std::sqrt(sq.value() / static_cast<double>(finite.size()));
      }
      r.metrics.push_back(s);
    }
    out.rows.push_back(std::move(r));
  }
  return out;
}

inline std::vector<std::string> aggregate_header(const AggregateTable& t) {
  std::vector<std::string> h = t.group_by;
  for (const auto& m : t.metrics) {
    for (const char* suffix : {"_mean", "_std", "_count", "_inf_count"}) h.push_back(m + suffix);
  }
  return h;
}

inline std::vector<std::vector<std::string>> aggregate_cells(const AggregateTable& t) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : t.rows) {
    std::vector<std::string> cells = r.keys;
    for (const auto& s : r.metrics) {
      cells.push_back(s.count ? format_number(s.mean) : "");
      cells.push_back(s.count ? format_number(s.std) : "");
      cells.push_back(std::to_string(s.count));
      cells.push_back(std::to_string(s.inf_count));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline void write_aggregate_csv(const AggregateTable& t, const std::filesystem::path& path) {
  std::string text = csv_line(aggregate_header(t)) + "\n";
  for (const auto& row : aggregate_cells(t)) text += csv_line(row) + "\n";
  io_detail::write_file_atomic(path, text);
}

}  // namespace hyperbench
