// hyperbench command-line front end.
//
// Exit codes: 0 ok, 1 pipeline error, 2 usage error, 3 method failure.

#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "hyperbench/hyperbench.hpp"

namespace fs = std::filesystem;
using namespace hyperbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMethod = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegradeArgs {
  std::string input;
  std::string wavelengths;
  std::string psf = "gaussian";
  std::vector<std::string> psf_params;
  int psf_size = 0;
  std::string srf = "ikonos-4";
  int factor = 4;
  std::string lr_snr = "none";
  std::string msi_snr = "none";
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string clip = "1,99";
};

void add_degrade_flags(CLI::App* cmd, DegradeArgs& a, bool out_dir_required) {
  cmd->add_option("--input", a.input, "ground-truth cube (.npy, .mat or native cube file)")->required();
  cmd->add_option("--wavelengths", a.wavelengths, "band centres in nm, one per line");
  cmd->add_option("--psf", a.psf, "PSF family")->capture_default_str();
  cmd->add_option("--psf-param", a.psf_params, "PSF parameter k=v (repeatable)");
  cmd->add_option("--psf-size", a.psf_size, "odd kernel size")->check(CLI::PositiveNumber);
  cmd->add_option("--srf", a.srf, "sensor id or SRF csv path")->capture_default_str();
  cmd->add_option("--factor", a.factor, "spatial downsampling factor")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--lr-snr", a.lr_snr, "LR-HSI SNR in dB, or none")->capture_default_str();
  cmd->add_option("--msi-snr", a.msi_snr, "HR-MSI SNR in dB, or none")->capture_default_str();
  cmd->add_option("--seed", a.seed, "noise seed")->required();
  auto* out = cmd->add_option("--out-dir", a.out_dir, "output directory");
  if (out_dir_required) out->required();
  cmd->add_option("--clip", a.clip, "normalization percentiles lo,hi")->capture_default_str();
}

Snr parse_snr(const std::string& s, const char* flag) {
  if (s == "none" || s.empty()) return std::nullopt;
  try {
    return parse_number(s);
  } catch (const Error&) {
    throw UsageError(std::string(flag) + ": expected a number or 'none', got '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

DegradationConfig config_from_args(const DegradeArgs& a) {
  DegradationConfig c;
  try {
    c.psf.family = psf_family_from_string(a.psf);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (a.psf_size > 0) c.psf.size = a.psf_size;
  for (const auto& kv : a.psf_params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--psf-param expects k=v, got '" + kv + "'");
    try {
      c.psf.params[kv.substr(0, eq)] = parse_number(kv.substr(eq + 1));
    } catch (const Error&) {
      throw UsageError("--psf-param " + kv + ": value is not a number");
    }
  }
  c.srf = a.srf;
  c.factor = a.factor;
  c.lr_snr_db = parse_snr(a.lr_snr, "--lr-snr");
  c.msi_snr_db = parse_snr(a.msi_snr, "--msi-snr");
  c.seed = a.seed;
  const auto clip = split(a.clip, ',');
  if (clip.size() != 2) throw UsageError("--clip expects lo,hi");
  try {
    c.clip_percentiles = {parse_number(clip[0]), parse_number(clip[1])};
    validate(c);
    (void)make_kernel(c.psf);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

DatasetEntry dataset_from_args(const DegradeArgs& a) {
  DatasetEntry d;
  d.id = fs::path(a.input).stem().string();
  d.path = a.input;
  if (!a.wavelengths.empty()) d.wavelengths = a.wavelengths;
  return d;
}

nlohmann::ordered_json config_json(const DegradationConfig& c, const PsfKernel& k) {
  nlohmann::ordered_json j;
  j["psf_family"] = to_string(c.psf.family);
  j["psf_size"] = k.size;
  j["psf_params"] = nlohmann::ordered_json::object();
  for (const auto& [name, v] : k.params) j["psf_params"][name] = v;
  j["srf"] = c.srf;
  j["factor"] = c.factor;
  j["lr_snr_db"] = c.lr_snr_db ? nlohmann::ordered_json(*c.lr_snr_db) : nlohmann::ordered_json("none");
  j["msi_snr_db"] = c.msi_snr_db ? nlohmann::ordered_json(*c.msi_snr_db) : nlohmann::ordered_json("none");
  j["seed"] = c.seed;
  j["clip_percentiles"] = {c.clip_percentiles.first, c.clip_percentiles.second};
  return j;
}

int cmd_degrade(const DegradeArgs& a) {
  const DegradationConfig config = config_from_args(a);
  const DatasetEntry dataset = dataset_from_args(a);
  const HsiCube raw = load_dataset(dataset);
  const HsiCube gt = build_ground_truth(raw, config.clip_percentiles.first, config.clip_percentiles.second);
  const PsfKernel kernel = make_kernel(config.psf);
  const SrfMatrix srf = build_srf_matrix(load_srf(config.srf), require_wavelengths(gt, dataset.id));
  const ObservationPair pair = generate_pair(gt, config, srf, kernel);

  // everything is computed before the first write; the manifest goes last
  const fs::path out(a.out_dir);
  fs::create_directories(out);
  write_cube(pair.gt, out / "gt.hbc");
  write_cube(pair.lr_hsi, out / "lr_hsi.hbc");
  write_cube(pair.hr_msi, out / "hr_msi.hbc");
  nlohmann::ordered_json m;
  m["input"] = a.input;
  m["config"] = config_json(config, kernel);
  m["realized_lr_snr_db"] =
      pair.realized_lr_snr_db ? nlohmann::ordered_json(*pair.realized_lr_snr_db) : nlohmann::ordered_json("none");
  m["realized_msi_snr_db"] =
      pair.realized_msi_snr_db ? nlohmann::ordered_json(*pair.realized_msi_snr_db) : nlohmann::ordered_json("none");
  m["files"] = {{"gt", "gt.hbc"}, {"lr_hsi", "lr_hsi.hbc"}, {"hr_msi", "hr_msi.hbc"}};
  m["shapes"] = {{"gt", pair.gt.shape_string()},
                 {"lr_hsi", pair.lr_hsi.shape_string()},
                 {"hr_msi", pair.hr_msi.shape_string()}};
  io_detail::write_file_atomic(out / "manifest.json", m.dump(2) + "\n");
  std::cout << "wrote " << (out / "gt.hbc").string() << ", lr_hsi.hbc, hr_msi.hbc, manifest.json\n";
  return kExitOk;
}

MethodSpec method_from_flag(const std::string& flag, double timeout_s) {
  MethodSpec m;
  m.timeout_s = timeout_s;
  if (flag == "upsample" || flag == "builtin_upsample") {
    m.method_id = "upsample";
    m.kind = MethodKind::builtin_upsample;
  } else if (flag == "regression" || flag == "builtin_regression") {
    m.method_id = "regression";
    m.kind = MethodKind::builtin_regression;
  } else if (flag.rfind("exec:", 0) == 0) {
    m.kind = MethodKind::external;
    m.command = split(flag.substr(5), ' ');
    if (m.command.empty()) throw UsageError("exec: method needs a command");
    m.method_id = fs::path(m.command.front()).filename().string();
  } else {
    throw UsageError("unknown method '" + flag + "' (use upsample, regression or exec:<command>)");
  }
  return m;
}

void print_metrics_table(const MetricReport& m) {
  const auto names = metric_columns();
  const double values[] = {m.rmse, m.psnr_db, m.ssim, m.uiqi, m.ergas, m.sam_deg};
  for (std::size_t i = 0; i < names.size(); ++i) std::printf("%-10s", names[i].c_str());
  std::printf("\n");
  for (double v : values) std::printf("%-10s", format_number(v).substr(0, 9).c_str());
  std::printf("\n");
}

int cmd_run(const DegradeArgs& a, const std::string& method_flag, std::string log, double timeout_s) {
  const DegradationConfig config = config_from_args(a);
  const MethodSpec method = method_from_flag(method_flag, timeout_s);
  const fs::path out = a.out_dir.empty() ? fs::path(".") : fs::path(a.out_dir);
  if (log.empty()) log = (out / "results.csv").string();
  const fs::path workdir = out / "work" / ("run-" + std::to_string(::getpid()));
  std::error_code ec;
  fs::remove_all(workdir, ec);

  const ExperimentRecord rec = run_single(dataset_from_args(a), method, config, log, workdir);
  if (rec.status == RunStatus::ok) {
    print_metrics_table(*rec.metrics);
    fs::remove_all(workdir, ec);
    fs::remove(out / "work", ec);  // only succeeds when empty
    return kExitOk;
  }
  std::cerr << "run " << to_string(rec.status) << ": " << rec.message << "\n";
  return rec.status == RunStatus::metric_error ? kExitPipeline : kExitMethod;
}

int cmd_sweep(const std::string& grid_path, const std::string& out_dir, std::size_t workers,
              const std::vector<std::string>& datasets, const std::vector<std::string>& methods,
              std::optional<std::uint64_t> seed, double timeout_s) {
  GridSpec spec;
  try {
    spec = load_grid(grid_path);
    for (const auto& d : datasets) {
      const auto eq = d.find('=');
      DatasetEntry e;
      if (eq == std::string::npos) {
        e.path = d;
        e.id = fs::path(d).stem().string();
      } else {
        e.id = d.substr(0, eq);
        e.path = d.substr(eq + 1);
      }
      spec.datasets.push_back(e);
    }
    for (const auto& m : methods) spec.methods.push_back(method_from_flag(m, timeout_s));
    if (seed) spec.base_seed = *seed;
    validate(spec);
  } catch (const IoError& e) {
    if (dynamic_cast<const FormatError*>(&e) == nullptr) throw;
    throw UsageError(e.what());
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }

  const GridSummary s = run_grid(spec, out_dir, workers);
  std::cout << "runs: " << s.total << "\n";
  for (const auto& [status, n] : s.by_status) std::cout << "  " << status << ": " << n << "\n";
  std::cout << "log: " << s.log_path.string() << "\n";
  return s.count(RunStatus::input_error) == 0 ? kExitOk : kExitPipeline;
}

int cmd_eval(const std::string& gt_path, const std::string& recon_path, int factor, double max_value, bool json) {
  const HsiCube gt = read_cube(gt_path);
  const HsiCube recon = read_cube(recon_path);
  if (!gt.same_shape(recon)) {
    throw ShapeError("shape mismatch: gt " + gt.shape_string() + " vs recon " + recon.shape_string());
  }
  const MetricReport m = evaluate_all(gt, recon, factor, max_value);
  if (!json) {
    print_metrics_table(m);
    return kExitOk;
  }
  const auto names = metric_columns();
  const double values[] = {m.rmse, m.psnr_db, m.ssim, m.uiqi, m.ergas, m.sam_deg};
  std::string out = "{";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    // +inf is not a JSON number; it is written as the string "inf"
    const std::string v = format_number17(values[i]);
    out += "\"" + names[i] + "\": " + (std::isinf(values[i]) ? "\"" + v + "\"" : v);
  }
  out += "}";
  std::cout << out << "\n";
  return kExitOk;
}

int cmd_aggregate(const std::string& log, const std::string& group_by, const std::string& metrics,
                  const std::string& csv_out) {
  const auto groups = split(group_by, ',');
  auto names = split(metrics, ',');
  if (names.empty()) names = metric_columns();
  AggregateTable t;
  try {
    t = aggregate(log, groups, names);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  if (!csv_out.empty()) write_aggregate_csv(t, csv_out);
  std::cout << csv_line(aggregate_header(t)) << "\n";
  for (const auto& row : aggregate_cells(t)) std::cout << csv_line(row) << "\n";
  return kExitOk;
}

int cmd_synth(std::size_t h, std::size_t w, std::size_t b, std::size_t e, std::uint64_t seed, const std::string& out,
              const std::string& dtype) {
  const HsiCube cube = synthetic_scene(h, w, b, e, seed);
  if (fs::path(out).extension() == ".npy") {
    write_npy(out, cube_to_npy(cube, dtype == "f32" ? Dtype::f32 : Dtype::f64));
    std::string wl;
    for (double v : *cube.wavelengths()) wl += format_number(v) + "\n";
    io_detail::write_file_atomic(fs::path(out).replace_extension(".wl.txt"), wl);
  } else {
    write_cube(cube, out, dtype == "f32" ? Dtype::f32 : Dtype::f64);
  }
  std::cout << "wrote " << out << " " << cube.shape_string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperbench: synthetic degradation, method runs, sweeps and scoring for hyperspectral super-resolution"};
  app.require_subcommand(1);

  DegradeArgs degrade_args;
  auto* degrade = app.add_subcommand("degrade", "write gt, LR-HSI and HR-MSI cubes plus a manifest");
  add_degrade_flags(degrade, degrade_args, true);

  DegradeArgs run_args;
  std::string method_flag, log_path;
  double timeout_s = 3600.0;
  auto* run = app.add_subcommand("run", "one degradation + method + evaluation, appended to a log");
  add_degrade_flags(run, run_args, false);
  run->add_option("--method", method_flag, "upsample | regression | exec:<command>")->required();
  run->add_option("--log", log_path, "results CSV (default <out-dir>/results.csv)");
  run->add_option("--timeout", timeout_s, "external method timeout in seconds")->check(CLI::PositiveNumber);

  std::string grid_path, sweep_out;
  std::size_t workers = 1;
  std::vector<std::string> sweep_datasets, sweep_methods;
  std::uint64_t sweep_seed = 0;
  auto* sweep = app.add_subcommand("sweep", "expand a grid config and run every configuration");
  sweep->add_option("--grid", grid_path, "grid config (JSON)")->required();
  sweep->add_option("--out-dir", sweep_out, "output directory")->required();
  sweep->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--dataset", sweep_datasets, "extra dataset id=path (repeatable)");
  sweep->add_option("--method", sweep_methods, "extra method (repeatable)");
  auto* sweep_seed_opt = sweep->add_option("--seed", sweep_seed, "override the grid's base_seed");
  sweep->add_option("--timeout", timeout_s, "timeout for --method exec: entries")->check(CLI::PositiveNumber);

  std::string gt_path, recon_path;
  int eval_factor = 1;
  double max_value = 1.0;
  bool json = false;
  auto* eval = app.add_subcommand("eval", "score a reconstruction against a reference cube");
  eval->add_option("--gt", gt_path, "reference cube")->required();
  eval->add_option("--recon", recon_path, "reconstruction cube")->required();
  eval->add_option("--factor", eval_factor, "resolution ratio for ERGAS")->required()->check(CLI::PositiveNumber);
  eval->add_option("--max", max_value, "peak value for PSNR/SSIM")->check(CLI::PositiveNumber);
  eval->add_flag("--json", json, "print one JSON object");

  std::string agg_log, group_by, agg_metrics, csv_out;
  auto* agg = app.add_subcommand("aggregate", "group a results log and summarize metrics");
  agg->add_option("--log", agg_log, "results CSV")->required();
  agg->add_option("--group-by", group_by, "comma-separated columns (empty = one global row)");
  agg->add_option("--metrics", agg_metrics, "comma-separated metric columns (default all six)");
  agg->add_option("--csv-out", csv_out, "also write the table here");

  std::size_t sh = 64, sw = 64, sb = 31, se = 5;
  std::uint64_t synth_seed = 0;
  std::string synth_out, synth_dtype = "f64";
  auto* synth = app.add_subcommand("synth", "write a seeded low-rank synthetic scene");
  synth->add_option("--height", sh)->capture_default_str();
  synth->add_option("--width", sw)->capture_default_str();
  synth->add_option("--bands", sb)->capture_default_str();
  synth->add_option("--endmembers", se)->capture_default_str();
  synth->add_option("--seed", synth_seed)->required();
  synth->add_option("--out", synth_out, ".npy or native cube path")->required();
  synth->add_option("--dtype", synth_dtype)->check(CLI::IsMember({"f32", "f64"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*degrade) return cmd_degrade(degrade_args);
    if (*run) return cmd_run(run_args, method_flag, log_path, timeout_s);
    if (*sweep) {
      return cmd_sweep(grid_path, sweep_out, workers, sweep_datasets, sweep_methods,
                       *sweep_seed_opt ? std::optional<std::uint64_t>(sweep_seed) : std::nullopt, timeout_s);
    }
    if (*eval) return cmd_eval(gt_path, recon_path, eval_factor, max_value, json);
    if (*agg) return cmd_aggregate(agg_log, group_by, agg_metrics, csv_out);
    if (*synth) return cmd_synth(sh, sw, sb, se, synth_seed, synth_out, synth_dtype);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}
