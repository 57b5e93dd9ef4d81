#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "hyperbench/degrade.hpp"
#include "hyperbench/method.hpp"
#include "hyperbench/metrics.hpp"
#include "hyperbench/srf.hpp"
#include "hyperbench/synthetic.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace hyperbench;
using testing_support::TempDir;

namespace {

const std::string kAdapter = HB_ADAPTER_PATH;

struct Setup {
  HsiCube gt;
  DegradationConfig config;
  SrfMatrix srf;
  PsfKernel kernel;
  ObservationPair pair;
};

Setup make_setup(std::size_t n, std::size_t bands, std::size_t endmembers, int factor, Snr lr, Snr msi,
                 std::optional<SrfMatrix> srf = {}, PsfSpec psf = {PsfFamily::gaussian, std::nullopt, {{"sigma", 1.0}}}) {
  Setup s;
  s.gt = synthetic_scene(n, n, bands, endmembers, 11);
  s.config.psf = std::move(psf);
  s.config.factor = factor;
  s.config.lr_snr_db = lr;
  s.config.msi_snr_db = msi;
  s.config.seed = 99;
  s.srf = srf ? *srf : build_srf_matrix(load_srf("ikonos-4"), *s.gt.wavelengths());
  s.config.srf = s.srf.sensor;
  s.kernel = make_kernel(s.config.psf);
  s.pair = generate_pair(s.gt, s.config, s.srf, s.kernel);
  return s;
}

MethodSpec external(std::string mode, double timeout_s = 60.0) {
  return {"adapter-" + mode, MethodKind::external, {kAdapter, std::move(mode)}, timeout_s};
}

MethodResult run(const MethodSpec& m, const Setup& s, const std::filesystem::path& workdir) {
  return run_method(m, s.pair, s.srf, s.kernel, s.config, workdir);
}

}  // namespace

TEST(Upsample, FactorOneIsIdentity) {
  ObservationPair p;
  p.lr_hsi = oracle::random_cube(5, 4, 3, 1);
  EXPECT_EQ(builtin_upsample(p, 1), p.lr_hsi);
}

TEST(Upsample, ConstantStaysConstant) {
  ObservationPair p;
  p.lr_hsi = HsiCube::from_data(3, 3, 2, std::vector<double>(18, 0.375));
  const auto up = builtin_upsample(p, 4);
  EXPECT_EQ(up.shape_string(), "(12, 12, 2)");
  for (double v : up.data()) EXPECT_DOUBLE_EQ(v, 0.375);
}

TEST(Upsample, TwoByTwoRampHandValues) {
  // lr = [[0, 1], [2, 3]]: output samples at -0.25, 0.25, 0.75, 1.25 (clamped)
  ObservationPair p;
  p.lr_hsi = HsiCube::from_data(2, 2, 1, {0, 1, 2, 3});
  const auto up = builtin_upsample(p, 2);
  const double t[4] = {0.0, 0.25, 0.75, 1.0};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(up(r, c, 0), 2 * t[r] + t[c]) << r << "," << c;
}

TEST(Regression, RecoversExactAffineScene) {
  // three endmembers peaking in the blue, red and NIR bands, mixed with
  // per-pixel weights summing to one: each spectrum is an affine function of
  // its four-band projection. The ridge term shrinks along low-variance
  // directions, so the mixing is kept close to pure pixels.
  const std::size_t n = 32, bands = 31;
  std::vector<double> wl(bands);
  for (std::size_t b = 0; b < bands; ++b) wl[b] = 400.0 + 20.0 * static_cast<double>(b);
  const double centres[3] = {480.0, 660.0, 800.0};
  auto weights = oracle::random_cube(n, n, 3, 21, 0.05, 1.0);
  for (double& w : weights.data()) w = std::pow(w, 4);
  HsiCube gt(n, n, bands);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double total = weights(r, c, 0) + weights(r, c, 1) + weights(r, c, 2);
      for (std::size_t b = 0; b < bands; ++b) {
        double v = 0;
        for (std::size_t e = 0; e < 3; ++e) {
          const double d = (wl[b] - centres[e]) / 60.0;
          v += weights(r, c, e) / total * (0.05 + 0.9 * std::exp(-d * d));
        }
        gt(r, c, b) = v;
      }
    }
  gt.set_wavelengths(wl);
  DegradationConfig config;
  config.psf = {PsfFamily::delta, std::nullopt, {}};
  config.factor = 4;
  const auto srf = build_srf_matrix(load_srf("ikonos-4"), wl);
  const auto kernel = make_kernel(config.psf);
  const auto pair = generate_pair(gt, config, srf, kernel);
  EXPECT_LE(rmse(pair.gt, builtin_regression(pair, srf, kernel, 4)), 1e-5);
}

TEST(Regression, IdentitySrfIsNearExact) {
  const auto s =
      make_setup(32, 8, 6, 1, std::nullopt, std::nullopt, identity_srf(8), {PsfFamily::delta, std::nullopt, {}});
  const auto recon = builtin_regression(s.pair, s.srf, s.kernel, 1);
  EXPECT_LE(rmse(s.pair.gt, recon), 1e-4);
}

TEST(Regression, BeatsUpsampleOnLowRankScene) {
  const auto s = make_setup(64, 31, 5, 4, 35.0, 40.0);
  const double up = psnr(s.pair.gt, builtin_upsample(s.pair, 4));
  const double reg = psnr(s.pair.gt, builtin_regression(s.pair, s.srf, s.kernel, 4));
  EXPECT_GT(reg, up + 1.0);
}

TEST(Regression, ShapeMismatch) {
  auto s = make_setup(16, 8, 3, 2, std::nullopt, std::nullopt);
  EXPECT_THROW((void)builtin_regression(s.pair, identity_srf(8), s.kernel, 2), ShapeError);
}

TEST(RunMethod, BuiltinsNeedNoWorkdir) {
  TempDir dir;
  const auto s = make_setup(16, 8, 3, 2, 30.0, 30.0);
  const auto r = run({"up", MethodKind::builtin_upsample, {}, 10}, s, dir / "unused");
  ASSERT_EQ(r.status, RunStatus::ok);
  EXPECT_EQ(r.recon->shape_string(), s.gt.shape_string());
  EXPECT_EQ(r.recon->wavelengths(), s.gt.wavelengths());
  EXPECT_FALSE(std::filesystem::exists(dir / "unused"));
}

TEST(External, ProtocolFilesAndMeta) {
  TempDir dir;
  const auto s = make_setup(16, 8, 3, 2, 30.0, std::nullopt);
  const auto r = run(external("silent"), s, dir / "w");
  EXPECT_EQ(r.status, RunStatus::method_error);
  EXPECT_NE(r.message.find("no recon.npy"), std::string::npos);
  for (const char* f : {"lr_hsi.npy", "hr_msi.npy", "srf.npy", "psf.npy", "meta.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "w" / f)) << f;
  }
  std::ifstream in(dir / "w" / "meta.json");
  const auto meta = nlohmann::json::parse(in);
  for (const char* k : {"protocol", "factor", "lr_snr_db", "msi_snr_db", "seed", "height", "width", "lr_height",
                        "lr_width", "hsi_bands", "msi_bands", "wavelengths_nm", "psf_family", "psf_params",
                        "srf_sensor"}) {
    EXPECT_TRUE(meta.contains(k)) << k;
  }
  EXPECT_EQ(meta["factor"], 2);
  EXPECT_EQ(meta["lr_height"], 8);
  EXPECT_EQ(meta["msi_bands"], 4);
  EXPECT_TRUE(meta["msi_snr_db"].is_null());
  EXPECT_EQ(meta["psf_family"], "gaussian");
  EXPECT_EQ(meta["srf_sensor"], "ikonos-4");
  EXPECT_EQ(read_npy(dir / "w" / "srf.npy").shape, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(npy_to_cube(read_npy(dir / "w" / "lr_hsi.npy")), [&] {
    auto c = s.pair.lr_hsi;
    c.set_wavelengths(std::nullopt);
    return c;
  }());
}

TEST(External, LoopbackMatchesBuiltinUpsample) {
  TempDir dir;
  const auto s = make_setup(32, 8, 3, 4, 30.0, 35.0);
  const auto ext = run(external("loopback"), s, dir / "w");
  ASSERT_EQ(ext.status, RunStatus::ok) << ext.message;
  const auto builtin = run({"up", MethodKind::builtin_upsample, {}, 10}, s, dir / "b");
  const auto a = evaluate_all(s.pair.gt, *ext.recon, 4);
  const auto b = evaluate_all(s.pair.gt, *builtin.recon, 4);
  EXPECT_NEAR(a.rmse, b.rmse, 1e-5);
  EXPECT_NEAR(a.psnr_db, b.psnr_db, 1e-3);
  EXPECT_NEAR(a.ssim, b.ssim, 1e-5);
  EXPECT_NEAR(a.sam_deg, b.sam_deg, 1e-3);
}

TEST(External, NonzeroExitIsMethodError) {
  TempDir dir;
  const auto s = make_setup(16, 8, 3, 2, 30.0, 30.0);
  const auto r = run(external("fail"), s, dir / "w");
  EXPECT_EQ(r.status, RunStatus::method_error);
  EXPECT_FALSE(r.recon);
  EXPECT_NE(r.message.find("exit code 1"), std::string::npos);
  EXPECT_NE(r.message.find("deliberate failure"), std::string::npos);

  const auto f = run({"false", MethodKind::external, {"false"}, 10}, s, dir / "f");
  EXPECT_EQ(f.status, RunStatus::method_error);
  const auto missing = run({"nope", MethodKind::external, {"/nonexistent/method-binary"}, 10}, s, dir / "n");
  EXPECT_EQ(missing.status, RunStatus::method_error);
}

TEST(External, Timeout) {
  TempDir dir;
  const auto s = make_setup(16, 8, 3, 2, 30.0, 30.0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(external("sleep", 0.5), s, dir / "w");
  const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(r.status, RunStatus::timeout);
  EXPECT_LT(took, 10.0);
}

TEST(External, GarbageShapeAndNan) {
  TempDir dir;
  const auto s = make_setup(16, 8, 3, 2, 30.0, 30.0);
  const auto g = run(external("garbage-shape"), s, dir / "g");
  EXPECT_EQ(g.status, RunStatus::method_error);
  EXPECT_NE(g.message.find("(2, 2, 2)"), std::string::npos);
  const auto n = run(external("nan"), s, dir / "n");
  EXPECT_EQ(n.status, RunStatus::method_error);
  EXPECT_NE(n.message.find("non-finite"), std::string::npos);
}

TEST(External, NonEmptyWorkdirThrows) {
  TempDir dir;
  std::filesystem::create_directories(dir / "w");
  std::ofstream(dir / "w" / "stale.txt") << "x";
  const auto s = make_setup(16, 8, 3, 2, 30.0, 30.0);
  EXPECT_THROW((void)run(external("loopback"), s, dir / "w"), IoError);
}

TEST(MethodSpecs, Validation) {
  EXPECT_THROW(validate(MethodSpec{"", MethodKind::builtin_upsample, {}, 1}), ValidationError);
  EXPECT_THROW(validate(MethodSpec{"x", MethodKind::external, {}, 1}), ValidationError);
  EXPECT_THROW(validate(MethodSpec{"x", MethodKind::builtin_upsample, {}, 0}), ValidationError);
  EXPECT_EQ(method_kind_from_string("builtin_regression"), MethodKind::builtin_regression);
  EXPECT_THROW((void)method_kind_from_string("magic"), ParameterError);
}
