#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "hyperbench/srf.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace hyperbench;
using testing_support::TempDir;

namespace {

std::filesystem::path write_text(const TempDir& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

SrfCurveSet one_curve(std::vector<double> wl, std::vector<double> resp) {
  return SrfCurveSet{"test", {SrfCurve{"b1", std::move(wl), std::move(resp)}}};
}

}  // namespace

TEST(SrfCurves, ParsesThreeBands) {
  TempDir dir;
  const auto p = write_text(dir, "s.csv",
                            "wavelength_nm,b1,b2,b3\n400,0,0.5,1\n500,1,0.5,0\n600,0,0.5,0\n");
  const auto set = load_srf_curves(p);
  ASSERT_EQ(set.bands.size(), 3u);
  EXPECT_EQ(set.bands[1].name, "b2");
  EXPECT_EQ(set.bands[2].response[0], 1.0);
  EXPECT_EQ(set.sensor, "s");
}

TEST(SrfCurves, NegativeResponseNamesTheRow) {
  TempDir dir;
  const auto p = write_text(dir, "s.csv", "wavelength_nm,b1\n400,0.2\n500,-0.1\n600,0.3\n");
  try {
    (void)load_srf_curves(p);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("negative"), std::string::npos) << msg;
  }
}

TEST(SrfCurves, ParseErrorsCarryLineNumbers) {
  TempDir dir;
  EXPECT_THROW((void)load_srf_curves(write_text(dir, "a.csv", "lambda,b1\n400,1\n")), FormatError);
  try {
    (void)load_srf_curves(write_text(dir, "b.csv", "wavelength_nm,b1\n400,1\n500,x\n"));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  EXPECT_THROW((void)load_srf_curves(write_text(dir, "c.csv", "wavelength_nm,b1\n500,1\n400,1\n")), FormatError);
  EXPECT_THROW((void)load_srf_curves(write_text(dir, "d.csv", "wavelength_nm,b1\n400,1,2\n")), FormatError);
  EXPECT_THROW((void)load_srf_curves(dir / "missing.csv"), IoError);
}

TEST(SrfCurves, ShippedAssets) {
  const std::pair<const char*, std::size_t> expected[] = {
      {"ikonos-3", 3}, {"ikonos-4", 4}, {"worldview2-8", 8}, {"worldview3-16", 16}};
  for (const auto& [id, bands] : expected) {
    const auto set = load_srf(id);
    EXPECT_EQ(set.bands.size(), bands) << id;
    EXPECT_NO_THROW(validate(set));
  }
  // ikonos-4 spans the visible range and the near infrared
  const auto ik = load_srf("ikonos-4");
  EXPECT_GT(sample_curve(ik.bands[0], 480.0), 0.5);
  EXPECT_GT(sample_curve(ik.bands[3], 800.0), 0.5);
  EXPECT_THROW((void)load_srf("landsat-9"), IoError);
}

TEST(SrfCurves, EnvironmentOverridesAssetDir) {
  TempDir dir;
  write_text(dir, "toy.csv", "wavelength_nm,only\n400,1\n700,1\n");
  ::setenv("HYPERBENCH_ASSETS", dir.path().c_str(), 1);
  const auto set = load_srf("toy");
  ::unsetenv("HYPERBENCH_ASSETS");
  EXPECT_EQ(set.bands.size(), 1u);
  EXPECT_THROW((void)load_srf("toy"), IoError);
}

TEST(SrfMatrixBuild, UniformCurve) {
  const std::vector<double> wl{450, 550, 650};
  const auto m = build_srf_matrix(one_curve({400, 700}, {1, 1}), wl);
  ASSERT_EQ(m.rows, 1u);
  for (std::size_t b = 0; b < 3; ++b) EXPECT_DOUBLE_EQ(m.at(0, b), 1.0 / 3.0);
  EXPECT_EQ(m.source_wavelengths, wl);
}

TEST(SrfMatrixBuild, NoOverlap) {
  const std::vector<double> wl{600, 700};
  try {
    (void)build_srf_matrix(one_curve({400, 500}, {1, 1}), wl);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("no spectral overlap"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("band 0"), std::string::npos);
  }
}

TEST(SrfMatrixBuild, TriangleInterpolation) {
  const std::vector<double> wl{500, 550, 600};
  const auto m = build_srf_matrix(one_curve({500, 550, 600}, {0, 1, 0}), wl);
  EXPECT_EQ(m.weights, (std::vector<double>{0, 1, 0}));
  // between samples: the triangle evaluated at 525 and 575 is 0.5
  const std::vector<double> wl2{525, 550, 575};
  const auto m2 = build_srf_matrix(one_curve({500, 550, 600}, {0, 1, 0}), wl2);
  EXPECT_DOUBLE_EQ(m2.at(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(m2.at(0, 1), 0.5);
}

TEST(SrfMatrixBuild, RowsSumToOneAndScaleInvariant) {
  std::vector<double> wl;
  for (int i = 0; i < 31; ++i) wl.push_back(400 + 20 * i);
  const auto set = load_srf("ikonos-4");
  const auto m = build_srf_matrix(set, wl);
  EXPECT_NO_THROW(validate(m));
  auto scaled = set;
  for (double& r : scaled.bands[2].response) r *= 7.5;
  const auto m2 = build_srf_matrix(scaled, wl);
  for (std::size_t i = 0; i < m.weights.size(); ++i) EXPECT_NEAR(m.weights[i], m2.weights[i], 1e-15);
}

TEST(SrfMatrixBuild, RejectsBadWavelengths) {
  const auto set = one_curve({400, 700}, {1, 1});
  EXPECT_THROW((void)build_srf_matrix(set, std::vector<double>{500}), ParameterError);
  EXPECT_THROW((void)build_srf_matrix(set, std::vector<double>{500, 450}), ValidationError);
}

TEST(ApplySrf, ConstantAndMean) {
  SrfMatrix m{1, 3, {1.0 / 3, 1.0 / 3, 1.0 / 3}, "t", {1, 2, 3}};
  const auto y = apply_srf(HsiCube(2, 2, 3, 0.6), m);
  for (double v : y.data()) EXPECT_NEAR(v, 0.6, 1e-15);
  const auto px = HsiCube::from_data(1, 1, 3, {0.2, 0.4, 0.6});
  EXPECT_NEAR(apply_srf(px, m)(0, 0, 0), 0.4, 1e-15);
  EXPECT_THROW((void)apply_srf(HsiCube(2, 2, 4), m), ShapeError);
}

TEST(ApplySrf, MatchesPerPixelOracle) {
  const auto x = oracle::random_cube(4, 4, 5, 21);
  SrfMatrix m{2, 5, {0.1, 0.2, 0.3, 0.4, 0.0, 0.0, 0.5, 0.0, 0.25, 0.25}, "t", {1, 2, 3, 4, 5}};
  const auto expect = oracle::project(x, {{0.1, 0.2, 0.3, 0.4, 0.0}, {0.0, 0.5, 0.0, 0.25, 0.25}});
  const auto got = apply_srf(x, m);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], expect.data()[i], 1e-15);
}

TEST(ApplySrf, EnvelopeAndIdentity) {
  const auto x = oracle::random_cube(6, 5, 31, 4);
  std::vector<double> wl;
  for (int i = 0; i < 31; ++i) wl.push_back(400 + 20 * i);
  const auto y = apply_srf(x, build_srf_matrix(load_srf("worldview2-8"), wl));
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  for (double v : y.data()) {
    EXPECT_GE(v, *lo - 1e-15);
    EXPECT_LE(v, *hi + 1e-15);
  }
  EXPECT_EQ(apply_srf(x, identity_srf(31)).data().size(), x.size());
  const auto same = apply_srf(x, identity_srf(31));
  EXPECT_TRUE(std::equal(same.data().begin(), same.data().end(), x.data().begin()));
}
