#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <thread>
#include <nlohmann/json.hpp>

#include "hyperbench/io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace hyperbench;
using testing_support::TempDir;

namespace {

const std::filesystem::path kFixtures = HB_FIXTURE_DIR;

// Value stored by every fixture: 100 r + 10 c + b + 0.25.
double fixture_value(std::size_t r, std::size_t c, std::size_t b) {
  return 100.0 * static_cast<double>(r) + 10.0 * static_cast<double>(c) + static_cast<double>(b) + 0.25;
}

void expect_fixture_cube(const HsiCube& cube) {
  ASSERT_EQ(cube.shape_string(), "(4, 4, 3)");
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(cube(r, c, b), fixture_value(r, c, b));
}

std::string error_of(const std::filesystem::path& p) {
  try {
    (void)read_cube(p);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

HsiCube float_representable(std::size_t h, std::size_t w, std::size_t b, std::uint64_t seed) {
  auto c = oracle::random_cube(h, w, b, seed);
  for (double& v : c.data()) v = static_cast<double>(static_cast<float>(v));
  return c;
}

ExperimentRecord sample_record(std::size_t i, bool ok) {
  ExperimentRecord r;
  r.dataset_id = "scene,with \"quotes\"";
  r.method_id = "m" + std::to_string(i % 3);
  r.config.psf.family = PsfFamily::gaussian;
  r.config.srf = "ikonos-4";
  r.config.factor = 4;
  r.config.lr_snr_db = 35.0;
  r.config.seed = 1234567890123456789ULL + i;
  r.psf_params = {{"sigma", 1.7}, {"size", 13}};
  r.run_index = i;
  r.wall_time_s = 0.125 * static_cast<double>(i);
  if (ok) {
    r.status = RunStatus::ok;
    r.metrics = MetricReport{0.01 * static_cast<double>(i + 1), 40.0 - static_cast<double>(i), 0.9, 0.8, 1.5, 2.25};
    if (i == 0) r.metrics = MetricReport{};  // identical reconstruction: psnr inf
  } else {
    r.status = RunStatus::method_error;
    r.message = "exit code 1: line one\nline two";
  }
  return r;
}

}  // namespace

TEST(NativeCube, RoundTripF64Bitwise) {
  TempDir dir;
  auto x = oracle::random_cube(8, 8, 5, 1, -1e3, 1e3);
  x.set_wavelengths(std::vector<double>{400.5, 500.25, 600, 700.125, 800});
  write_cube(x, dir / "x.hbc");
  EXPECT_EQ(read_cube(dir / "x.hbc"), x);
  const auto y = oracle::random_cube(3, 2, 7, 2);
  write_cube(y, dir / "y.hbc");
  EXPECT_EQ(read_cube(dir / "y.hbc"), y);
}

TEST(NativeCube, RoundTripF32Bitwise) {
  TempDir dir;
  auto x = float_representable(8, 8, 5, 3);
  x.set_wavelengths(std::vector<double>{400, 450, 500, 550, 600});
  write_cube(x, dir / "x.hbc", Dtype::f32);
  EXPECT_EQ(read_cube(dir / "x.hbc"), x);
}

TEST(NativeCube, F32StorageRoundsToNearestFloat) {
  TempDir dir;
  const auto x = oracle::random_cube(4, 4, 2, 4);
  write_cube(x, dir / "x.hbc", Dtype::f32);
  const auto y = read_cube(dir / "x.hbc");
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], static_cast<double>(static_cast<float>(x.data()[i])));
}

TEST(NativeCube, SizeArithmetic) {
  const auto one = HsiCube::from_data(1, 1, 1, {0.5});
  const auto bytes = encode_cube(one, Dtype::f32);
  const auto nl = bytes.find('\n');
  EXPECT_EQ(bytes.size() - nl - 1, 4u);
  const auto header = nlohmann::json::parse(bytes.substr(0, nl));
  EXPECT_EQ(header["magic"], "HBCUBE1");
  EXPECT_EQ(header["dtype"], "f32");
  EXPECT_EQ(header["has_wavelengths"], false);
  const auto with_wl = HsiCube::from_data(1, 1, 2, {0.5, 0.25}, std::vector<double>{1, 2});
  const auto b2 = encode_cube(with_wl);
  EXPECT_EQ(b2.size() - b2.find('\n') - 1, 2u * 8 + 2u * 8);
}

TEST(NativeCube, TruncatedPayload) {
  TempDir dir;
  write_cube(oracle::random_cube(4, 4, 2, 5), dir / "x.hbc");
  std::filesystem::resize_file(dir / "x.hbc", std::filesystem::file_size(dir / "x.hbc") - 3);
  EXPECT_NE(error_of(dir / "x.hbc").find("payload length mismatch"), std::string::npos);
}

TEST(NativeCube, UnknownFormat) {
  TempDir dir;
  std::ofstream(dir / "junk.bin") << "hello world";
  EXPECT_NE(error_of(dir / "junk.bin").find("unknown format"), std::string::npos);
  EXPECT_THROW((void)read_cube(dir / "absent.hbc"), IoError);
}

TEST(NpyFixtures, ParseF64AndF32) {
  expect_fixture_cube(read_cube(kFixtures / "cube_f64.npy"));
  expect_fixture_cube(read_cube(kFixtures / "cube_f32.npy"));
  EXPECT_EQ(read_npy(kFixtures / "cube_f32.npy").dtype, Dtype::f32);
}

TEST(NpyFixtures, Rejections) {
  EXPECT_NE(error_of(kFixtures / "plane_2d.npy").find("cube must be 3-D"), std::string::npos);
  EXPECT_NE(error_of(kFixtures / "cube_fortran.npy").find("Fortran"), std::string::npos);
  EXPECT_NE(error_of(kFixtures / "cube_int32.npy").find("unsupported dtype"), std::string::npos);
}

TEST(NpyFixtures, EncoderMatchesNumpyBytes) {
  // numpy's own encoding of the same array is byte-identical to ours
  const auto ref = io_detail::read_file(kFixtures / "cube_f64.npy");
  const auto ours = encode_npy(cube_to_npy(read_cube(kFixtures / "cube_f64.npy"), Dtype::f64));
  EXPECT_EQ(std::string(ref.begin(), ref.end()), ours);
  const auto ref32 = io_detail::read_file(kFixtures / "cube_f32.npy");
  const auto ours32 = encode_npy(cube_to_npy(read_cube(kFixtures / "cube_f32.npy"), Dtype::f32));
  EXPECT_EQ(std::string(ref32.begin(), ref32.end()), ours32);
}

TEST(Npy, RoundTripAndHeaderAlignment) {
  TempDir dir;
  const auto x = oracle::random_cube(5, 3, 7, 6);
  write_npy(dir / "x.npy", cube_to_npy(x));
  EXPECT_EQ(npy_to_cube(read_npy(dir / "x.npy")), x);
  const auto bytes = encode_npy(cube_to_npy(x));
  const auto header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  EXPECT_EQ((10 + header_len) % 64, 0);
  EXPECT_EQ(bytes[10 + header_len - 1], '\n');
}

TEST(Npy, TruncatedPayload) {
  auto bytes = encode_npy(cube_to_npy(oracle::random_cube(2, 2, 2, 7)));
  bytes.resize(bytes.size() - 8);
  try {
    (void)decode_npy(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("payload length mismatch"), std::string::npos);
  }
}

TEST(MatFixtures, UncompressedV5) { expect_fixture_cube(read_cube(kFixtures / "cube_v5.mat")); }

TEST(MatFixtures, CompressedIsRejected) {
  EXPECT_NE(error_of(kFixtures / "cube_v5_zip.mat").find("compressed"), std::string::npos);
}

TEST(Wavelengths, SidecarParsing) {
  TempDir dir;
  std::ofstream(dir / "wl.txt") << "# band centres\n400, 410\n420\n\n430 440\n";
  EXPECT_EQ(read_wavelengths(dir / "wl.txt"), (std::vector<double>{400, 410, 420, 430, 440}));
  std::ofstream(dir / "bad.txt") << "400 abc\n";
  EXPECT_THROW((void)read_wavelengths(dir / "bad.txt"), FormatError);
}

TEST(Numbers, FormatAndParse) {
  EXPECT_EQ(format_number(kInf), "inf");
  EXPECT_EQ(parse_number("inf"), kInf);
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5}) EXPECT_EQ(parse_number(format_number(v)), v);
  EXPECT_EQ(format_number17(0.1), "0.10000000000000001");
  EXPECT_THROW((void)parse_number("1.5x"), FormatError);
  EXPECT_THROW((void)parse_number(""), FormatError);
}

TEST(Csv, EscapeAndParse) {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  const auto rows = parse_csv(csv_line(fields) + "\n" + csv_line({"a", "b", "c", "d", "e"}) + "\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], fields);
  EXPECT_EQ(rows[1][4], "e");
}

TEST(RecordLog, HeaderOnceAndRowCount) {
  TempDir dir;
  const auto csv = dir / "log.csv";
  append_record(sample_record(0, true), csv);
  auto t = read_log_csv(csv);
  EXPECT_EQ(t.header, record_columns());
  EXPECT_EQ(t.rows.size(), 1u);
  for (std::size_t i = 1; i < 70; ++i) append_record(sample_record(i, true), csv);
  std::ifstream in(csv);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 71u);
  EXPECT_EQ(read_log_csv(csv).rows[0][record_columns().size() - 8], "inf");
}

TEST(RecordLog, SchemaDrift) {
  TempDir dir;
  const auto csv = dir / "log.csv";
  std::ofstream(csv) << "dataset_id,method_id\n";
  EXPECT_THROW(append_record(sample_record(1, true), csv), FormatError);
}

TEST(RecordLog, RejectsInvalidRecord) {
  TempDir dir;
  auto r = sample_record(1, true);
  r.metrics.reset();
  EXPECT_THROW(append_record(r, dir / "log.csv"), ValidationError);
  EXPECT_FALSE(std::filesystem::exists(dir / "log.csv"));
}

TEST(RecordLog, CsvAndJsonlMirrorsAgree) {
  TempDir dir;
  const auto csv = dir / "log.csv";
  for (std::size_t i = 0; i < 12; ++i) append_record(sample_record(i, i % 4 != 3), csv);
  const auto table = read_log_csv(csv);
  std::ifstream js(jsonl_sibling(csv));
  std::vector<nlohmann::json> objects;
  for (std::string line; std::getline(js, line);) objects.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(objects.size(), table.rows.size());
  for (std::size_t row = 0; row < objects.size(); ++row) {
    const auto& o = objects[row];
    ASSERT_EQ(o.size(), table.header.size());
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const auto& name = table.header[c];
      const auto& cell = table.rows[row][c];
      const auto& v = o.at(name);
      std::string text;
      if (name == "psf_params") {
        text = v.dump();
      } else if (v.is_null()) {
        text = "";
      } else if (v.is_string()) {
        text = v.get<std::string>();
      } else if (v.is_number_float()) {
        text = format_number(v.get<double>());
      } else {
        text = v.dump();
      }
      EXPECT_EQ(text, cell) << "row " << row << " column " << name;
    }
  }
}

TEST(RecordLog, ConcurrentAppendsKeepRowsIntact) {
  TempDir dir;
  RecordLog log(dir / "log.csv");
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = 0; i < 25; ++i) log.append(sample_record(static_cast<std::size_t>(t) * 25 + i, true));
    });
  }
  for (auto& th : threads) th.join();
  const auto table = read_log_csv(dir / "log.csv");
  EXPECT_EQ(table.rows.size(), 100u);
  std::vector<std::string> idx;
  for (const auto& r : table.rows) idx.push_back(r[table.column("run_index")]);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(std::unique(idx.begin(), idx.end()), idx.end());
}

TEST(RecordLog, MissingFileReadsEmpty) {
  TempDir dir;
  const auto t = read_log_csv(dir / "none.csv");
  EXPECT_TRUE(t.header.empty());
  EXPECT_THROW((void)t.column("rmse"), ParameterError);
}
