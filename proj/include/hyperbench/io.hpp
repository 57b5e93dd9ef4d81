#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hyperbench/core.hpp"

namespace hyperbench {

enum class Dtype { f32, f64 };

inline std::string_view to_string(Dtype d) noexcept { return d == Dtype::f32 ? "f32" : "f64"; }
inline std::size_t dtype_size(Dtype d) noexcept { return d == Dtype::f32 ? 4 : 8; }

namespace io_detail {

static_assert(std::endian::native == std::endian::little, "hyperbench assumes a little-endian host");

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes `bytes` to a sibling temp file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

template <typename T>
void append_le(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

inline void append_values(std::string& out, std::span<const double> values, Dtype dtype) {
  out.reserve(out.size() + values.size() * dtype_size(dtype));
  for (double v : values) {
    if (dtype == Dtype::f32) {
      append_le(out, static_cast<float>(v));
    } else {
      append_le(out, v);
    }
  }
}

inline std::vector<double> load_values(const char* p, std::size_t count, Dtype dtype) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = dtype == Dtype::f32 ? static_cast<double>(load_le<float>(p + 4 * i)) : load_le<double>(p + 8 * i);
  }
  return v;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// NPY v1.0
// ---------------------------------------------------------------------------

/// An N-d little-endian float array as stored in an NPY file (C order).
struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  Dtype dtype = Dtype::f64;
};

inline std::string encode_npy(const NpyArray& a) {
  std::size_t count = 1;
  for (auto d : a.shape) count *= d;
  if (count != a.data.size()) throw ShapeError("NPY shape does not match data length");

  std::string dict = "{'descr': '";
  dict += a.dtype == Dtype::f32 ? "<f4" : "<f8";
  dict += "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < a.shape.size(); ++i) {
    dict += std::to_string(a.shape[i]);
    if (a.shape.size() == 1 || i + 1 < a.shape.size()) dict += ",";
    if (i + 1 < a.shape.size()) dict += " ";
  }
  dict += "), }";
  // magic(6) + version(2) + header length(2) + dict + padding + '\n' is a
  // multiple of 64
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict += '\n';

  std::string out("\x93NUMPY\x01\x00", 8);
  io_detail::append_le(out, static_cast<std::uint16_t>(dict.size()));
  out += dict;
  io_detail::append_values(out, a.data, a.dtype);
  return out;
}

inline NpyArray decode_npy(std::string_view bytes, const std::string& name = "npy") {
  if (bytes.size() < 10 || bytes.substr(0, 6) != std::string_view("\x93NUMPY", 6)) {
    throw FormatError(name + ": not an NPY file");
  }
  if (bytes[6] != 1 || bytes[7] != 0) {
    throw FormatError(name + ": only NPY version 1.0 is supported");
  }
  const auto header_len = io_detail::load_le<std::uint16_t>(bytes.data() + 8);
  if (bytes.size() < 10u + header_len) throw FormatError(name + ": truncated NPY header");
  const std::string header(bytes.substr(10, header_len));

  auto value_of = [&](const std::string& key) -> std::string {
    const auto k = header.find("'" + key + "'");
    if (k == std::string::npos) throw FormatError(name + ": NPY header lacks '" + key + "'");
    auto colon = header.find(':', k);
    auto start = header.find_first_not_of(' ', colon + 1);
    if (header[start] == '(') return header.substr(start, header.find(')', start) - start + 1);
    auto end = header.find_first_of(",}", start);
    return header.substr(start, end - start);
  };

  NpyArray a;
  const std::string descr = value_of("descr");
  if (descr == "'<f4'") {
    a.dtype = Dtype::f32;
  } else if (descr == "'<f8'") {
    a.dtype = Dtype::f64;
  } else {
    throw FormatError(name + ": unsupported dtype " + descr + " (need little-endian f4 or f8)");
  }
  const std::string fortran = value_of("fortran_order");
  if (fortran == "True") throw FormatError(name + ": Fortran-order NPY files are not supported");
  if (fortran != "False") throw FormatError(name + ": bad fortran_order value " + fortran);

  const std::string shape = value_of("shape");
  std::size_t count = 1;
  for (std::size_t i = 1; i < shape.size();) {
    if (std::isdigit(static_cast<unsigned char>(shape[i]))) {
      std::size_t dim = 0;
      auto [p, ec] = std::from_chars(shape.data() + i, shape.data() + shape.size(), dim);
      if (ec != std::errc()) throw FormatError(name + ": bad shape " + shape);
      a.shape.push_back(dim);
      count *= dim;
      i = static_cast<std::size_t>(p - shape.data());
    } else {
      ++i;
    }
  }
  const std::size_t offset = 10u + header_len;
  const std::size_t payload = bytes.size() - offset;
  if (payload != count * dtype_size(a.dtype)) {
    throw FormatError(name + ": payload length mismatch (" + std::to_string(payload) +
                      " bytes for " + std::to_string(count) + " elements)");
  }
  a.data = io_detail::load_values(bytes.data() + offset, count, a.dtype);
  return a;
}

inline NpyArray read_npy(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  return decode_npy(std::string_view(bytes.data(), bytes.size()), path.string());
}

inline void write_npy(const std::filesystem::path& path, const NpyArray& a) {
  io_detail::write_file_atomic(path, encode_npy(a));
}

inline NpyArray cube_to_npy(const HsiCube& cube, Dtype dtype = Dtype::f64) {
  return {{cube.height(), cube.width(), cube.bands()},
          std::vector<double>(cube.data().begin(), cube.data().end()),
          dtype};
}

inline HsiCube npy_to_cube(const NpyArray& a, const std::string& name = "npy") {
  if (a.shape.size() != 3) {
    throw FormatError(name + ": cube must be 3-D, got " + std::to_string(a.shape.size()) + "-D array");
  }
  return HsiCube::from_data(a.shape[0], a.shape[1], a.shape[2], a.data);
}

// ---------------------------------------------------------------------------
// MATLAB v5 (uncompressed, real numeric 3-D arrays)
// ---------------------------------------------------------------------------

namespace mat_detail {

enum : std::uint32_t {
  miINT8 = 1, miUINT8 = 2, miINT16 = 3, miUINT16 = 4, miINT32 = 5, miUINT32 = 6,
  miSINGLE = 7, miDOUBLE = 9, miINT64 = 12, miUINT64 = 13, miMATRIX = 14, miCOMPRESSED = 15,
};
inline constexpr std::uint32_t mxDOUBLE_CLASS = 6;
inline constexpr std::uint32_t kComplexFlag = 0x0800;

struct Element {
  std::uint32_t type = 0;
  const char* data = nullptr;
  std::size_t size = 0;
  std::size_t next = 0;  // offset of the following element
};

inline Element read_element(const char* base, std::size_t offset, std::size_t limit, const std::string& name) {
  if (offset + 8 > limit) throw FormatError(name + ": truncated MAT element tag");
  Element e;
  const auto raw_type = io_detail::load_le<std::uint32_t>(base + offset);
  if ((raw_type >> 16) != 0) {  // small data element: payload packed in the tag
    e.type = raw_type & 0xFFFF;
    e.size = raw_type >> 16;
    e.data = base + offset + 4;
    e.next = offset + 8;
    return e;
  }
  e.type = raw_type;
  e.size = io_detail::load_le<std::uint32_t>(base + offset + 4);
  e.data = base + offset + 8;
  if (offset + 8 + e.size > limit) throw FormatError(name + ": truncated MAT element payload");
  const std::size_t padded = e.type == miCOMPRESSED ? e.size : (e.size + 7) / 8 * 8;
  e.next = std::min(offset + 8 + padded, limit);
  return e;
}

inline std::vector<double> numeric_values(const Element& e, const std::string& name) {
  auto convert = [&](auto tag) {
    using T = decltype(tag);
    std::vector<double> v(e.size / sizeof(T));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(io_detail::load_le<T>(e.data + i * sizeof(T)));
    return v;
  };
  switch (e.type) {
    case miINT8: return convert(std::int8_t{});
    case miUINT8: return convert(std::uint8_t{});
    case miINT16: return convert(std::int16_t{});
    case miUINT16: return convert(std::uint16_t{});
    case miINT32: return convert(std::int32_t{});
    case miUINT32: return convert(std::uint32_t{});
    case miSINGLE: return convert(float{});
    case miDOUBLE: return convert(double{});
    case miINT64: return convert(std::int64_t{});
    case miUINT64: return convert(std::uint64_t{});
    default: throw FormatError(name + ": unsupported MAT data type " + std::to_string(e.type));
  }
}

}  // namespace mat_detail

inline HsiCube decode_mat(std::string_view bytes, const std::string& name = "mat") {
  using namespace mat_detail;
  if (bytes.size() < 128 || bytes.substr(0, 10) != "MATLAB 5.0") throw FormatError(name + ": not a MAT v5 file");
  if (bytes[126] != 'I' || bytes[127] != 'M') throw FormatError(name + ": only little-endian MAT files are supported");

  const char* base = bytes.data();
  std::optional<HsiCube> found;
  bool saw_compressed = false;
  for (std::size_t off = 128; off + 8 <= bytes.size();) {
    const Element top = read_element(base, off, bytes.size(), name);
    off = top.next;
    if (top.type == miCOMPRESSED) {
      saw_compressed = true;
      continue;
    }
    if (top.type != miMATRIX) continue;

    const std::size_t end = static_cast<std::size_t>(top.data - base) + top.size;
    std::size_t sub = static_cast<std::size_t>(top.data - base);
    const Element flags = read_element(base, sub, end, name);
    sub = flags.next;
    if (flags.size < 8) throw FormatError(name + ": malformed array flags");
    const auto flag_word = io_detail::load_le<std::uint32_t>(flags.data);
    const Element dims_el = read_element(base, sub, end, name);
    sub = dims_el.next;
    const Element name_el = read_element(base, sub, end, name);
    sub = name_el.next;

    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i + 4 <= dims_el.size; i += 4) {
      dims.push_back(static_cast<std::size_t>(io_detail::load_le<std::int32_t>(dims_el.data + i)));
    }
    if ((flag_word & 0xFF) != mxDOUBLE_CLASS || dims.size() != 3) continue;
    if (flag_word & kComplexFlag) throw FormatError(name + ": complex arrays are not supported");
    if (found) throw FormatError(name + ": file holds more than one 3-D double array");

    const Element real = read_element(base, sub, end, name);
    const auto values = numeric_values(real, name);
    const std::size_t h = dims[0], w = dims[1], b = dims[2];
    if (values.size() != h * w * b) throw FormatError(name + ": payload length mismatch");
    std::vector<double> data(values.size());
    // MATLAB stores column-major: (r, c, b) at r + h * (c + w * b)
    for (std::size_t k = 0; k < b; ++k)
      for (std::size_t c = 0; c < w; ++c)
        for (std::size_t r = 0; r < h; ++r) data[(r * w + c) * b + k] = values[r + h * (c + w * k)];
    found = HsiCube::from_data(h, w, b, std::move(data));
  }
  if (!found) {
    if (saw_compressed) throw FormatError(name + ": compressed MAT files are not supported");
    throw FormatError(name + ": no 3-D real double array found");
  }
  return std::move(*found);
}

// ---------------------------------------------------------------------------
// Native cube format
// ---------------------------------------------------------------------------

/// Parsed first line of a native cube file.
struct CubeFileHeader {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t bands = 0;
  Dtype dtype = Dtype::f64;
  bool has_wavelengths = false;
};

inline constexpr std::string_view kCubeMagic = "HBCUBE1";

inline std::string encode_cube(const HsiCube& cube, Dtype dtype = Dtype::f64) {
  nlohmann::ordered_json header;
  header["magic"] = kCubeMagic;
  header["height"] = cube.height();
  header["width"] = cube.width();
  header["bands"] = cube.bands();
  header["dtype"] = to_string(dtype);
  header["has_wavelengths"] = cube.wavelengths().has_value();
  std::string out = header.dump();
  out += '\n';
  io_detail::append_values(out, cube.data(), dtype);
  if (cube.wavelengths()) io_detail::append_values(out, *cube.wavelengths(), Dtype::f64);
  return out;
}

inline HsiCube decode_cube(std::string_view bytes, const std::string& name = "cube") {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos || nl > 4096) throw FormatError(name + ": missing cube header line");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": bad cube header: " + e.what());
  }
  CubeFileHeader h;
  try {
    if (j.at("magic").get<std::string>() != kCubeMagic) throw FormatError(name + ": bad magic");
    h.height = j.at("height").get<std::uint32_t>();
    h.width = j.at("width").get<std::uint32_t>();
    h.bands = j.at("bands").get<std::uint32_t>();
    const auto dt = j.at("dtype").get<std::string>();
    if (dt != "f32" && dt != "f64") throw FormatError(name + ": unsupported dtype " + dt);
    h.dtype = dt == "f32" ? Dtype::f32 : Dtype::f64;
    h.has_wavelengths = j.at("has_wavelengths").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": bad cube header: " + e.what());
  }
  if (h.height == 0 || h.width == 0 || h.bands == 0) throw FormatError(name + ": dimensions must be positive");

  const std::size_t count = std::size_t{h.height} * h.width * h.bands;
  const std::size_t expected = count * dtype_size(h.dtype) + (h.has_wavelengths ? std::size_t{h.bands} * 8 : 0);
  const std::size_t payload = bytes.size() - nl - 1;
  if (payload != expected) {
    throw FormatError(name + ": payload length mismatch (expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(payload) + ")");
  }
  const char* p = bytes.data() + nl + 1;
  auto data = io_detail::load_values(p, count, h.dtype);
  std::optional<std::vector<double>> wl;
  if (h.has_wavelengths) wl = io_detail::load_values(p + count * dtype_size(h.dtype), h.bands, Dtype::f64);
  return HsiCube::from_data(h.height, h.width, h.bands, std::move(data), std::move(wl));
}

inline void write_cube(const HsiCube& cube, const std::filesystem::path& path, Dtype dtype = Dtype::f64) {
  io_detail::write_file_atomic(path, encode_cube(cube, dtype));
}

/// Reads a native cube file, an NPY v1.0 array or a MAT v5 file, chosen by
/// the leading bytes.
inline HsiCube read_cube(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  const std::string_view view(bytes.data(), bytes.size());
  const std::string name = path.string();
  if (view.substr(0, 6) == std::string_view("\x93NUMPY", 6)) return npy_to_cube(decode_npy(view, name), name);
  if (view.substr(0, 10) == "MATLAB 5.0") return decode_mat(view, name);
  if (view.substr(0, 1) == "{" && view.substr(0, 64).find(kCubeMagic) != std::string_view::npos) {
    return decode_cube(view, name);
  }
  throw FormatError(name + ": unknown format");
}

/// Band-centre wavelengths (nm) from a text file: numbers separated by
/// whitespace or commas; lines starting with '#' are ignored.
inline std::vector<double> read_wavelengths(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open wavelength file " + path.string());
  std::vector<double> wl;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size()) {
        throw FormatError(path.string() + ": cannot parse wavelength '" + tok + "'");
      }
      wl.push_back(v);
    }
  }
  return wl;
}

// ---------------------------------------------------------------------------
// Result logs
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols = {
      "dataset_id", "method_id", "psf_family", "psf_params", "srf_sensor", "factor",
      "lr_snr_db",  "msi_snr_db", "seed",     "clip_lo",    "clip_hi",    "status",
      "rmse",       "psnr_db",   "ssim",      "uiqi",       "ergas",      "sam_deg",
      "wall_time_s", "run_index", "message"};
  return cols;
}

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {"rmse", "psnr_db", "ssim", "uiqi", "ergas", "sam_deg"};
  return cols;
}

/// Shortest round-trip decimal; infinities as "inf" / "-inf".
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

/// Fixed 17-significant-digit decimal for machine-readable console output.
inline std::string format_number17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_number(std::string_view s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw FormatError("cannot parse '" + std::string(s) + "' as a number");
  }
  return v;
}

inline std::string psf_params_json(const std::map<std::string, double>& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : params) j[k] = v;
  return j.dump();
}

/// The record as an ordered column -> text map following record_columns().
inline std::vector<std::string> record_fields(const ExperimentRecord& r) {
  std::vector<std::string> f;
  f.push_back(r.dataset_id);
  f.push_back(r.method_id);
  f.emplace_back(to_string(r.config.psf.family));
  f.push_back(psf_params_json(r.psf_params));
  f.push_back(r.config.srf);
  f.push_back(std::to_string(r.config.factor));
  f.push_back(r.config.lr_snr_db ? format_number(*r.config.lr_snr_db) : "none");
  f.push_back(r.config.msi_snr_db ? format_number(*r.config.msi_snr_db) : "none");
  f.push_back(std::to_string(r.config.seed));
  f.push_back(format_number(r.config.clip_percentiles.first));
  f.push_back(format_number(r.config.clip_percentiles.second));
  f.emplace_back(to_string(r.status));
  if (r.metrics) {
    for (double v : {r.metrics->rmse, r.metrics->psnr_db, r.metrics->ssim, r.metrics->uiqi,
                     r.metrics->ergas, r.metrics->sam_deg}) {
      f.push_back(format_number(v));
    }
  } else {
    for (int i = 0; i < 6; ++i) f.emplace_back();
  }
  f.push_back(format_number(r.wall_time_s));
  f.push_back(std::to_string(r.run_index));
  f.push_back(r.message);
  return f;
}

inline nlohmann::ordered_json record_to_json(const ExperimentRecord& r) {
  nlohmann::ordered_json j;
  const auto& cols = record_columns();
  const auto fields = record_fields(r);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto& c = cols[i];
    const auto& v = fields[i];
    if (c == "psf_params") {
      j[c] = nlohmann::ordered_json::parse(v);
    } else if (c == "factor" || c == "run_index") {
      j[c] = std::stoll(v);
    } else if (c == "seed") {
      j[c] = r.config.seed;
    } else if (c == "clip_lo" || c == "clip_hi" || c == "wall_time_s") {
      j[c] = parse_number(v);
    } else if (c == "lr_snr_db" || c == "msi_snr_db") {
      if (v == "none") j[c] = "none"; else j[c] = parse_number(v);
    } else if (c == "rmse" || c == "psnr_db" || c == "ssim" || c == "uiqi" || c == "ergas" || c == "sam_deg") {
      if (v.empty()) j[c] = nullptr;
      else if (v == "inf") j[c] = "inf";
      else j[c] = parse_number(v);
    } else {
      j[c] = v;
    }
  }
  return j;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_escape(fields[i]);
  }
  return line;
}

/// RFC 4180 parser: quoted fields may contain commas, doubled quotes and
/// newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    any = true;
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += ch;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// A results table read back from CSV.
struct LogTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParameterError("unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline LogTable read_log_csv(const std::filesystem::path& path) {
  LogTable t;
  if (!std::filesystem::exists(path)) return t;
  const auto bytes = io_detail::read_file(path);
  auto rows = parse_csv(std::string_view(bytes.data(), bytes.size()));
  if (rows.empty()) return t;
  t.header = std::move(rows.front());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != t.header.size()) {
      throw FormatError(path.string() + ": row " + std::to_string(i) + " has " +
                        std::to_string(rows[i].size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(rows[i]));
  }
  return t;
}

inline std::filesystem::path jsonl_sibling(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".jsonl");
  return p;
}

/// Appends one record to `csv_path` (writing the header first if the file is
/// new) and mirrors it as a JSON line in the sibling .jsonl file. Callers that
/// share a log across threads go through RecordLog.
inline void append_record(const ExperimentRecord& record, const std::filesystem::path& csv_path) {
  validate(record);
  const std::string header = csv_line(record_columns());
  bool need_header = true;
  if (std::filesystem::exists(csv_path) && std::filesystem::file_size(csv_path) > 0) {
    std::ifstream in(csv_path);
    std::string first;
    std::getline(in, first);
    if (!first.empty() && first.back() == '\r') first.pop_back();
    if (first != header) throw FormatError(csv_path.string() + ": schema drift, existing header differs");
    need_header = false;
  }
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  {
    std::ofstream out(csv_path, std::ios::app);
    if (!out) throw IoError("cannot append to " + csv_path.string());
    if (need_header) out << header << '\n';
    out << csv_line(record_fields(record)) << '\n';
    if (!out) throw IoError("write failed for " + csv_path.string());
  }
  std::ofstream js(jsonl_sibling(csv_path), std::ios::app);
  if (!js) throw IoError("cannot append to " + jsonl_sibling(csv_path).string());
  js << record_to_json(record).dump() << '\n';
}

/// Serializes appends from concurrent workers onto one log.
class RecordLog {
 public:
  explicit RecordLog(std::filesystem::path csv_path) : path_(std::move(csv_path)) {}

  void append(const ExperimentRecord& record) {
    std::lock_guard lock(mutex_);
    append_record(record, path_);
  }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

}  // namespace hyperbench
