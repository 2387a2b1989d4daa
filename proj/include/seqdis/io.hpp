#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "seqdis/common.hpp"

namespace seqdis::io {

// ---------------------------------------------------------------------------
// Checked little-endian binary primitives. Every read throws IoError on a
// short file, so truncation surfaces as an explicit error instead of garbage.
// ---------------------------------------------------------------------------

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open for writing: " + path);
  }

  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed");
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void mat(const Mat& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    // row-major payload, written in one call
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    bytes(rm.data(), sizeof(double) * static_cast<size_t>(rm.size()));
  }
  void veci(const VecI& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (long i = 0; i < v.size(); ++i) {
      std::int64_t x = v[i];
      i64(x);
    }
  }

 private:
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open: " + path);
  }

  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw IoError("truncated or corrupt file (short read)");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::string str(std::uint64_t max_len = (1ull << 32)) {
    const std::uint64_t n = u64();
    if (n > max_len) throw IoError("corrupt file (implausible string length)");
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }
  Mat mat() {
    const std::uint64_t r = u64(), c = u64();
    if (r > (1ull << 32) || c > (1ull << 32)) throw IoError("corrupt file (matrix shape)");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
        static_cast<long>(r), static_cast<long>(c));
    if (rm.size()) bytes(rm.data(), sizeof(double) * static_cast<size_t>(rm.size()));
    return rm;
  }
  VecI veci() {
    const std::uint64_t n = u64();
    if (n > (1ull << 32)) throw IoError("corrupt file (vector length)");
    VecI v(static_cast<long>(n));
    for (long i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i64());
    return v;
  }
  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::ifstream in_;
};

// ---------------------------------------------------------------------------
// Declarative key = value configuration files. '#' starts a comment. Keys are
// dotted (section.key). Parsing preserves nothing but key/value pairs; the
// caller validates against its known-key table.
// ---------------------------------------------------------------------------

struct KvFile {
  std::map<std::string, std::string> values;

  bool has(const std::string& k) const { return values.count(k) > 0; }

  const std::string& get(const std::string& k) const {
    auto it = values.find(k);
    if (it == values.end()) throw ConfigError("missing config key: " + k);
    return it->second;
  }

  std::string get_or(const std::string& k, const std::string& dflt) const {
    auto it = values.find(k);
    return it == values.end() ? dflt : it->second;
  }

  static KvFile parse_text(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      kv.values[key] = val;
    }
    return kv;
  }

  static KvFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
  }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : values) out += k + " = " + v + "\n";
    return out;
  }
};

inline double parse_double(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not a number: " + s);
  }
}

inline long parse_int(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not an integer: " + s);
  }
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("key '" + key + "': not a boolean: " + s);
}

// %.17g round-trips doubles exactly; used everywhere a logged value must be
// bitwise reproducible.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Simple lossless image output (binary PPM). frame: (C,H,W) flattened row
// vector with values in [0,1]; 1-channel input is broadcast to gray.
// ---------------------------------------------------------------------------

inline void write_ppm(const std::string& path, const std::vector<Mat>& grid_rows, int channels,
                      int height, int width, int gap = 2) {
  require(!grid_rows.empty(), "write_ppm: empty grid");
  const int cols = static_cast<int>(grid_rows[0].rows());  // frames per row
  for (const auto& r : grid_rows)
    require(r.rows() == cols && r.cols() == static_cast<long>(channels) * height * width,
            "write_ppm: inconsistent grid");
  const int rows = static_cast<int>(grid_rows.size());
  const int W = cols * width + (cols - 1) * gap;
  const int H = rows * height + (rows - 1) * gap;

  std::vector<unsigned char> img(static_cast<size_t>(3) * W * H, 40);  // dark gap color
  auto put = [&](int y, int x, int ch, double v) {
    v = std::min(1.0, std::max(0.0, v));
    img[(static_cast<size_t>(y) * W + x) * 3 + ch] = static_cast<unsigned char>(v * 255.0 + 0.5);
  };
  for (int gr = 0; gr < rows; ++gr)
    for (int gc = 0; gc < cols; ++gc) {
      const int oy = gr * (height + gap), ox = gc * (width + gap);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          for (int ch = 0; ch < 3; ++ch) {
            const int src_ch = channels == 1 ? 0 : ch;
            put(oy + y, ox + x, ch,
                grid_rows[gr](gc, (static_cast<long>(src_ch) * height + y) * width + x));
          }
    }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P6\n" << W << " " << H << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace seqdis::io
