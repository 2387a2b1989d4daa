#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace seqdis {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecI = Eigen::VectorXi;

// ---------------------------------------------------------------------------
// Error taxonomy. Contract violations are caller bugs, numeric errors are
// bad data, io errors are environment problems. The trainer additionally
// throws TrainingDivergence when a loss term turns non-finite.
// ---------------------------------------------------------------------------

class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& term, double value)
      : std::runtime_error("non-finite loss term '" + term + "' = " + std::to_string(value)),
        term_(term) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

// ---------------------------------------------------------------------------
// Seeding. Every random decision in the library is driven by an explicit
// 64-bit seed; sub-streams are derived by mixing words into the base seed so
// that resuming a run never has to serialize generator internals.
// ---------------------------------------------------------------------------

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t w : words) s = splitmix64(s ^ (w + 0x9e3779b97f4a7c15ull));
  return s;
}

// Short string tags for stream separation ("init", "shuffle", ...).
constexpr std::uint64_t tag_hash(const char* s) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  while (*s) {
    h ^= static_cast<std::uint64_t>(*s++);
    h *= 1099511628211ull;
  }
  return h;
}

// Deterministic generator. Normal draws use the cosine Box-Muller branch so
// each draw consumes exactly two engine words; no hidden distribution state
// survives between calls (std::normal_distribution caches a spare value,
// which would break checkpoint round-trips).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // [0, n)
  int uniform_int(int n) {
    int v = static_cast<int>(uniform() * n);
    return v < n ? v : n - 1;
  }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Mat normal_mat(int rows, int cols) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = normal();
    return m;
  }

  // Partial Fisher-Yates: k distinct values from items, order random.
  std::vector<int> sample_without_replacement(std::vector<int> items, int k) {
    require(k >= 0 && k <= static_cast<int>(items.size()),
            "sample_without_replacement: k out of range");
    for (int i = 0; i < k; ++i) {
      int j = i + uniform_int(static_cast<int>(items.size()) - i);
      std::swap(items[i], items[j]);
    }
    items.resize(k);
    return items;
  }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Rate-limited warnings (used by the log-variance clamp).
// ---------------------------------------------------------------------------

inline std::uint64_t& log_var_clamp_count() {
  static std::uint64_t count = 0;
  return count;
}

inline void note_log_var_clamp() {
  std::uint64_t& c = log_var_clamp_count();
  if (c == 0 || c % 100000 == 0)
    std::fprintf(stderr, "[seqdis] warning: log-variance clamped to [-20, 20] (occurrence %llu)\n",
                 static_cast<unsigned long long>(c + 1));
  ++c;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace seqdis
