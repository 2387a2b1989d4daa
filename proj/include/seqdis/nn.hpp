#pragma once

#include <string>
#include <utility>
#include <vector>

#include "seqdis/autodiff.hpp"

namespace seqdis::nn {

using ad::Var;

// Ordered name -> tensor registry; the order defines the optimizer and
// checkpoint layout, so modules must always register in construction order.
using ParamMap = std::vector<std::pair<std::string, Var>>;

inline Mat xavier_uniform(Rng& rng, int rows, int cols, int fan_in, int fan_out) {
  const double a = std::sqrt(6.0 / double(fan_in + fan_out));
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = a * (2.0 * rng.uniform() - 1.0);
  return m;
}

struct Linear {
  Var w, b;  // (in, out), (1, out)

  Linear() = default;
  Linear(int in, int out, Rng& rng)
      : w(ad::leaf(xavier_uniform(rng, in, out, in, out))), b(ad::leaf(Mat::Zero(1, out))) {}

  Var operator()(const Var& x) const { return ad::rowwise_add(ad::matmul(x, w), b); }

  void collect(const std::string& prefix, ParamMap& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

struct Conv2d {
  ad::ConvDims dims{};
  Var w, b;

  Conv2d() = default;
  Conv2d(ad::ConvDims d, Rng& rng) : dims(d) {
    const int fan_in = d.in_c * d.k * d.k;
    const int fan_out = d.out_c * d.k * d.k;
    w = ad::leaf(xavier_uniform(rng, d.out_c, d.in_c * d.k * d.k, fan_in, fan_out));
    b = ad::leaf(Mat::Zero(1, d.out_c));
  }

  Var operator()(const Var& x) const { return ad::conv2d(x, w, b, dims); }

  void collect(const std::string& prefix, ParamMap& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

struct ConvT2d {
  ad::ConvDims dims{};
  Var w, b;

  ConvT2d() = default;
  ConvT2d(ad::ConvDims d, Rng& rng) : dims(d) {
    const int fan_in = d.in_c * d.k * d.k;
    const int fan_out = d.out_c * d.k * d.k;
    w = ad::leaf(xavier_uniform(rng, d.in_c, d.out_c * d.k * d.k, fan_in, fan_out));
    b = ad::leaf(Mat::Zero(1, d.out_c));
  }

  Var operator()(const Var& x) const { return ad::conv2d_transpose(x, w, b, dims); }

  void collect(const std::string& prefix, ParamMap& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

// Gate order: input, forget, cell, output. Forget bias starts at 1.
struct LstmCell {
  int input = 0, hidden = 0;
  Var wx, wh, b;

  LstmCell() = default;
  LstmCell(int in, int hid, Rng& rng) : input(in), hidden(hid) {
    wx = ad::leaf(xavier_uniform(rng, in, 4 * hid, in, hid));
    wh = ad::leaf(xavier_uniform(rng, hid, 4 * hid, hid, hid));
    Mat bias = Mat::Zero(1, 4 * hid);
    bias.middleCols(hidden, hidden).setConstant(1.0);
    b = ad::leaf(bias);
  }

  struct State {
    Var h, c;
  };

  State zero_state(int rows) const {
    return {ad::constant(Mat::Zero(rows, hidden)), ad::constant(Mat::Zero(rows, hidden))};
  }

  State step(const Var& x, const State& s) const {
    Var gates = ad::rowwise_add(ad::add(ad::matmul(x, wx), ad::matmul(s.h, wh)), b);
    Var i = ad::sigmoid(ad::slice_cols(gates, 0, hidden));
    Var f = ad::sigmoid(ad::slice_cols(gates, hidden, hidden));
    Var g = ad::tanh_(ad::slice_cols(gates, 2 * hidden, hidden));
    Var o = ad::sigmoid(ad::slice_cols(gates, 3 * hidden, hidden));
    Var c1 = ad::add(ad::mul(f, s.c), ad::mul(i, g));
    Var h1 = ad::mul(o, ad::tanh_(c1));
    return {h1, c1};
  }

  void collect(const std::string& prefix, ParamMap& out) const {
    out.emplace_back(prefix + ".wx", wx);
    out.emplace_back(prefix + ".wh", wh);
    out.emplace_back(prefix + ".b", b);
  }
};

struct RnnCell {
  int input = 0, hidden = 0;
  Var wx, wh, b;

  RnnCell() = default;
  RnnCell(int in, int hid, Rng& rng) : input(in), hidden(hid) {
    wx = ad::leaf(xavier_uniform(rng, in, hid, in, hid));
    wh = ad::leaf(xavier_uniform(rng, hid, hid, hid, hid));
    b = ad::leaf(Mat::Zero(1, hid));
  }

  Var zero_state(int rows) const { return ad::constant(Mat::Zero(rows, hidden)); }

  Var step(const Var& x, const Var& h) const {
    return ad::tanh_(ad::rowwise_add(ad::add(ad::matmul(x, wx), ad::matmul(h, wh)), b));
  }

  void collect(const std::string& prefix, ParamMap& out) const {
    out.emplace_back(prefix + ".wx", wx);
    out.emplace_back(prefix + ".wh", wh);
    out.emplace_back(prefix + ".b", b);
  }
};

}  // namespace seqdis::nn
