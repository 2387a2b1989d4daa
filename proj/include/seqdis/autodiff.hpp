#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "seqdis/common.hpp"

// Reverse-mode autodiff over Eigen matrices. Each op returns a shared node
// holding the value and a backward closure; backward() walks the graph in
// reverse topological order from a scalar root. Values follow a rows = batch,
// cols = features convention; image tensors are flattened per row in
// (channel, y, x) order with explicit shape arguments on the conv ops.

namespace seqdis::ad {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Mat v;  // value
  Mat g;  // gradient, allocated lazily
  bool rg = false;
  std::vector<Var> parents;
  std::function<void()> bp;
};

inline bool& grad_enabled() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
};

inline Var leaf(Mat v) {
  auto n = std::make_shared<Node>();
  n->v = std::move(v);
  n->rg = true;
  return n;
}

inline Var constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->v = std::move(v);
  return n;
}

inline Var scalar(double x) { return constant(Mat::Constant(1, 1, x)); }

inline Mat& grad_of(const Var& n) {
  if (n->g.size() == 0) n->g = Mat::Zero(n->v.rows(), n->v.cols());
  return n->g;
}

namespace detail {

inline bool track(const std::vector<Var>& ps) {
  if (!grad_enabled()) return false;
  for (const auto& p : ps)
    if (p->rg) return true;
  return false;
}

inline Var make(Mat v, std::vector<Var> ps, std::function<void()> bp) {
  auto n = std::make_shared<Node>();
  n->v = std::move(v);
  if (track(ps)) {
    n->rg = true;
    n->parents = std::move(ps);
    n->bp = std::move(bp);
  }
  return n;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Elementwise and scalar ops
// --------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  require(a->v.rows() == b->v.rows() && a->v.cols() == b->v.cols(), "add: shape mismatch");
  auto n = std::make_shared<Node>();
  n->v = a->v + b->v;
  if (detail::track({a, b})) {
    n->rg = true;
    n->parents = {a, b};
    Node* self = n.get();
    n->bp = [self, a, b] {
      if (a->rg) grad_of(a) += self->g;
      if (b->rg) grad_of(b) += self->g;
    };
  }
  return n;
}

inline Var sub(const Var& a, const Var& b) {
  require(a->v.rows() == b->v.rows() && a->v.cols() == b->v.cols(), "sub: shape mismatch");
  auto n = std::make_shared<Node>();
  n->v = a->v - b->v;
  if (detail::track({a, b})) {
    n->rg = true;
    n->parents = {a, b};
    Node* self = n.get();
    n->bp = [self, a, b] {
      if (a->rg) grad_of(a) += self->g;
      if (b->rg) grad_of(b) -= self->g;
    };
  }
  return n;
}

inline Var mul(const Var& a, const Var& b) {
  require(a->v.rows() == b->v.rows() && a->v.cols() == b->v.cols(), "mul: shape mismatch");
  auto n = std::make_shared<Node>();
  n->v = a->v.cwiseProduct(b->v);
  if (detail::track({a, b})) {
    n->rg = true;
    n->parents = {a, b};
    Node* self = n.get();
    n->bp = [self, a, b] {
      if (a->rg) grad_of(a) += self->g.cwiseProduct(b->v);
      if (b->rg) grad_of(b) += self->g.cwiseProduct(a->v);
    };
  }
  return n;
}

inline Var cdiv(const Var& a, const Var& b) {
  require(a->v.rows() == b->v.rows() && a->v.cols() == b->v.cols(), "cdiv: shape mismatch");
  auto n = std::make_shared<Node>();
  n->v = a->v.cwiseQuotient(b->v);
  if (detail::track({a, b})) {
    n->rg = true;
    n->parents = {a, b};
    Node* self = n.get();
    n->bp = [self, a, b] {
      if (a->rg) grad_of(a) += self->g.cwiseQuotient(b->v);
      if (b->rg)
        grad_of(b) -= self->g.cwiseProduct(a->v).cwiseQuotient(b->v.cwiseProduct(b->v));
    };
  }
  return n;
}

inline Var scale(const Var& a, double s) {
  auto n = std::make_shared<Node>();
  n->v = a->v * s;
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a, s] { grad_of(a) += self->g * s; };
  }
  return n;
}

inline Var add_scalar(const Var& a, double s) {
  auto n = std::make_shared<Node>();
  n->v = a->v.array() + s;
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a] { grad_of(a) += self->g; };
  }
  return n;
}

#define SEQDIS_UNARY_OP(NAME, FWD, BWD)                       \
  inline Var NAME(const Var& a) {                             \
    auto n = std::make_shared<Node>();                        \
    n->v = (FWD);                                             \
    if (detail::track({a})) {                                 \
      n->rg = true;                                           \
      n->parents = {a};                                       \
      Node* self = n.get();                                   \
      n->bp = [self, a] { grad_of(a).array() += (BWD); };     \
    }                                                         \
    return n;                                                 \
  }

SEQDIS_UNARY_OP(exp_, a->v.array().exp().matrix(), self->g.array() * self->v.array())
SEQDIS_UNARY_OP(log_, a->v.array().log().matrix(), self->g.array() / a->v.array())
SEQDIS_UNARY_OP(sigmoid, (1.0 / (1.0 + (-a->v.array()).exp())).matrix(),
                self->g.array() * self->v.array() * (1.0 - self->v.array()))
SEQDIS_UNARY_OP(tanh_, a->v.array().tanh().matrix(),
                self->g.array() * (1.0 - self->v.array().square()))
SEQDIS_UNARY_OP(square, a->v.array().square().matrix(),
                self->g.array() * 2.0 * a->v.array())
SEQDIS_UNARY_OP(sqrt_, a->v.array().sqrt().matrix(),
                self->g.array() * 0.5 / self->v.array())

#undef SEQDIS_UNARY_OP

inline Var leaky_relu(const Var& a, double alpha = 0.2) {
  auto n = std::make_shared<Node>();
  n->v = a->v.array().max(a->v.array() * alpha).matrix();
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a, alpha] {
      grad_of(a).array() +=
          self->g.array() * (a->v.array() > 0.0).select(Mat::Ones(a->v.rows(), a->v.cols()),
                                                        Mat::Constant(a->v.rows(), a->v.cols(), alpha)).array();
    };
  }
  return n;
}

inline Var relu(const Var& a) {
  auto n = std::make_shared<Node>();
  n->v = a->v.array().max(0.0).matrix();
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a] {
      grad_of(a).array() += self->g.array() * (a->v.array() > 0.0).cast<double>();
    };
  }
  return n;
}

// --------------------------------------------------------------------------
// Linear algebra
// --------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  require(a->v.cols() == b->v.rows(), "matmul: inner dimension mismatch");
  auto n = std::make_shared<Node>();
  n->v = a->v * b->v;
  if (detail::track({a, b})) {
    n->rg = true;
    n->parents = {a, b};
    Node* self = n.get();
    n->bp = [self, a, b] {
      if (a->rg) grad_of(a) += self->g * b->v.transpose();
      if (b->rg) grad_of(b) += a->v.transpose() * self->g;
    };
  }
  return n;
}

// a * b^T
inline Var matmul_nt(const Var& a, const Var& b) {
  require(a->v.cols() == b->v.cols(), "matmul_nt: inner dimension mismatch");
  auto n = std::make_shared<Node>();
  n->v = a->v * b->v.transpose();
  if (detail::track({a, b})) {
    n->rg = true;
    n->parents = {a, b};
    Node* self = n.get();
    n->bp = [self, a, b] {
      if (a->rg) grad_of(a) += self->g * b->v;
      if (b->rg) grad_of(b) += self->g.transpose() * a->v;
    };
  }
  return n;
}

// Broadcast a 1 x c row (bias) over every row of a.
inline Var rowwise_add(const Var& a, const Var& bias) {
  require(bias->v.rows() == 1 && bias->v.cols() == a->v.cols(), "rowwise_add: bad bias shape");
  auto n = std::make_shared<Node>();
  n->v = a->v.rowwise() + bias->v.row(0);
  if (detail::track({a, bias})) {
    n->rg = true;
    n->parents = {a, bias};
    Node* self = n.get();
    n->bp = [self, a, bias] {
      if (a->rg) grad_of(a) += self->g;
      if (bias->rg) grad_of(bias) += self->g.colwise().sum();
    };
  }
  return n;
}

// Scale row i of a by s(i, 0).
inline Var colwise_scale(const Var& a, const Var& s) {
  require(s->v.cols() == 1 && s->v.rows() == a->v.rows(), "colwise_scale: bad scale shape");
  auto n = std::make_shared<Node>();
  n->v = a->v.array().colwise() * s->v.col(0).array();
  if (detail::track({a, s})) {
    n->rg = true;
    n->parents = {a, s};
    Node* self = n.get();
    n->bp = [self, a, s] {
      if (a->rg) grad_of(a).array() += self->g.array().colwise() * s->v.col(0).array();
      if (s->rg)
        grad_of(s).col(0).array() += (self->g.array() * a->v.array()).rowwise().sum();
    };
  }
  return n;
}

// --------------------------------------------------------------------------
// Reductions
// --------------------------------------------------------------------------

inline Var sum_all(const Var& a) {
  auto n = std::make_shared<Node>();
  n->v = Mat::Constant(1, 1, a->v.sum());
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a] { grad_of(a).array() += self->g(0, 0); };
  }
  return n;
}

inline Var mean_all(const Var& a) { return scale(sum_all(a), 1.0 / double(a->v.size())); }

inline Var row_sum(const Var& a) {  // n x c -> n x 1
  auto n = std::make_shared<Node>();
  n->v = a->v.rowwise().sum();
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a] { grad_of(a).colwise() += self->g.col(0); };
  }
  return n;
}

inline Var col_sum(const Var& a) {  // n x c -> 1 x c
  auto n = std::make_shared<Node>();
  n->v = a->v.colwise().sum();
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a] { grad_of(a).rowwise() += self->g.row(0); };
  }
  return n;
}

inline Var logsumexp_rows(const Var& a) {  // n x c -> n x 1, max-shifted
  auto n = std::make_shared<Node>();
  Vec mx = a->v.rowwise().maxCoeff();
  n->v = mx + ((a->v.colwise() - mx).array().exp().rowwise().sum()).log().matrix();
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a] {
      Mat soft = (a->v.colwise() - self->v.col(0)).array().exp();
      grad_of(a).array() += soft.array().colwise() * self->g.col(0).array();
    };
  }
  return n;
}

// --------------------------------------------------------------------------
// Shape ops
// --------------------------------------------------------------------------

inline Var slice_cols(const Var& a, int c0, int len) {
  require(c0 >= 0 && len >= 0 && c0 + len <= a->v.cols(), "slice_cols: out of range");
  auto n = std::make_shared<Node>();
  n->v = a->v.middleCols(c0, len);
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a, c0, len] { grad_of(a).middleCols(c0, len) += self->g; };
  }
  return n;
}

inline Var slice_rows(const Var& a, int r0, int len) {
  require(r0 >= 0 && len >= 0 && r0 + len <= a->v.rows(), "slice_rows: out of range");
  auto n = std::make_shared<Node>();
  n->v = a->v.middleRows(r0, len);
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a, r0, len] { grad_of(a).middleRows(r0, len) += self->g; };
  }
  return n;
}

inline Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: empty");
  long rows = parts[0]->v.rows(), cols = 0;
  for (const auto& p : parts) {
    require(p->v.rows() == rows, "concat_cols: row mismatch");
    cols += p->v.cols();
  }
  auto n = std::make_shared<Node>();
  n->v.resize(rows, cols);
  long at = 0;
  for (const auto& p : parts) {
    n->v.middleCols(at, p->v.cols()) = p->v;
    at += p->v.cols();
  }
  if (detail::track(parts)) {
    n->rg = true;
    n->parents = parts;
    Node* self = n.get();
    n->bp = [self, parts] {
      long at2 = 0;
      for (const auto& p : parts) {
        if (p->rg) grad_of(p) += self->g.middleCols(at2, p->v.cols());
        at2 += p->v.cols();
      }
    };
  }
  return n;
}

inline Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: empty");
  long cols = parts[0]->v.cols(), rows = 0;
  for (const auto& p : parts) {
    require(p->v.cols() == cols, "concat_rows: col mismatch");
    rows += p->v.rows();
  }
  auto n = std::make_shared<Node>();
  n->v.resize(rows, cols);
  long at = 0;
  for (const auto& p : parts) {
    n->v.middleRows(at, p->v.rows()) = p->v;
    at += p->v.rows();
  }
  if (detail::track(parts)) {
    n->rg = true;
    n->parents = parts;
    Node* self = n.get();
    n->bp = [self, parts] {
      long at2 = 0;
      for (const auto& p : parts) {
        if (p->rg) grad_of(p) += self->g.middleRows(at2, p->v.rows());
        at2 += p->v.rows();
      }
    };
  }
  return n;
}

// Y.row(r) = a.row(idx[r]). Indices may repeat; backward accumulates.
inline Var gather_rows(const Var& a, std::vector<int> idx) {
  auto n = std::make_shared<Node>();
  n->v.resize(static_cast<long>(idx.size()), a->v.cols());
  for (size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && idx[r] < a->v.rows(), "gather_rows: index out of range");
    n->v.row(static_cast<long>(r)) = a->v.row(idx[r]);
  }
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a, idx = std::move(idx)] {
      for (size_t r = 0; r < idx.size(); ++r)
        grad_of(a).row(idx[r]) += self->g.row(static_cast<long>(r));
    };
  }
  return n;
}

// (n x g*c) -> (n*g x c); row i's group t becomes row i*g + t.
inline Var split_rows(const Var& a, int groups) {
  require(a->v.cols() % groups == 0, "split_rows: cols not divisible by groups");
  const long n0 = a->v.rows();
  const long c = a->v.cols() / groups;
  auto n = std::make_shared<Node>();
  n->v.resize(n0 * groups, c);
  for (long i = 0; i < n0; ++i)
    for (int t = 0; t < groups; ++t) n->v.row(i * groups + t) = a->v.row(i).segment(t * c, c);
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a, groups, c] {
      for (long i = 0; i < a->v.rows(); ++i)
        for (int t = 0; t < groups; ++t)
          grad_of(a).row(i).segment(t * c, c) += self->g.row(i * groups + t);
    };
  }
  return n;
}

// Inverse of split_rows: (n*g x c) -> (n x g*c).
inline Var merge_rows(const Var& a, int groups) {
  require(a->v.rows() % groups == 0, "merge_rows: rows not divisible by groups");
  const long n0 = a->v.rows() / groups;
  const long c = a->v.cols();
  auto n = std::make_shared<Node>();
  n->v.resize(n0, groups * c);
  for (long i = 0; i < n0; ++i)
    for (int t = 0; t < groups; ++t) n->v.row(i).segment(t * c, c) = a->v.row(i * groups + t);
  if (detail::track({a})) {
    n->rg = true;
    n->parents = {a};
    Node* self = n.get();
    n->bp = [self, a, groups, c, n0] {
      for (long i = 0; i < n0; ++i)
        for (int t = 0; t < groups; ++t)
          grad_of(a).row(i * groups + t) += self->g.row(i).segment(t * c, c);
    };
  }
  return n;
}

// --------------------------------------------------------------------------
// Convolutions. Frames are flattened rows in (channel, y, x) order.
// --------------------------------------------------------------------------

struct ConvDims {
  int in_c, in_h, in_w;
  int out_c, k, stride, pad;
  int out_h() const { return (in_h + 2 * pad - k) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - k) / stride + 1; }
  // transposed-conv output size
  int tr_h() const { return (in_h - 1) * stride - 2 * pad + k; }
  int tr_w() const { return (in_w - 1) * stride - 2 * pad + k; }
};

namespace detail {

inline Mat im2col(const Mat& x, const ConvDims& d) {
  const long n = x.rows();
  const int oh = d.out_h(), ow = d.out_w();
  Mat p(n * oh * ow, d.in_c * d.k * d.k);
  for (long i = 0; i < n; ++i)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const long r = (i * oh + oy) * ow + ox;
        for (int ci = 0; ci < d.in_c; ++ci)
          for (int ky = 0; ky < d.k; ++ky) {
            const int iy = oy * d.stride - d.pad + ky;
            for (int kx = 0; kx < d.k; ++kx) {
              const int ix = ox * d.stride - d.pad + kx;
              const long col = (static_cast<long>(ci) * d.k + ky) * d.k + kx;
              p(r, col) = (iy >= 0 && iy < d.in_h && ix >= 0 && ix < d.in_w)
                              ? x(i, (static_cast<long>(ci) * d.in_h + iy) * d.in_w + ix)
                              : 0.0;
            }
          }
      }
  return p;
}

}  // namespace detail

// x: (N, in_c*in_h*in_w), w: (out_c, in_c*k*k), b: (1, out_c)
inline Var conv2d(const Var& x, const Var& w, const Var& b, const ConvDims& d) {
  require(x->v.cols() == static_cast<long>(d.in_c) * d.in_h * d.in_w, "conv2d: bad input width");
  require(w->v.rows() == d.out_c && w->v.cols() == static_cast<long>(d.in_c) * d.k * d.k,
          "conv2d: bad weight shape");
  require(b->v.rows() == 1 && b->v.cols() == d.out_c, "conv2d: bad bias shape");
  const long n = x->v.rows();
  const int oh = d.out_h(), ow = d.out_w();

  auto patches = std::make_shared<Mat>(detail::im2col(x->v, d));
  Mat y2 = *patches * w->v.transpose();  // (n*oh*ow, out_c)
  auto node = std::make_shared<Node>();
  node->v.resize(n, static_cast<long>(d.out_c) * oh * ow);
  for (long i = 0; i < n; ++i)
    for (int co = 0; co < d.out_c; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          node->v(i, (static_cast<long>(co) * oh + oy) * ow + ox) =
              y2((i * oh + oy) * ow + ox, co) + b->v(0, co);

  if (detail::track({x, w, b})) {
    node->rg = true;
    node->parents = {x, w, b};
    Node* self = node.get();
    node->bp = [self, x, w, b, d, patches] {
      const long n2 = x->v.rows();
      const int oh2 = d.out_h(), ow2 = d.out_w();
      Mat dy2(n2 * oh2 * ow2, d.out_c);
      for (long i = 0; i < n2; ++i)
        for (int co = 0; co < d.out_c; ++co)
          for (int oy = 0; oy < oh2; ++oy)
            for (int ox = 0; ox < ow2; ++ox)
              dy2((i * oh2 + oy) * ow2 + ox, co) =
                  self->g(i, (static_cast<long>(co) * oh2 + oy) * ow2 + ox);
      if (b->rg) grad_of(b) += dy2.colwise().sum();
      if (w->rg) grad_of(w) += dy2.transpose() * *patches;
      if (x->rg) {
        Mat dp = dy2 * w->v;  // (n*oh*ow, in_c*k*k)
        Mat& gx = grad_of(x);
        for (long i = 0; i < n2; ++i)
          for (int oy = 0; oy < oh2; ++oy)
            for (int ox = 0; ox < ow2; ++ox) {
              const long r = (i * oh2 + oy) * ow2 + ox;
              for (int ci = 0; ci < d.in_c; ++ci)
                for (int ky = 0; ky < d.k; ++ky) {
                  const int iy = oy * d.stride - d.pad + ky;
                  if (iy < 0 || iy >= d.in_h) continue;
                  for (int kx = 0; kx < d.k; ++kx) {
                    const int ix = ox * d.stride - d.pad + kx;
                    if (ix < 0 || ix >= d.in_w) continue;
                    gx(i, (static_cast<long>(ci) * d.in_h + iy) * d.in_w + ix) +=
                        dp(r, (static_cast<long>(ci) * d.k + ky) * d.k + kx);
                  }
                }
            }
      }
    };
  }
  return node;
}

// Transposed convolution. x: (N, in_c*in_h*in_w), w: (in_c, out_c*k*k),
// b: (1, out_c); output (N, out_c*tr_h*tr_w).
inline Var conv2d_transpose(const Var& x, const Var& w, const Var& b, const ConvDims& d) {
  require(x->v.cols() == static_cast<long>(d.in_c) * d.in_h * d.in_w,
          "conv2d_transpose: bad input width");
  require(w->v.rows() == d.in_c && w->v.cols() == static_cast<long>(d.out_c) * d.k * d.k,
          "conv2d_transpose: bad weight shape");
  require(b->v.rows() == 1 && b->v.cols() == d.out_c, "conv2d_transpose: bad bias shape");
  const long n = x->v.rows();
  const int oh = d.tr_h(), ow = d.tr_w();

  // Gather input as (n*in_h*in_w, in_c), multiply into kernel space, scatter.
  Mat x2(n * d.in_h * d.in_w, d.in_c);
  for (long i = 0; i < n; ++i)
    for (int iy = 0; iy < d.in_h; ++iy)
      for (int ix = 0; ix < d.in_w; ++ix)
        for (int ci = 0; ci < d.in_c; ++ci)
          x2((i * d.in_h + iy) * d.in_w + ix, ci) =
              x->v(i, (static_cast<long>(ci) * d.in_h + iy) * d.in_w + ix);
  Mat gmat = x2 * w->v;  // (n*in_h*in_w, out_c*k*k)

  auto node = std::make_shared<Node>();
  node->v.resize(n, static_cast<long>(d.out_c) * oh * ow);
  for (long i = 0; i < n; ++i)
    for (int co = 0; co < d.out_c; ++co)
      node->v.row(i).segment(static_cast<long>(co) * oh * ow, oh * ow).setConstant(b->v(0, co));
  for (long i = 0; i < n; ++i)
    for (int iy = 0; iy < d.in_h; ++iy)
      for (int ix = 0; ix < d.in_w; ++ix) {
        const long r = (i * d.in_h + iy) * d.in_w + ix;
        for (int co = 0; co < d.out_c; ++co)
          for (int ky = 0; ky < d.k; ++ky) {
            const int oy = iy * d.stride - d.pad + ky;
            if (oy < 0 || oy >= oh) continue;
            for (int kx = 0; kx < d.k; ++kx) {
              const int ox = ix * d.stride - d.pad + kx;
              if (ox < 0 || ox >= ow) continue;
              node->v(i, (static_cast<long>(co) * oh + oy) * ow + ox) +=
                  gmat(r, (static_cast<long>(co) * d.k + ky) * d.k + kx);
            }
          }
      }

  if (detail::track({x, w, b})) {
    node->rg = true;
    node->parents = {x, w, b};
    Node* self = node.get();
    node->bp = [self, x, w, b, d] {
      const long n2 = x->v.rows();
      const int oh2 = d.tr_h(), ow2 = d.tr_w();
      Mat dg(n2 * d.in_h * d.in_w, static_cast<long>(d.out_c) * d.k * d.k);
      dg.setZero();
      for (long i = 0; i < n2; ++i)
        for (int iy = 0; iy < d.in_h; ++iy)
          for (int ix = 0; ix < d.in_w; ++ix) {
            const long r = (i * d.in_h + iy) * d.in_w + ix;
            for (int co = 0; co < d.out_c; ++co)
              for (int ky = 0; ky < d.k; ++ky) {
                const int oy = iy * d.stride - d.pad + ky;
                if (oy < 0 || oy >= oh2) continue;
                for (int kx = 0; kx < d.k; ++kx) {
                  const int ox = ix * d.stride - d.pad + kx;
                  if (ox < 0 || ox >= ow2) continue;
                  dg(r, (static_cast<long>(co) * d.k + ky) * d.k + kx) =
                      self->g(i, (static_cast<long>(co) * oh2 + oy) * ow2 + ox);
                }
              }
          }
      if (b->rg) {
        for (int co = 0; co < d.out_c; ++co) {
          double acc = 0.0;
          for (long i = 0; i < n2; ++i)
            acc += self->g.row(i).segment(static_cast<long>(co) * oh2 * ow2, oh2 * ow2).sum();
          grad_of(b)(0, co) += acc;
        }
      }
      if (w->rg || x->rg) {
        Mat x2b(n2 * d.in_h * d.in_w, d.in_c);
        for (long i = 0; i < n2; ++i)
          for (int iy = 0; iy < d.in_h; ++iy)
            for (int ix = 0; ix < d.in_w; ++ix)
              for (int ci = 0; ci < d.in_c; ++ci)
                x2b((i * d.in_h + iy) * d.in_w + ix, ci) =
                    x->v(i, (static_cast<long>(ci) * d.in_h + iy) * d.in_w + ix);
        if (w->rg) grad_of(w) += x2b.transpose() * dg;
        if (x->rg) {
          Mat dx2 = dg * w->v.transpose();  // (n*in_h*in_w, in_c)
          Mat& gx = grad_of(x);
          for (long i = 0; i < n2; ++i)
            for (int iy = 0; iy < d.in_h; ++iy)
              for (int ix = 0; ix < d.in_w; ++ix)
                for (int ci = 0; ci < d.in_c; ++ci)
                  gx(i, (static_cast<long>(ci) * d.in_h + iy) * d.in_w + ix) +=
                      dx2((i * d.in_h + iy) * d.in_w + ix, ci);
        }
      }
    };
  }
  return node;
}

// --------------------------------------------------------------------------
// Backward pass
// --------------------------------------------------------------------------

inline void backward(const Var& root) {
  require(root->v.rows() == 1 && root->v.cols() == 1, "backward: root must be a scalar");
  require(root->rg, "backward: root does not require grad");

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* n;
    size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->rg && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  root->g = Mat::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->bp) (*it)->bp();
}

inline void zero_grad(const std::vector<Var>& params) {
  for (const auto& p : params) p->g.resize(0, 0);
}

}  // namespace seqdis::ad
