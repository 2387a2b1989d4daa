#pragma once

#include <vector>

#include "seqdis/autodiff.hpp"

namespace seqdis {

// Adam with bias correction. Moment tensors follow the parameter order given
// at init; that order is part of the checkpoint contract.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  std::vector<Mat> m, v;
  long t = 0;

  void init(const std::vector<ad::Var>& params) {
    m.clear();
    v.clear();
    t = 0;
    for (const auto& p : params) {
      m.push_back(Mat::Zero(p->v.rows(), p->v.cols()));
      v.push_back(Mat::Zero(p->v.rows(), p->v.cols()));
    }
  }

  void step(const std::vector<ad::Var>& params) {
    require(params.size() == m.size(), "Adam: parameter list changed since init");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    for (size_t i = 0; i < params.size(); ++i) {
      if (params[i]->g.size() == 0) continue;  // no gradient reached this tensor
      const Mat& g = params[i]->g;
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g.cwiseProduct(g).eval();
      const Mat mhat = m[i] / bc1;
      const Mat vhat = v[i] / bc2;
      params[i]->v.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
    }
  }
};

// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_gradients(const std::vector<ad::Var>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p->g.size()) sq += p->g.array().square().sum();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& p : params)
      if (p->g.size()) p->g *= s;
  }
  return norm;
}

}  // namespace seqdis
