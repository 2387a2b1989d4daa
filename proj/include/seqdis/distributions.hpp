#pragma once

#include <vector>

#include "seqdis/common.hpp"

namespace seqdis {

// Log-variances are clamped to this range before any exponentiation; the
// clamp is counted and reported through note_log_var_clamp().
constexpr double kLogVarMin = -20.0;
constexpr double kLogVarMax = 20.0;

inline double clamp_log_var(double lv) {
  if (lv < kLogVarMin || lv > kLogVarMax) {
    note_log_var_clamp();
    return lv < kLogVarMin ? kLogVarMin : kLogVarMax;
  }
  return lv;
}

// Factorized Gaussian in mean / log-variance parameterization.
struct DiagonalGaussian {
  Vec mean;
  Vec log_var;

  DiagonalGaussian() = default;
  DiagonalGaussian(Vec m, Vec lv) : mean(std::move(m)), log_var(std::move(lv)) {}

  static DiagonalGaussian standard(int dim) {
    return DiagonalGaussian(Vec::Zero(dim), Vec::Zero(dim));
  }

  int dim() const { return static_cast<int>(mean.size()); }

  void validate() const {
    require(mean.size() >= 1, "DiagonalGaussian: dimension must be >= 1");
    require(mean.size() == log_var.size(), "DiagonalGaussian: mean/log_var dimension mismatch");
    if (!mean.allFinite() || !log_var.allFinite())
      throw NumericError("DiagonalGaussian: non-finite parameters");
  }
};

// Length-T chain of same-dimension Gaussians (the dynamic posterior/prior).
struct GaussianSequence {
  std::vector<DiagonalGaussian> steps;

  int length() const { return static_cast<int>(steps.size()); }
  int dim() const { return steps.empty() ? 0 : steps.front().dim(); }

  void validate() const {
    require(!steps.empty(), "GaussianSequence: length must be >= 1");
    for (const auto& g : steps) {
      g.validate();
      require(g.dim() == steps.front().dim(), "GaussianSequence: steps disagree on dimension");
    }
  }
};

// Dense pairwise KL matrix over a batch. Directional: not symmetric.
struct KlDistanceMatrix {
  Mat values;
  int batch_size = 0;

  void validate() const {
    require(values.rows() == batch_size && values.cols() == batch_size,
            "KlDistanceMatrix: shape/batch_size mismatch");
    for (int i = 0; i < batch_size; ++i)
      require(values(i, i) == 0.0, "KlDistanceMatrix: nonzero diagonal");
    require((values.array() >= -1e-9).all(), "KlDistanceMatrix: negative entry");
  }
};

// KL(p || q) for diagonal Gaussians, computed in log-variance form:
//   sum_j 1/2 (exp(lp - lq) + (mq - mp)^2 exp(-lq) - 1 + lq - lp).
// Exactly zero when the parameter vectors coincide.
inline double kl_diag_gaussian(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  p.validate();
  q.validate();
  require(p.dim() == q.dim(), "kl_diag_gaussian: dimension mismatch");
  double acc = 0.0;
  for (int j = 0; j < p.dim(); ++j) {
    const double lp = clamp_log_var(p.log_var[j]);
    const double lq = clamp_log_var(q.log_var[j]);
    const double dm = q.mean[j] - p.mean[j];
    acc += 0.5 * (std::exp(lp - lq) + dm * dm * std::exp(-lq) - 1.0 + lq - lp);
  }
  return acc;
}

// Per-step KLs summed over the chain (ELBO additivity over time).
inline double kl_sequence(const GaussianSequence& p, const GaussianSequence& q) {
  p.validate();
  q.validate();
  require(p.length() == q.length(), "kl_sequence: length mismatch");
  double acc = 0.0;
  for (int t = 0; t < p.length(); ++t) acc += kl_diag_gaussian(p.steps[t], q.steps[t]);
  return acc;
}

// mean + exp(log_var / 2) * noise
inline Vec reparameterize(const DiagonalGaussian& g, const Vec& noise) {
  g.validate();
  require(noise.size() == g.mean.size(), "reparameterize: noise dimension mismatch");
  return g.mean.array() + (g.log_var.array() * 0.5).exp() * noise.array();
}

constexpr double kZeroNormGuard = 1e-12;

// phi(u, v) = exp(u.v / (tau |u| |v|)). Scale invariant in each argument.
inline double similarity_phi(const Vec& u, const Vec& v, double tau) {
  require(u.size() == v.size(), "similarity_phi: dimension mismatch");
  require(tau > 0.0, "similarity_phi: tau must be positive");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu < kZeroNormGuard || nv < kZeroNormGuard)
    throw NumericError("similarity_phi: undefined for (near-)zero-norm input");
  return std::exp(u.dot(v) / (tau * nu * nv));
}

// D_ij = KL(posteriors[i] || posteriors[j]). Needs n >= 3 so the thirds
// heuristic downstream has nonempty pools.
inline KlDistanceMatrix pairwise_kl_matrix(const std::vector<DiagonalGaussian>& posteriors) {
  const int n = static_cast<int>(posteriors.size());
  if (n < 3) throw ContractError("pairwise_kl_matrix: batch too small (n < 3)");
  KlDistanceMatrix out;
  out.batch_size = n;
  out.values = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) out.values(i, j) = kl_diag_gaussian(posteriors[i], posteriors[j]);
  return out;
}

// Same matrix over dynamic chains, cells via kl_sequence.
inline KlDistanceMatrix pairwise_kl_matrix_sequences(const std::vector<GaussianSequence>& chains) {
  const int n = static_cast<int>(chains.size());
  if (n < 3) throw ContractError("pairwise_kl_matrix_sequences: batch too small (n < 3)");
  KlDistanceMatrix out;
  out.batch_size = n;
  out.values = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) out.values(i, j) = kl_sequence(chains[i], chains[j]);
  return out;
}

}  // namespace seqdis
