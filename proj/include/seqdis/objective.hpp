#pragma once

#include <string>
#include <vector>

#include "seqdis/distributions.hpp"
#include "seqdis/model.hpp"

namespace seqdis {

struct LossWeights {
  double lambda1 = 1.0;  // reconstruction
  double lambda2 = 1.0;  // static KL
  double lambda3 = 1.0;  // dynamic KL
  double lambda4 = 1.0;  // both infoNCE terms (one shared weight)
  double lambda5 = 1.0;  // static/dynamic mutual information penalty
  double tau = 0.5;

  void validate() const {
    for (double l : {lambda1, lambda2, lambda3, lambda4, lambda5})
      require(std::isfinite(l) && l >= 0.0, "LossWeights: lambdas must be finite and >= 0");
    require(std::isfinite(tau) && tau > 0.0, "LossWeights: tau must be positive");
  }
};

// The six loss terms plus their weighted total (a minimization target).
struct LossBreakdown {
  double recon = 0.0;
  double kl_static = 0.0;
  double kl_dynamic = 0.0;
  double nce_static = 0.0;   // log-probabilities, <= 0
  double nce_dynamic = 0.0;
  double mi_static_dynamic = 0.0;
  double total = 0.0;

  double recompute_total(const LossWeights& w) const {
    return w.lambda1 * recon + w.lambda2 * kl_static + w.lambda3 * kl_dynamic -
           w.lambda4 * (nce_static + nce_dynamic) + w.lambda5 * mi_static_dynamic;
  }
};

// ---------------------------------------------------------------------------
// Graph builders (batched; rows = batch)
// ---------------------------------------------------------------------------

namespace objective {

using ad::Var;

// Row-wise KL(q || p) between diagonal Gaussians, summed over dims: n x 1.
inline Var kl_rows_g(const Var& mq, const Var& lq, const Var& mp, const Var& lp) {
  Var dl = ad::sub(lq, lp);                       // lq - lp
  Var ratio = ad::exp_(dl);                       // sq^2 / sp^2
  Var dm = ad::sub(mp, mq);
  Var quad = ad::mul(ad::square(dm), ad::exp_(ad::scale(lp, -1.0)));
  Var cell = ad::scale(ad::sub(ad::add(ratio, quad), ad::add_scalar(dl, 1.0)), 0.5);
  return ad::row_sum(cell);
}

// KL(q || N(0, I)) row-wise.
inline Var kl_rows_std_g(const Var& mq, const Var& lq) {
  Var zero = ad::constant(Mat::Zero(mq->v.rows(), mq->v.cols()));
  return kl_rows_g(mq, lq, zero, zero);
}

// Squared error summed per sequence; averaged over the batch unless
// batch_sum (the convention where lambda_1 tables assume no batch division).
inline Var recon_g(const Var& xhat, const Var& x, bool batch_sum) {
  require(xhat->v.rows() == x->v.rows() && xhat->v.cols() == x->v.cols(),
          "recon_g: shape mismatch");
  Var sq = ad::sum_all(ad::square(ad::sub(xhat, x)));
  return batch_sum ? sq : ad::scale(sq, 1.0 / double(x->v.rows()));
}

inline Var mean_rows_g(const Var& rows_nx1) {
  return ad::scale(ad::sum_all(rows_nx1), 1.0 / double(rows_nx1->v.rows()));
}

// Normalize rows to unit length (guarding near-zero rows).
inline Var unit_rows_g(const Var& a) {
  Var norms = ad::sqrt_(ad::row_sum(ad::square(a)));  // n x 1
  if ((norms->v.array() < kZeroNormGuard).any())
    throw NumericError("similarity: undefined for (near-)zero-norm input");
  Var inv = ad::cdiv(ad::constant(Mat::Ones(norms->v.rows(), 1)), norms);
  return ad::colwise_scale(a, inv);
}

// infoNCE for one anchor row: log phi(u, v+) / (phi(u, v+) + sum_j phi(u, v_j)).
inline Var info_nce_g(const Var& u, const Var& pos, const Var& negs, double tau) {
  require(u->v.rows() == 1 && pos->v.rows() == 1, "info_nce_g: u and pos must be single rows");
  require(negs->v.rows() >= 1, "info_nce_g: at least one negative required");
  require(u->v.cols() == pos->v.cols() && u->v.cols() == negs->v.cols(),
          "info_nce_g: dimension mismatch");
  Var un = unit_rows_g(u);
  Var pn = unit_rows_g(pos);
  Var nn = unit_rows_g(negs);
  Var phi_pos = ad::exp_(ad::scale(ad::matmul_nt(un, pn), 1.0 / tau));       // 1x1
  Var phi_neg = ad::exp_(ad::scale(ad::matmul_nt(un, nn), 1.0 / tau));       // 1xm
  Var denom = ad::add(phi_pos, ad::row_sum(phi_neg));
  return ad::sub(ad::log_(phi_pos), ad::log_(denom));
}

// Row-wise Gaussian log-density table: out(i, j) = log N(x_i; mean_j, var_j)
// for diagonal Gaussians given as batched parameter rows.
inline Var log_density_table_g(const Var& x, const Var& mean, const Var& logvar) {
  const long d = x->v.cols();
  const long n = mean->v.rows();
  Var prec = ad::exp_(ad::scale(logvar, -1.0));
  Var t1 = ad::matmul_nt(ad::square(x), prec);                         // n x n
  Var t2 = ad::scale(ad::matmul_nt(x, ad::mul(mean, prec)), -2.0);     // n x n
  Var c_j = ad::row_sum(ad::mul(ad::square(mean), prec));              // n x 1
  Var ld_j = ad::row_sum(logvar);                                      // n x 1
  Var ones = ad::constant(Mat::Ones(x->v.rows(), 1));
  Var t3 = ad::matmul_nt(ones, c_j);                                   // broadcast c_j as cols
  Var t4 = ad::matmul_nt(ones, ld_j);
  Var quad = ad::add(ad::add(t1, t2), t3);
  (void)n;
  return ad::scale(ad::add(ad::add(quad, t4),
                           ad::constant(Mat::Constant(x->v.rows(), mean->v.rows(),
                                                      d * std::log(2.0 * M_PI)))),
                   -0.5);
}

// Minibatch estimate of I(s; d_1:T) as a log-mean-exp difference:
//   mean_i [ lme_j log q(s_i|x_j)q(d_i|x_j) - lme_j log q(s_i|x_j) - lme_j log q(d_i|x_j) ]
// so a batch of identical posteriors scores exactly zero. Dynamic chains are
// flattened into one diagonal Gaussian of dimension T * d_d.
inline Var mi_mws_g(const Var& s_samp, const Var& s_mean, const Var& s_logvar,
                    const Var& d_samp, const Var& d_mean, const Var& d_logvar) {
  const long n = s_samp->v.rows();
  require(n >= 2, "mi_mws: batch must have n >= 2");
  Var a = log_density_table_g(s_samp, s_mean, s_logvar);  // n x n
  Var b = log_density_table_g(d_samp, d_mean, d_logvar);  // n x n
  Var lse_ab = ad::logsumexp_rows(ad::add(a, b));
  Var lse_a = ad::logsumexp_rows(a);
  Var lse_b = ad::logsumexp_rows(b);
  Var diff = ad::add_scalar(ad::sub(ad::sub(lse_ab, lse_a), lse_b), std::log(double(n)));
  return mean_rows_g(diff);
}

}  // namespace objective

// ---------------------------------------------------------------------------
// Value-level operations
// ---------------------------------------------------------------------------

inline double info_nce(const Vec& u, const Vec& v_plus, const std::vector<Vec>& v_negs,
                       double tau) {
  if (v_negs.empty()) throw ContractError("info_nce: at least one negative required");
  const double phi_pos = similarity_phi(u, v_plus, tau);
  double denom = phi_pos;
  for (const auto& v : v_negs) denom += similarity_phi(u, v, tau);
  return std::log(phi_pos / denom);
}

// batch_posteriors supply the densities; samples are evaluated under every
// batch member's posterior. dynamic_samples are flattened chains (T * d_d).
inline double mi_mws_static_dynamic(const std::vector<SequencePosterior>& batch_posteriors,
                                    const std::vector<Vec>& static_samples,
                                    const std::vector<Vec>& dynamic_samples) {
  const int n = static_cast<int>(batch_posteriors.size());
  if (n < 2) throw ContractError("mi_mws_static_dynamic: batch must have n >= 2");
  require(static_cast<int>(static_samples.size()) == n &&
              static_cast<int>(dynamic_samples.size()) == n,
          "mi_mws_static_dynamic: sample count mismatch");
  const int ds = batch_posteriors[0].static_posterior.dim();
  const int T = batch_posteriors[0].dynamic_posterior.length();
  const int dd = batch_posteriors[0].dynamic_posterior.dim();

  Mat s_samp(n, ds), s_mean(n, ds), s_logvar(n, ds);
  Mat d_samp(n, T * dd), d_mean(n, T * dd), d_logvar(n, T * dd);
  for (int i = 0; i < n; ++i) {
    s_samp.row(i) = static_samples[i].transpose();
    s_mean.row(i) = batch_posteriors[i].static_posterior.mean.transpose();
    s_logvar.row(i) = batch_posteriors[i].static_posterior.log_var.transpose();
    d_samp.row(i) = dynamic_samples[i].transpose();
    for (int t = 0; t < T; ++t) {
      d_mean.row(i).segment(static_cast<long>(t) * dd, dd) =
          batch_posteriors[i].dynamic_posterior.steps[t].mean.transpose();
      d_logvar.row(i).segment(static_cast<long>(t) * dd, dd) =
          batch_posteriors[i].dynamic_posterior.steps[t].log_var.transpose();
    }
  }
  ad::NoGradGuard ng;
  return objective::mi_mws_g(ad::constant(s_samp), ad::constant(s_mean), ad::constant(s_logvar),
                             ad::constant(d_samp), ad::constant(d_mean), ad::constant(d_logvar))
      ->v(0, 0);
}

// ELBO pieces from value-level inputs: reconstruction error (summed per
// sequence, batch-averaged), KL(q(s|x) || N(0,I)), and the dynamic chain KL
// against the prior chains supplied by the caller.
inline std::tuple<double, double, double> elbo_terms(
    const SequenceBatch& batch, const std::vector<SequencePosterior>& posteriors,
    const std::vector<GaussianSequence>& prior_dynamics, const Mat& reconstructions) {
  const int n = batch.size();
  require(static_cast<int>(posteriors.size()) == n, "elbo_terms: posterior count mismatch");
  require(static_cast<int>(prior_dynamics.size()) == n, "elbo_terms: prior count mismatch");
  require(reconstructions.rows() == n && reconstructions.cols() == batch.data.cols(),
          "elbo_terms: reconstruction shape mismatch");

  const double recon = (reconstructions - batch.data).array().square().sum() / double(n);
  double kls = 0.0, kld = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& sp = posteriors[i].static_posterior;
    kls += kl_diag_gaussian(sp, DiagonalGaussian::standard(sp.dim()));
    kld += kl_sequence(posteriors[i].dynamic_posterior, prior_dynamics[i]);
  }
  return {recon, kls / n, kld / n};
}

// Weighted minimization target. Throws TrainingDivergence naming the first
// non-finite term.
inline LossBreakdown total_objective(const LossWeights& w, double recon, double kl_static,
                                     double kl_dynamic, double nce_static, double nce_dynamic,
                                     double mi_static_dynamic) {
  w.validate();
  LossBreakdown b;
  b.recon = recon;
  b.kl_static = kl_static;
  b.kl_dynamic = kl_dynamic;
  b.nce_static = nce_static;
  b.nce_dynamic = nce_dynamic;
  b.mi_static_dynamic = mi_static_dynamic;
  const std::pair<const char*, double> parts[] = {
      {"recon", recon},         {"kl_static", kl_static},   {"kl_dynamic", kl_dynamic},
      {"nce_static", nce_static}, {"nce_dynamic", nce_dynamic},
      {"mi_static_dynamic", mi_static_dynamic}};
  for (const auto& [name, value] : parts)
    if (!std::isfinite(value)) throw TrainingDivergence(name, value);
  b.total = b.recompute_total(w);
  if (!std::isfinite(b.total)) throw TrainingDivergence("total", b.total);
  return b;
}

}  // namespace seqdis
