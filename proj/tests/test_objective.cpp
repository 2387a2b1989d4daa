#include <catch2/catch_amalgamated.hpp>

#include "seqdis/objective.hpp"

using namespace seqdis;
namespace a = seqdis::ad;

namespace {

Vec vfill(std::initializer_list<double> xs) {
  Vec v(static_cast<long>(xs.size()));
  long i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

double gauss_pdf(double x, double mu, double var) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * M_PI * var);
}

}  // namespace

TEST_CASE("info_nce examples") {
  Rng rng(1);
  Vec u = rng.normal_vec(6);

  SECTION("all similarities equal: log(1 / (1 + M))") {
    for (int m : {1, 8, 32}) {
      std::vector<Vec> negs(m, u);
      CHECK_THAT(info_nce(u, u, negs, 0.5),
                 Catch::Matchers::WithinAbs(std::log(1.0 / (1.0 + m)), 1e-9));
    }
    std::vector<Vec> negs(32, u);
    CHECK_THAT(info_nce(u, u, negs, 0.5), Catch::Matchers::WithinAbs(-3.496508, 1e-6));
  }

  SECTION("phi+ = e^2 against one opposite negative") {
    Vec neg = -u;
    const double expect = std::log(1.0 / (1.0 + std::exp(-4.0)));
    CHECK_THAT(info_nce(u, u, {neg}, 0.5), Catch::Matchers::WithinAbs(expect, 1e-9));
    CHECK_THAT(info_nce(u, u, {neg}, 0.5), Catch::Matchers::WithinAbs(-0.018150, 1e-6));
  }

  SECTION("always negative; adding a negative decreases it; scale invariant in u") {
    for (int it = 0; it < 200; ++it) {
      Vec uu = rng.normal_vec(5), pos = rng.normal_vec(5);
      std::vector<Vec> negs;
      double prev = 0.0;
      for (int m = 0; m < 5; ++m) {
        negs.push_back(rng.normal_vec(5));
        const double val = info_nce(uu, pos, negs, 0.5);
        CHECK(val < 0.0);
        if (m > 0) CHECK(val < prev);
        prev = val;
      }
      const double alpha = 0.01 + 5.0 * rng.uniform();
      CHECK_THAT(info_nce((alpha * uu).eval(), pos, negs, 0.5),
                 Catch::Matchers::WithinAbs(prev, 1e-9));
    }
  }

  SECTION("errors") {
    CHECK_THROWS_AS(info_nce(u, u, {}, 0.5), ContractError);
    std::vector<Vec> negs{u};
    CHECK_THROWS_AS(info_nce(Vec::Zero(6), u, negs, 0.5), NumericError);
  }
}

TEST_CASE("info_nce graph agrees with the value path and differentiates") {
  Rng rng(2);
  Mat u = rng.normal_mat(1, 4), pos = rng.normal_mat(1, 4), negs = rng.normal_mat(6, 4);

  a::NoGradGuard* hold = nullptr;
  (void)hold;
  a::Var g = objective::info_nce_g(a::constant(u), a::constant(pos), a::constant(negs), 0.5);

  std::vector<Vec> neg_list;
  for (int i = 0; i < 6; ++i) neg_list.push_back(negs.row(i).transpose());
  const double v = info_nce(u.row(0).transpose(), pos.row(0).transpose(), neg_list, 0.5);
  CHECK_THAT(g->v(0, 0), Catch::Matchers::WithinAbs(v, 1e-12));

  // finite-difference check on all three inputs
  auto loss = [&](const Mat& mu, const Mat& mp, const Mat& mn) {
    a::NoGradGuard ng;
    return objective::info_nce_g(a::constant(mu), a::constant(mp), a::constant(mn), 0.5)->v(0, 0);
  };
  a::Var lu = a::leaf(u), lp = a::leaf(pos), ln = a::leaf(negs);
  a::Var out = objective::info_nce_g(lu, lp, ln, 0.5);
  a::backward(out);
  const double h = 1e-6;
  for (long c = 0; c < 4; ++c) {
    Mat up = u, dn = u;
    up(0, c) += h;
    dn(0, c) -= h;
    const double fd = (loss(up, pos, negs) - loss(dn, pos, negs)) / (2 * h);
    CHECK_THAT(lu->g(0, c), Catch::Matchers::WithinAbs(fd, 1e-5));
  }
  for (long r = 0; r < 6; ++r) {
    Mat up = negs, dn = negs;
    up(r, 1) += h;
    dn(r, 1) -= h;
    const double fd = (loss(u, pos, up) - loss(u, pos, dn)) / (2 * h);
    CHECK_THAT(ln->g(r, 1), Catch::Matchers::WithinAbs(fd, 1e-5));
  }
}

TEST_CASE("kl_rows_g matches the scalar closed form") {
  Rng rng(3);
  const int n = 5, d = 4;
  Mat mq = rng.normal_mat(n, d), lq = rng.normal_mat(n, d);
  Mat mp = rng.normal_mat(n, d), lp = rng.normal_mat(n, d);
  a::NoGradGuard ng;
  a::Var rows = objective::kl_rows_g(a::constant(mq), a::constant(lq), a::constant(mp),
                                     a::constant(lp));
  for (int i = 0; i < n; ++i) {
    DiagonalGaussian q(mq.row(i).transpose(), lq.row(i).transpose());
    DiagonalGaussian p(mp.row(i).transpose(), lp.row(i).transpose());
    CHECK_THAT(rows->v(i, 0), Catch::Matchers::WithinAbs(kl_diag_gaussian(q, p), 1e-10));
  }
}

TEST_CASE("mi_mws examples") {
  const int T = 2, dd = 1;

  SECTION("identical posteriors and samples factorize to ~zero") {
    std::vector<SequencePosterior> batch(4);
    for (auto& p : batch) {
      p.static_posterior = DiagonalGaussian(vfill({0.3, -0.2}), vfill({0.1, -0.3}));
      p.dynamic_posterior.steps = {DiagonalGaussian(vfill({0.5}), vfill({0.0})),
                                   DiagonalGaussian(vfill({-0.1}), vfill({0.2}))};
    }
    std::vector<Vec> s(4, vfill({0.25, 0.0})), d(4, vfill({0.4, -0.2}));
    CHECK(std::abs(mi_mws_static_dynamic(batch, s, d)) < 1e-9);
  }

  SECTION("n=2 one-dimensional case matches a direct density oracle") {
    std::vector<SequencePosterior> batch(2);
    batch[0].static_posterior = DiagonalGaussian(vfill({0.0}), vfill({0.0}));
    batch[1].static_posterior = DiagonalGaussian(vfill({1.0}), vfill({std::log(2.0)}));
    batch[0].dynamic_posterior.steps = {DiagonalGaussian(vfill({0.5}), vfill({0.0}))};
    batch[1].dynamic_posterior.steps = {DiagonalGaussian(vfill({-0.5}), vfill({std::log(0.5)}))};
    std::vector<Vec> s = {vfill({0.2}), vfill({0.8})};
    std::vector<Vec> d = {vfill({0.1}), vfill({-0.3})};

    // oracle: mean_i [log mean_j qs_ij qd_ij - log mean_j qs_ij - log mean_j qd_ij]
    double acc = 0.0;
    for (int i = 0; i < 2; ++i) {
      double joint = 0, ms = 0, md = 0;
      for (int j = 0; j < 2; ++j) {
        const double qs = gauss_pdf(s[i][0], batch[j].static_posterior.mean[0],
                                    std::exp(batch[j].static_posterior.log_var[0]));
        const double qd =
            gauss_pdf(d[i][0], batch[j].dynamic_posterior.steps[0].mean[0],
                      std::exp(batch[j].dynamic_posterior.steps[0].log_var[0]));
        joint += qs * qd;
        ms += qs;
        md += qd;
      }
      acc += std::log(joint / 2.0) - std::log(ms / 2.0) - std::log(md / 2.0);
    }
    const double oracle = acc / 2.0;
    CHECK_THAT(mi_mws_static_dynamic(batch, s, d), Catch::Matchers::WithinAbs(oracle, 1e-6));
  }

  SECTION("finite on a random batch; n < 2 rejected") {
    Rng rng(4);
    std::vector<SequencePosterior> batch(6);
    std::vector<Vec> s, d;
    for (auto& p : batch) {
      p.static_posterior = DiagonalGaussian(rng.normal_vec(3), rng.normal_vec(3));
      p.dynamic_posterior.steps.resize(T);
      for (int t = 0; t < T; ++t)
        p.dynamic_posterior.steps[t] = DiagonalGaussian(rng.normal_vec(dd), rng.normal_vec(dd));
      s.push_back(rng.normal_vec(3));
      d.push_back(rng.normal_vec(T * dd));
    }
    CHECK(std::isfinite(mi_mws_static_dynamic(batch, s, d)));

    std::vector<SequencePosterior> one(batch.begin(), batch.begin() + 1);
    CHECK_THROWS_AS(mi_mws_static_dynamic(one, {s[0]}, {d[0]}), ContractError);
  }
}

TEST_CASE("mi_mws graph gradient") {
  Rng rng(5);
  const int n = 4, ds = 2, dflat = 3;
  Mat ss = rng.normal_mat(n, ds), sm = rng.normal_mat(n, ds), sl = rng.normal_mat(n, ds);
  Mat dd_ = rng.normal_mat(n, dflat), dm = rng.normal_mat(n, dflat), dl = rng.normal_mat(n, dflat);

  std::vector<Mat> inputs = {ss, sm, sl, dd_, dm, dl};
  std::vector<a::Var> leaves;
  for (auto& m : inputs) leaves.push_back(a::leaf(m));
  a::Var out = objective::mi_mws_g(leaves[0], leaves[1], leaves[2], leaves[3], leaves[4],
                                   leaves[5]);
  a::backward(out);

  auto eval = [&](const std::vector<Mat>& xs) {
    a::NoGradGuard ng;
    return objective::mi_mws_g(a::constant(xs[0]), a::constant(xs[1]), a::constant(xs[2]),
                               a::constant(xs[3]), a::constant(xs[4]), a::constant(xs[5]))
        ->v(0, 0);
  };
  const double h = 1e-6;
  for (size_t k = 0; k < inputs.size(); ++k)
    for (long r = 0; r < inputs[k].rows(); ++r) {
      std::vector<Mat> up = inputs, dn = inputs;
      up[k](r, 0) += h;
      dn[k](r, 0) -= h;
      const double fd = (eval(up) - eval(dn)) / (2 * h);
      const double an = leaves[k]->g.size() ? leaves[k]->g(r, 0) : 0.0;
      CHECK_THAT(an, Catch::Matchers::WithinAbs(fd, 1e-5));
    }
}

TEST_CASE("elbo_terms examples") {
  // A 1-element batch with a 2-step chain, hand-checkable.
  SequenceBatch batch;
  batch.seq_len = 2;
  batch.frame_elems = 2;
  batch.data.resize(1, 4);
  batch.data << 0.1, 0.2, 0.3, 0.4;

  std::vector<SequencePosterior> posts(1);
  posts[0].static_posterior = DiagonalGaussian(vfill({1.0, 0.0}), vfill({0.0, 0.0}));
  posts[0].dynamic_posterior.steps = {DiagonalGaussian(vfill({1.0}), vfill({0.0})),
                                      DiagonalGaussian(vfill({0.0}), vfill({std::log(4.0)}))};
  std::vector<GaussianSequence> prior(1);
  prior[0].steps = {DiagonalGaussian::standard(1), DiagonalGaussian::standard(1)};

  SECTION("perfect reconstruction gives zero recon") {
    auto [recon, kls, kld] = elbo_terms(batch, posts, prior, batch.data);
    CHECK(recon == 0.0);
    // static KL: one dim at mean 1 -> 0.5, other exact prior -> 0
    CHECK_THAT(kls, Catch::Matchers::WithinAbs(0.5, 1e-12));
    // dynamic: 0.5 + 0.5*(4 - 1 - log 4)
    const double expect = 0.5 + 0.5 * (4.0 - 1.0 - std::log(4.0));
    CHECK_THAT(kld, Catch::Matchers::WithinAbs(expect, 1e-9));
  }

  SECTION("posterior equal to prior zeroes the KL terms") {
    std::vector<SequencePosterior> zero_posts(1);
    zero_posts[0].static_posterior = DiagonalGaussian::standard(2);
    zero_posts[0].dynamic_posterior = prior[0];
    Mat rec = Mat::Zero(1, 4);
    auto [recon, kls, kld] = elbo_terms(batch, zero_posts, prior, rec);
    CHECK(kls == 0.0);
    CHECK(kld == 0.0);
    CHECK_THAT(recon, Catch::Matchers::WithinAbs(batch.data.array().square().sum(), 1e-12));
  }
}

TEST_CASE("total_objective combination") {
  SECTION("hand-set parts") {
    LossWeights w;  // all ones
    auto b = total_objective(w, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0);
    CHECK(b.total == 6.0);
    CHECK(b.recompute_total(w) == b.total);
  }

  SECTION("all-zero weights") {
    LossWeights w{0, 0, 0, 0, 0, 0.5};
    auto b = total_objective(w, 3.0, 2.0, 1.0, -0.5, -0.5, 0.7);
    CHECK(b.total == 0.0);
  }

  SECTION("dataset preset weights are representable") {
    LossWeights w{5.0, 9.0, 1.0, 0.5, 2.5, 0.5};
    w.validate();
    auto b = total_objective(w, 2.0, 1.0, 1.0, -0.4, -0.6, 0.2);
    CHECK_THAT(b.total, Catch::Matchers::WithinAbs(5 * 2 + 9 * 1 + 1 * 1 - 0.5 * (-1.0) + 2.5 * 0.2,
                                                   1e-12));
  }

  SECTION("both infoNCE terms share lambda4") {
    LossWeights w{0, 0, 0, 2.0, 0, 0.5};
    auto b1 = total_objective(w, 0, 0, 0, -1.0, -3.0, 0);
    auto b2 = total_objective(w, 0, 0, 0, -3.0, -1.0, 0);
    CHECK(b1.total == b2.total);
    CHECK(b1.total == 8.0);
  }

  SECTION("non-finite parts raise TrainingDivergence naming the term") {
    LossWeights w;
    try {
      total_objective(w, 1.0, std::numeric_limits<double>::quiet_NaN(), 0, -1, -1, 0);
      FAIL("expected TrainingDivergence");
    } catch (const TrainingDivergence& e) {
      CHECK(e.term() == "kl_static");
    }
  }
}
