#include <catch2/catch_amalgamated.hpp>

#include "seqdis/distributions.hpp"

using namespace seqdis;

namespace {

Vec v1(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

// Independent scalar oracle in variance (not log-variance) form.
double kl_oracle(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  double acc = 0.0;
  for (int j = 0; j < p.dim(); ++j) {
    const double vp = std::exp(p.log_var[j]);
    const double vq = std::exp(q.log_var[j]);
    const double dm = q.mean[j] - p.mean[j];
    acc += 0.5 * (vp / vq + dm * dm / vq - 1.0 + std::log(vq / vp));
  }
  return acc;
}

DiagonalGaussian random_gaussian(Rng& rng, int dim) {
  Vec m(dim), lv(dim);
  for (int i = 0; i < dim; ++i) {
    m[i] = 3.0 * rng.normal();
    lv[i] = 2.0 * rng.normal();
  }
  return {m, lv};
}

}  // namespace

TEST_CASE("kl_diag_gaussian closed-form examples") {
  DiagonalGaussian std1(v1(0.0), v1(0.0));
  CHECK(kl_diag_gaussian(std1, std1) == 0.0);

  DiagonalGaussian p(v1(1.0), v1(0.0));
  CHECK_THAT(kl_diag_gaussian(p, std1), Catch::Matchers::WithinAbs(0.5, 1e-12));

  DiagonalGaussian wide(v1(0.0), v1(std::log(4.0)));
  const double expect = 0.5 * (4.0 - 1.0 - std::log(4.0));
  CHECK_THAT(kl_diag_gaussian(wide, std1), Catch::Matchers::WithinAbs(expect, 1e-12));
  CHECK_THAT(kl_diag_gaussian(wide, std1), Catch::Matchers::WithinAbs(0.806853, 1e-6));
}

TEST_CASE("kl_diag_gaussian contract errors") {
  DiagonalGaussian a = DiagonalGaussian::standard(2);
  DiagonalGaussian b = DiagonalGaussian::standard(3);
  CHECK_THROWS_AS(kl_diag_gaussian(a, b), ContractError);

  DiagonalGaussian bad(v1(std::numeric_limits<double>::quiet_NaN()), v1(0.0));
  CHECK_THROWS_AS(kl_diag_gaussian(bad, a.dim() == 1 ? a : DiagonalGaussian::standard(1)),
                  NumericError);
}

TEST_CASE("kl_diag_gaussian nonnegative, zero iff equal, asymmetric") {
  Rng rng(1234);
  for (int it = 0; it < 1000; ++it) {
    const int dim = 1 + rng.uniform_int(8);
    DiagonalGaussian p = random_gaussian(rng, dim);
    DiagonalGaussian q = random_gaussian(rng, dim);
    const double kl = kl_diag_gaussian(p, q);
    CHECK(kl >= 0.0);
    CHECK(kl_diag_gaussian(p, p) == 0.0);
  }
  // Perturbing any parameter away from equality makes the KL strictly positive.
  DiagonalGaussian p = random_gaussian(rng, 4);
  DiagonalGaussian q = p;
  q.mean[2] += 1e-6;
  CHECK(kl_diag_gaussian(p, q) > 0.0);

  // Concrete asymmetry witness.
  DiagonalGaussian wide(v1(0.0), v1(std::log(4.0)));
  DiagonalGaussian narrow(v1(0.0), v1(0.0));
  CHECK(kl_diag_gaussian(wide, narrow) != kl_diag_gaussian(narrow, wide));
}

TEST_CASE("kl_sequence sums per-step KLs") {
  DiagonalGaussian std1(v1(0.0), v1(0.0));
  DiagonalGaussian p(v1(1.0), v1(0.0));  // KL vs std = 0.5

  GaussianSequence a{{p, p}};
  GaussianSequence b{{std1, std1}};
  CHECK_THAT(kl_sequence(a, b), Catch::Matchers::WithinAbs(1.0, 1e-12));

  GaussianSequence ident{{p, p, p}};
  CHECK(kl_sequence(ident, ident) == 0.0);

  GaussianSequence one_p{{p}};
  GaussianSequence one_q{{std1}};
  CHECK(kl_sequence(one_p, one_q) == kl_diag_gaussian(p, std1));

  CHECK_THROWS_AS(kl_sequence(a, ident), ContractError);
}

TEST_CASE("reparameterize") {
  DiagonalGaussian g(v1(2.0), v1(std::log(4.0)));
  CHECK(reparameterize(g, v1(0.0))[0] == 2.0);
  CHECK_THAT(reparameterize(g, v1(-1.0))[0], Catch::Matchers::WithinAbs(0.0, 1e-12));

  DiagonalGaussian std1(v1(0.0), v1(0.0));
  CHECK(reparameterize(std1, v1(1.0))[0] == 1.0);

  CHECK_THROWS_AS(reparameterize(g, Vec::Zero(2)), ContractError);
}

TEST_CASE("reparameterize matches moments statistically") {
  const int dim = 3;
  DiagonalGaussian g(Vec::Zero(dim), Vec::Zero(dim));
  g.mean << -1.0, 0.5, 2.0;
  g.log_var << std::log(0.25), 0.0, std::log(4.0);

  const int n = 100000;
  Rng rng(777);
  Vec sum = Vec::Zero(dim), sumsq = Vec::Zero(dim);
  for (int i = 0; i < n; ++i) {
    Vec x = reparameterize(g, rng.normal_vec(dim));
    sum += x;
    sumsq.array() += x.array().square();
  }
  Vec mean = sum / n;
  Vec var = sumsq / n - mean.cwiseProduct(mean);
  for (int j = 0; j < dim; ++j) {
    const double sigma = std::exp(0.5 * g.log_var[j]);
    CHECK(std::abs(mean[j] - g.mean[j]) < 3.0 * sigma / std::sqrt(double(n)));
    const double v_true = sigma * sigma;
    CHECK(std::abs(var[j] - v_true) < 3.0 * v_true * std::sqrt(2.0 / n));
  }
}

TEST_CASE("similarity_phi examples and properties") {
  Vec u(2), w(2);
  u << 3.0, 4.0;
  w << -4.0, 3.0;  // orthogonal to u

  CHECK_THAT(similarity_phi(u, u, 0.5), Catch::Matchers::WithinAbs(std::exp(2.0), 1e-9));
  CHECK_THAT(similarity_phi(u, u, 0.5), Catch::Matchers::WithinAbs(7.389056, 1e-6));
  CHECK_THAT(similarity_phi(u, w, 0.5), Catch::Matchers::WithinAbs(1.0, 1e-12));
  Vec nu = -u;
  CHECK_THAT(similarity_phi(u, nu, 0.5), Catch::Matchers::WithinAbs(std::exp(-2.0), 1e-9));
  CHECK_THAT(similarity_phi(u, nu, 0.5), Catch::Matchers::WithinAbs(0.135335, 1e-6));

  CHECK_THROWS_AS(similarity_phi(Vec::Zero(2), u, 0.5), NumericError);

  // Scale invariance in each argument separately.
  Rng rng(42);
  for (int it = 0; it < 200; ++it) {
    Vec a = rng.normal_vec(5), b = rng.normal_vec(5);
    const double alpha = 0.01 + 10.0 * rng.uniform();
    const double beta = 0.01 + 10.0 * rng.uniform();
    const double base = similarity_phi(a, b, 0.5);
    const double scaled = similarity_phi((alpha * a).eval(), (beta * b).eval(), 0.5);
    CHECK_THAT(scaled, Catch::Matchers::WithinRel(base, 1e-9));
  }
}

TEST_CASE("pairwise_kl_matrix") {
  Rng rng(99);

  SECTION("identical Gaussians give a zero matrix") {
    DiagonalGaussian g = random_gaussian(rng, 4);
    std::vector<DiagonalGaussian> batch(5, g);
    auto m = pairwise_kl_matrix(batch);
    CHECK(m.values.isZero(0.0));
    m.validate();
  }

  SECTION("batch too small") {
    std::vector<DiagonalGaussian> two(2, DiagonalGaussian::standard(2));
    CHECK_THROWS_AS(pairwise_kl_matrix(two), ContractError);
  }

  SECTION("matches scalar oracle on random batches") {
    for (int it = 0; it < 50; ++it) {
      const int n = 3 + rng.uniform_int(14);   // up to 16
      const int dim = 1 + rng.uniform_int(32); // up to 32
      std::vector<DiagonalGaussian> batch;
      for (int i = 0; i < n; ++i) batch.push_back(random_gaussian(rng, dim));
      auto m = pairwise_kl_matrix(batch);
      m.validate();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double expect = (i == j) ? 0.0 : kl_oracle(batch[i], batch[j]);
          CHECK_THAT(m.values(i, j), Catch::Matchers::WithinAbs(expect, 1e-9));
        }
    }
  }

  SECTION("sequence variant agrees with kl_sequence cells") {
    std::vector<GaussianSequence> chains;
    for (int i = 0; i < 4; ++i) {
      GaussianSequence s;
      for (int t = 0; t < 3; ++t) s.steps.push_back(random_gaussian(rng, 2));
      chains.push_back(s);
    }
    auto m = pairwise_kl_matrix_sequences(chains);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double expect = (i == j) ? 0.0 : kl_sequence(chains[i], chains[j]);
        CHECK(m.values(i, j) == expect);
      }
  }
}
