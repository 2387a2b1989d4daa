#include <catch2/catch_amalgamated.hpp>

#include "seqdis/classifiers.hpp"

using namespace seqdis;

namespace {

// Three well-separated Gaussian blobs in 4 dims.
void make_blobs(Mat& x, VecI& y, int per_class, std::uint64_t seed) {
  Rng rng(seed);
  const int classes = 3;
  x.resize(classes * per_class, 4);
  y.resize(classes * per_class);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      for (int f = 0; f < 4; ++f) x(r, f) = 4.0 * c * (f == c % 4 ? 1.0 : 0.2) + rng.normal();
      y[r] = c;
    }
}

}  // namespace

TEST_CASE("all classifier families separate easy blobs") {
  Mat xtr, xte;
  VecI ytr, yte;
  make_blobs(xtr, ytr, 40, 1);
  make_blobs(xte, yte, 15, 2);

  for (auto kind : {ClassifierKind::linear_margin, ClassifierKind::tree_ensemble,
                    ClassifierKind::nearest_neighbor}) {
    auto clf = make_classifier(kind);
    clf->fit(xtr, ytr, 3, 7);
    const double acc = clf->accuracy(xte, yte);
    INFO(to_string(kind) << " acc " << acc);
    CHECK(acc > 0.95);
  }
}

TEST_CASE("classifiers are deterministic under the fit seed") {
  Mat x;
  VecI y;
  make_blobs(x, y, 30, 3);
  for (auto kind : {ClassifierKind::linear_margin, ClassifierKind::tree_ensemble,
                    ClassifierKind::nearest_neighbor}) {
    auto a = make_classifier(kind);
    auto b = make_classifier(kind);
    a->fit(x, y, 3, 13);
    b->fit(x, y, 3, 13);
    CHECK(a->predict(x) == b->predict(x));
  }
}

TEST_CASE("classifier kind parsing") {
  CHECK(parse_classifier_kind("linear-margin") == ClassifierKind::linear_margin);
  CHECK(parse_classifier_kind("tree-ensemble") == ClassifierKind::tree_ensemble);
  CHECK(parse_classifier_kind("nearest-neighbor") == ClassifierKind::nearest_neighbor);
  CHECK_THROWS_AS(parse_classifier_kind("svm"), ConfigError);
}

TEST_CASE("one-hot features classify perfectly") {
  const int n = 60, classes = 4;
  Mat x = Mat::Zero(n, classes);
  VecI y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = i % classes;
    x(i, y[i]) = 1.0;
  }
  for (auto kind : {ClassifierKind::linear_margin, ClassifierKind::tree_ensemble,
                    ClassifierKind::nearest_neighbor}) {
    auto clf = make_classifier(kind);
    clf->fit(x, y, classes, 1);
    CHECK(clf->accuracy(x, y) == 1.0);
  }
}
