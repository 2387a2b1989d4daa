#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "seqdis/common.hpp"

namespace seqdis {

// Pluggable classifier contract for the latent benchmarks. Three families,
// each with fixed library-style default hyperparameters; all deterministic
// under the fit seed.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const Mat& x, const VecI& y, int n_classes, std::uint64_t seed) = 0;
  virtual VecI predict(const Mat& x) const = 0;

  double accuracy(const Mat& x, const VecI& y) const {
    VecI pred = predict(x);
    int hit = 0;
    for (long i = 0; i < y.size(); ++i)
      if (pred[i] == y[i]) ++hit;
    return y.size() ? double(hit) / double(y.size()) : 0.0;
  }
};

enum class ClassifierKind { linear_margin, tree_ensemble, nearest_neighbor };

inline const char* to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::linear_margin: return "linear-margin";
    case ClassifierKind::tree_ensemble: return "tree-ensemble";
    case ClassifierKind::nearest_neighbor: return "nearest-neighbor";
  }
  return "?";
}

inline ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "linear-margin") return ClassifierKind::linear_margin;
  if (s == "tree-ensemble") return ClassifierKind::tree_ensemble;
  if (s == "nearest-neighbor") return ClassifierKind::nearest_neighbor;
  throw ConfigError("unknown classifier kind: " + s);
}

// One-vs-rest L2-regularized hinge loss, full-batch subgradient descent with
// a 1/(lambda * t) schedule. Features are standardized on the train split.
class LinearMarginClassifier : public Classifier {
 public:
  int iterations = 400;
  double c_reg = 1.0;

  void fit(const Mat& x, const VecI& y, int n_classes, std::uint64_t) override {
    require(x.rows() == y.size() && x.rows() > 0, "LinearMargin: shape mismatch");
    n_classes_ = n_classes;
    mean_ = x.colwise().mean();
    Mat centered = x.rowwise() - mean_;
    std_ = (centered.array().square().colwise().mean().sqrt() + 1e-8).matrix();
    Mat xs = standardized(x);
    const long n = xs.rows(), d = xs.cols();
    const double lambda = 1.0 / (c_reg * double(n));

    w_ = Mat::Zero(n_classes, d);
    b_ = Vec::Zero(n_classes);
    for (int c = 0; c < n_classes; ++c) {
      Vec w = Vec::Zero(d);
      double b = 0.0;
      for (int it = 1; it <= iterations; ++it) {
        const double eta = 1.0 / (lambda * it);
        Vec grad_w = lambda * w;
        double grad_b = 0.0;
        for (long i = 0; i < n; ++i) {
          const double yi = y[i] == c ? 1.0 : -1.0;
          if (yi * (xs.row(i).dot(w) + b) < 1.0) {
            grad_w -= (yi / double(n)) * xs.row(i).transpose();
            grad_b -= yi / double(n);
          }
        }
        w -= eta * grad_w;
        b -= eta * grad_b;
      }
      w_.row(c) = w.transpose();
      b_[c] = b;
    }
  }

  VecI predict(const Mat& x) const override {
    Mat xs = standardized(x);
    Mat scores = xs * w_.transpose();
    scores.rowwise() += b_.transpose();
    VecI out(x.rows());
    for (long i = 0; i < x.rows(); ++i) {
      long best;
      scores.row(i).maxCoeff(&best);
      out[i] = static_cast<int>(best);
    }
    return out;
  }

 private:
  Mat standardized(const Mat& x) const {
    Mat xs = x.rowwise() - mean_;
    for (long c = 0; c < xs.cols(); ++c) xs.col(c) /= std_[c];
    return xs;
  }

  int n_classes_ = 0;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd std_;
  Mat w_;
  Vec b_;
};

// CART forest: bootstrap samples, sqrt(d) feature subsets, gini splits,
// grown to purity (depth-capped). Majority vote with smallest-label ties.
class TreeEnsembleClassifier : public Classifier {
 public:
  int n_trees = 100;
  int max_depth = 20;

  void fit(const Mat& x, const VecI& y, int n_classes, std::uint64_t seed) override {
    require(x.rows() == y.size() && x.rows() > 0, "TreeEnsemble: shape mismatch");
    n_classes_ = n_classes;
    trees_.assign(n_trees, {});
    const long n = x.rows();
    for (int t = 0; t < n_trees; ++t) {
      Rng rng(derive_seed(seed, {tag_hash("tree"), static_cast<std::uint64_t>(t)}));
      std::vector<int> rows(n);
      for (long i = 0; i < n; ++i) rows[i] = rng.uniform_int(static_cast<int>(n));
      build(trees_[t], x, y, rows, 0, rng);
    }
  }

  VecI predict(const Mat& x) const override {
    VecI out(x.rows());
    for (long i = 0; i < x.rows(); ++i) {
      std::vector<int> votes(n_classes_, 0);
      for (const auto& tree : trees_) ++votes[walk(tree, x.row(i))];
      out[i] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return out;
  }

 private:
  struct TreeNode {
    int feature = -1;       // -1 for leaves
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = 0;
  };
  using Tree = std::vector<TreeNode>;

  static double gini(const std::vector<int>& counts, int total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (int c : counts) {
      const double p = double(c) / total;
      g -= p * p;
    }
    return g;
  }

  int build(Tree& tree, const Mat& x, const VecI& y, const std::vector<int>& rows, int depth,
            Rng& rng) {
    std::vector<int> counts(n_classes_, 0);
    for (int r : rows) ++counts[y[r]];
    const int node_id = static_cast<int>(tree.size());
    tree.push_back({});
    tree[node_id].label =
        static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());

    const int nonzero = static_cast<int>(std::count_if(counts.begin(), counts.end(),
                                                       [](int c) { return c > 0; }));
    if (nonzero <= 1 || depth >= max_depth || rows.size() < 2) return node_id;

    const int d = static_cast<int>(x.cols());
    const int n_feat = std::max(1, static_cast<int>(std::sqrt(double(d))));
    std::vector<int> all_feats(d);
    std::iota(all_feats.begin(), all_feats.end(), 0);
    std::vector<int> feats = rng.sample_without_replacement(all_feats, n_feat);

    double best_score = 1e18;
    int best_feat = -1;
    double best_thr = 0.0;
    for (int f : feats) {
      std::vector<std::pair<double, int>> vals;
      vals.reserve(rows.size());
      for (int r : rows) vals.emplace_back(x(r, f), y[r]);
      std::sort(vals.begin(), vals.end());
      std::vector<int> left_counts(n_classes_, 0);
      std::vector<int> right_counts = counts;
      const int total = static_cast<int>(rows.size());
      for (int i = 0; i + 1 < total; ++i) {
        ++left_counts[vals[i].second];
        --right_counts[vals[i].second];
        if (vals[i].first == vals[i + 1].first) continue;
        const int nl = i + 1, nr = total - nl;
        const double score =
            (nl * gini(left_counts, nl) + nr * gini(right_counts, nr)) / total;
        if (score < best_score) {
          best_score = score;
          best_feat = f;
          best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_feat < 0) return node_id;

    std::vector<int> left_rows, right_rows;
    for (int r : rows)
      (x(r, best_feat) <= best_thr ? left_rows : right_rows).push_back(r);
    if (left_rows.empty() || right_rows.empty()) return node_id;

    tree[node_id].feature = best_feat;
    tree[node_id].threshold = best_thr;
    const int l = build(tree, x, y, left_rows, depth + 1, rng);
    const int r = build(tree, x, y, right_rows, depth + 1, rng);
    tree[node_id].left = l;
    tree[node_id].right = r;
    return node_id;
  }

  static int walk(const Tree& tree, const Eigen::RowVectorXd& row) {
    int at = 0;
    while (tree[at].feature >= 0)
      at = row[tree[at].feature] <= tree[at].threshold ? tree[at].left : tree[at].right;
    return tree[at].label;
  }

  int n_classes_ = 0;
  std::vector<Tree> trees_;
};

// k = 5 Euclidean nearest neighbors; ties break toward the smallest label.
class NearestNeighborClassifier : public Classifier {
 public:
  int k = 5;

  void fit(const Mat& x, const VecI& y, int n_classes, std::uint64_t) override {
    require(x.rows() == y.size() && x.rows() > 0, "NearestNeighbor: shape mismatch");
    x_ = x;
    y_ = y;
    n_classes_ = n_classes;
  }

  VecI predict(const Mat& x) const override {
    VecI out(x.rows());
    const int kk = std::min<int>(k, static_cast<int>(x_.rows()));
    for (long i = 0; i < x.rows(); ++i) {
      std::vector<std::pair<double, int>> dist;
      dist.reserve(x_.rows());
      for (long j = 0; j < x_.rows(); ++j)
        dist.emplace_back((x_.row(j) - x.row(i)).squaredNorm(), static_cast<int>(j));
      std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
      std::vector<int> votes(n_classes_, 0);
      for (int j = 0; j < kk; ++j) ++votes[y_[dist[j].second]];
      out[i] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return out;
  }

 private:
  Mat x_;
  VecI y_;
  int n_classes_ = 0;
};

inline std::unique_ptr<Classifier> make_classifier(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::linear_margin: return std::make_unique<LinearMarginClassifier>();
    case ClassifierKind::tree_ensemble: return std::make_unique<TreeEnsembleClassifier>();
    case ClassifierKind::nearest_neighbor: return std::make_unique<NearestNeighborClassifier>();
  }
  throw ContractError("make_classifier: bad kind");
}

}  // namespace seqdis
