#pragma once

#include <array>
#include <string>
#include <vector>

#include "seqdis/classifiers.hpp"
#include "seqdis/objective.hpp"
#include "seqdis/optim.hpp"
#include "seqdis/synth.hpp"
#include "seqdis/trainer.hpp"
#include "seqdis/views.hpp"

namespace seqdis {

class JudgeQualityError : public std::runtime_error {
 public:
  explicit JudgeQualityError(const std::string& what) : std::runtime_error(what) {}
};

enum class JudgeTarget { static_label, dynamic_label };

// ---------------------------------------------------------------------------
// Judge: a small MLP over flattened sequences, held fixed while scoring
// generated data. Trained only on the model's train split.
// ---------------------------------------------------------------------------

class JudgeModel {
 public:
  JudgeModel() = default;

  JudgeModel(int input_dim, int n_classes, std::uint64_t seed) : classes_(n_classes) {
    Rng rng(derive_seed(seed, {tag_hash("judge-init")}));
    l1_ = nn::Linear(input_dim, 48, rng);
    l2_ = nn::Linear(48, n_classes, rng);
  }

  int n_classes() const { return classes_; }
  double holdout_accuracy() const { return holdout_accuracy_; }

  Mat predict_proba(const Mat& data) const {
    ad::NoGradGuard ng;
    Mat logits = logits_g(ad::constant(data))->v;
    Mat probs(logits.rows(), logits.cols());
    for (long i = 0; i < logits.rows(); ++i) {
      const double mx = logits.row(i).maxCoeff();
      Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
      probs.row(i) = e / e.sum();
    }
    return probs;
  }

  VecI predict(const Mat& data) const {
    Mat probs = predict_proba(data);
    VecI out(probs.rows());
    for (long i = 0; i < probs.rows(); ++i) {
      long best;
      probs.row(i).maxCoeff(&best);
      out[i] = static_cast<int>(best);
    }
    return out;
  }

  double accuracy(const Mat& data, const VecI& labels) const {
    VecI pred = predict(data);
    int hit = 0;
    for (long i = 0; i < labels.size(); ++i)
      if (pred[i] == labels[i]) ++hit;
    return labels.size() ? double(hit) / labels.size() : 0.0;
  }

  // Cross-entropy training on (data, labels); a held-out fifth gates quality.
  void fit(const Mat& data, const VecI& labels, std::uint64_t seed, int epochs = 300) {
    require(data.rows() == labels.size() && data.rows() >= 2, "judge fit: shape mismatch");
    std::vector<int> train_rows, hold_rows;
    for (long i = 0; i < data.rows(); ++i)
      (i % 5 == 4 ? hold_rows : train_rows).push_back(static_cast<int>(i));

    Mat xt(train_rows.size(), data.cols());
    VecI yt(train_rows.size());
    for (size_t i = 0; i < train_rows.size(); ++i) {
      xt.row(i) = data.row(train_rows[i]);
      yt[static_cast<long>(i)] = labels[train_rows[i]];
    }
    Mat xh(hold_rows.size(), data.cols());
    VecI yh(hold_rows.size());
    for (size_t i = 0; i < hold_rows.size(); ++i) {
      xh.row(i) = data.row(hold_rows[i]);
      yh[static_cast<long>(i)] = labels[hold_rows[i]];
    }

    Mat onehot = Mat::Zero(xt.rows(), classes_);
    for (long i = 0; i < yt.size(); ++i) {
      require(yt[i] >= 0 && yt[i] < classes_, "judge fit: label out of range");
      onehot(i, yt[i]) = 1.0;
    }

    std::vector<ad::Var> params = {l1_.w, l1_.b, l2_.w, l2_.b};
    Adam opt;
    opt.lr = 2e-3;
    opt.init(params);
    (void)seed;
    for (int e = 0; e < epochs; ++e) {
      ad::Var logits = logits_g(ad::constant(xt));
      ad::Var lse = ad::logsumexp_rows(logits);
      ad::Var true_logit = ad::row_sum(ad::mul(logits, ad::constant(onehot)));
      ad::Var loss = objective::mean_rows_g(ad::sub(lse, true_logit));
      ad::backward(loss);
      opt.step(params);
      ad::zero_grad(params);
      if (e >= 24 && e % 25 == 24 && accuracy(xh, yh) >= 0.99) break;
    }
    holdout_accuracy_ = accuracy(xh, yh);
    if (holdout_accuracy_ < 0.80)
      throw JudgeQualityError("judge reached only " + std::to_string(holdout_accuracy_) +
                              " holdout accuracy; metrics would be meaningless");
  }

 private:
  ad::Var logits_g(const ad::Var& x) const { return l2_(ad::tanh_(l1_(x))); }

  nn::Linear l1_, l2_;
  int classes_ = 0;
  double holdout_accuracy_ = 0.0;
};

inline JudgeModel train_judge(const SequenceBatch& train_set, JudgeTarget target,
                              std::uint64_t seed) {
  train_set.validate();
  const VecI& labels =
      target == JudgeTarget::static_label ? train_set.static_labels : train_set.dynamic_labels;
  require(labels.size() == train_set.size(), "train_judge: labels missing");
  const int n_classes = labels.size() ? labels.maxCoeff() + 1 : 0;
  int distinct = 0;
  std::vector<bool> seen(std::max(1, n_classes), false);
  for (long i = 0; i < labels.size(); ++i)
    if (!seen[labels[i]]) {
      seen[labels[i]] = true;
      ++distinct;
    }
  if (distinct < 2) throw ContractError("train_judge: need at least two classes");

  JudgeModel judge(static_cast<int>(train_set.data.cols()), n_classes, seed);
  judge.fit(train_set.data, labels, seed);
  return judge;
}

// ---------------------------------------------------------------------------
// Generation metrics
// ---------------------------------------------------------------------------

// Fix each test sequence's dynamics at their posterior means, redraw the
// static factor from p(s), generate, and ask the judge for the dynamic
// label. Returns the fraction that kept their label.
template <class Model>
double metric_swap_accuracy(const Model& model, const JudgeModel& judge,
                            const SequenceBatch& test_set, std::uint64_t seed) {
  test_set.validate();
  require(judge.n_classes() >= 2, "metric_swap_accuracy: judge untrained");
  require(test_set.dynamic_labels.size() == test_set.size(),
          "metric_swap_accuracy: dynamic labels missing");
  int hits = 0;
  Mat generated(test_set.size(), test_set.data.cols());
  for (int i = 0; i < test_set.size(); ++i) {
    SequencePosterior post = model.encode_one(test_set.sequence(i));
    std::vector<Vec> d_path(post.dynamic_posterior.length());
    for (int t = 0; t < post.dynamic_posterior.length(); ++t)
      d_path[t] = post.dynamic_posterior.steps[t].mean;
    Vec s_new = sample_prior_static(model.static_dim(),
                                    derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    Mat gen = model.decode_one(s_new, d_path);
    for (int t = 0; t < test_set.seq_len; ++t)
      generated.row(i).segment(static_cast<long>(t) * test_set.frame_elems,
                               test_set.frame_elems) = gen.row(t);
  }
  VecI pred = judge.predict(generated);
  for (int i = 0; i < test_set.size(); ++i)
    if (pred[i] == test_set.dynamic_labels[i]) ++hits;
  return double(hits) / test_set.size();
}

struct GenerationEntropies {
  double is_score = 1.0;
  double intra_entropy = 0.0;  // H(y|x)
  double inter_entropy = 0.0;  // H(y)
  bool degenerate_single_sample = false;
};

// IS = exp(E_x KL(p(y|x) || p(y))), H(y|x) = mean posterior entropy,
// H(y) = entropy of the mean posterior. log IS = H(y) - H(y|x) by
// construction over the same sample set.
inline GenerationEntropies metric_is_and_entropies(const Mat& judge_posteriors) {
  require(judge_posteriors.rows() >= 1 && judge_posteriors.cols() >= 2,
          "metric_is_and_entropies: empty or degenerate posterior set");
  GenerationEntropies out;
  out.degenerate_single_sample = judge_posteriors.rows() == 1;
  const long n = judge_posteriors.rows();
  Eigen::RowVectorXd marginal = judge_posteriors.colwise().mean();
  auto xlogx = [](double p) { return p > 0.0 ? p * std::log(p) : 0.0; };

  double mean_ent = 0.0, mean_kl = 0.0;
  for (long i = 0; i < n; ++i) {
    double ent = 0.0, kl = 0.0;
    for (long c = 0; c < judge_posteriors.cols(); ++c) {
      const double p = judge_posteriors(i, c);
      ent -= xlogx(p);
      if (p > 0.0) kl += p * std::log(p / marginal[c]);
    }
    mean_ent += ent;
    mean_kl += kl;
  }
  out.intra_entropy = mean_ent / n;
  out.is_score = std::exp(mean_kl / n);
  double hy = 0.0;
  for (long c = 0; c < marginal.size(); ++c) hy -= xlogx(marginal[c]);
  out.inter_entropy = hy;
  return out;
}

// ---------------------------------------------------------------------------
// Equal error rate
// ---------------------------------------------------------------------------

namespace eval_detail {

// Shared vertex interpolation so the production path and any reference
// reimplementation agree bitwise: linear crossing of FPR (falling) and FNR
// (rising) between adjacent ROC vertices.
inline double eer_from_vertices(const std::vector<std::pair<double, double>>& v) {
  for (size_t i = 0; i + 1 < v.size(); ++i) {
    const double f1 = v[i].first, m1 = v[i].second;
    const double f2 = v[i + 1].first, m2 = v[i + 1].second;
    if (m1 == f1) return f1;
    if ((m1 - f1) * (m2 - f2) <= 0.0) {
      const double denom = (m2 - m1) - (f2 - f1);
      const double t = denom != 0.0 ? (f1 - m1) / denom : 0.0;
      return f1 + t * (f2 - f1);
    }
  }
  return v.back().second == v.back().first ? v.back().first : 0.5;
}

}  // namespace eval_detail

// Cosine-score all unordered pairs, sweep the accept threshold, and return
// the rate where false-positive and false-negative rates cross (linear
// interpolation between ROC vertices; tied scores form one vertex).
inline double metric_eer(const std::vector<Vec>& embeddings, const VecI& identity_labels) {
  const int n = static_cast<int>(embeddings.size());
  require(identity_labels.size() == n, "metric_eer: label count mismatch");
  require(n >= 2, "metric_eer: need at least two embeddings");
  {
    std::vector<int> sorted(identity_labels.data(), identity_labels.data() + n);
    std::sort(sorted.begin(), sorted.end());
    if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < 2)
      throw ContractError("metric_eer: undefined for a single identity");
  }

  std::vector<std::pair<double, bool>> pairs;  // score, is_same_identity
  pairs.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  long n_pos = 0, n_neg = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double nu = embeddings[i].norm(), nv = embeddings[j].norm();
      if (nu < kZeroNormGuard || nv < kZeroNormGuard)
        throw NumericError("metric_eer: zero-norm embedding");
      const double score = embeddings[i].dot(embeddings[j]) / (nu * nv);
      const bool same = identity_labels[i] == identity_labels[j];
      pairs.emplace_back(score, same);
      (same ? n_pos : n_neg)++;
    }
  require(n_pos > 0 && n_neg > 0, "metric_eer: need both same- and different-identity pairs");

  std::sort(pairs.begin(), pairs.end());
  // Sweep thresholds from below the minimum score upward. accept = score >= t.
  std::vector<std::pair<double, double>> vertices;  // (FPR, FNR)
  vertices.emplace_back(1.0, 0.0);
  long pos_below = 0, neg_below = 0;
  size_t at = 0;
  while (at < pairs.size()) {
    const double s = pairs[at].first;
    while (at < pairs.size() && pairs[at].first == s) {
      (pairs[at].second ? pos_below : neg_below)++;
      ++at;
    }
    // threshold just above s
    vertices.emplace_back(double(n_neg - neg_below) / n_neg, double(pos_below) / n_pos);
  }
  return eval_detail::eer_from_vertices(vertices);
}

// ---------------------------------------------------------------------------
// Latent classification benchmark
// ---------------------------------------------------------------------------

struct LaccTable {
  double acc_s_static = 0.0;   // classify static label from s
  double acc_s_dynamic = 0.0;  // classify dynamic label from s
  double acc_d_static = 0.0;
  double acc_d_dynamic = 0.0;
  double gap_static_features = 0.0;   // acc_s_static - acc_s_dynamic
  double gap_dynamic_features = 0.0;  // acc_d_dynamic - acc_d_static

  void recompute_gaps() {
    gap_static_features = acc_s_static - acc_s_dynamic;
    gap_dynamic_features = acc_d_dynamic - acc_d_static;
  }
};

namespace eval_detail {

// 80/20 split; falls back to per-class stratified assignment when a plain
// shuffle drops a class from the train part.
inline void benchmark_split(int n, const VecI& ya, const VecI& yb, std::uint64_t seed,
                            std::vector<int>& train, std::vector<int>& test) {
  Rng rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
  const int n_train = std::max(1, (n * 4) / 5);
  train.assign(order.begin(), order.begin() + n_train);
  test.assign(order.begin() + n_train, order.end());

  auto covered = [&](const VecI& y) {
    std::vector<bool> in_train(y.maxCoeff() + 1, false), present(y.maxCoeff() + 1, false);
    for (int i : train) in_train[y[i]] = true;
    for (long i = 0; i < y.size(); ++i) present[y[i]] = true;
    for (size_t c = 0; c < present.size(); ++c)
      if (present[c] && !in_train[c]) return false;
    return true;
  };
  if (covered(ya) && covered(yb)) return;

  // stratified: within each (ya, yb) group, every 5th item goes to test
  train.clear();
  test.clear();
  std::map<std::pair<int, int>, int> counter;
  for (int i : order) {
    const int k = counter[{ya[i], yb[i]}]++;
    (k % 5 == 4 ? test : train).push_back(i);
  }
  if (test.empty()) test.push_back(train.back()), train.pop_back();
}

}  // namespace eval_detail

template <class Model>
LaccTable latent_classification_benchmark(const Model& model, const SequenceBatch& test_set,
                                          ClassifierKind kind, std::uint64_t seed) {
  test_set.validate();
  require(test_set.has_labels(), "latent_classification_benchmark: labeled set required");
  const int n = test_set.size();
  const int ds = model.static_dim();
  const int dd = model.dynamic_dim();
  const int T = model.seq_len();

  Mat s_feat(n, ds), d_feat(n, static_cast<long>(T) * dd);
  for (int i = 0; i < n; ++i) {
    SequencePosterior post = model.encode_one(test_set.sequence(i));
    s_feat.row(i) = post.static_posterior.mean.transpose();
    for (int t = 0; t < T; ++t)
      d_feat.row(i).segment(static_cast<long>(t) * dd, dd) =
          post.dynamic_posterior.steps[t].mean.transpose();
  }

  std::vector<int> train_rows, test_rows;
  eval_detail::benchmark_split(n, test_set.static_labels, test_set.dynamic_labels, seed,
                               train_rows, test_rows);

  auto run = [&](const Mat& feats, const VecI& labels) {
    Mat xtr(train_rows.size(), feats.cols()), xte(test_rows.size(), feats.cols());
    VecI ytr(train_rows.size()), yte(test_rows.size());
    for (size_t i = 0; i < train_rows.size(); ++i) {
      xtr.row(i) = feats.row(train_rows[i]);
      ytr[static_cast<long>(i)] = labels[train_rows[i]];
    }
    for (size_t i = 0; i < test_rows.size(); ++i) {
      xte.row(i) = feats.row(test_rows[i]);
      yte[static_cast<long>(i)] = labels[test_rows[i]];
    }
    auto clf = make_classifier(kind);
    clf->fit(xtr, ytr, labels.maxCoeff() + 1, seed);
    return clf->accuracy(xte, yte);
  };

  LaccTable out;
  out.acc_s_static = run(s_feat, test_set.static_labels);
  out.acc_s_dynamic = run(s_feat, test_set.dynamic_labels);
  out.acc_d_static = run(d_feat, test_set.static_labels);
  out.acc_d_dynamic = run(d_feat, test_set.dynamic_labels);
  out.recompute_gaps();
  return out;
}

// ---------------------------------------------------------------------------
// Swap generation
// ---------------------------------------------------------------------------

struct SwapResult {
  Mat content_swap;  // (s_tgt, d_src)
  Mat pose_swap;     // (s_src, d_tgt)
  Mat recon_src;
  Mat recon_tgt;
};

template <class Model>
SwapResult swap_generate(const Model& model, const Mat& src_seq, const Mat& tgt_seq) {
  require(src_seq.rows() == tgt_seq.rows() && src_seq.cols() == tgt_seq.cols(),
          "swap_generate: sequence shape mismatch");
  SequencePosterior ps = model.encode_one(src_seq);
  SequencePosterior pt = model.encode_one(tgt_seq);
  auto means = [](const SequencePosterior& p) {
    std::vector<Vec> d(p.dynamic_posterior.length());
    for (int t = 0; t < p.dynamic_posterior.length(); ++t)
      d[t] = p.dynamic_posterior.steps[t].mean;
    return d;
  };
  std::vector<Vec> d_src = means(ps), d_tgt = means(pt);
  SwapResult out;
  out.content_swap = model.decode_one(pt.static_posterior.mean, d_src);
  out.pose_swap = model.decode_one(ps.static_posterior.mean, d_tgt);
  out.recon_src = model.decode_one(ps.static_posterior.mean, d_src);
  out.recon_tgt = model.decode_one(pt.static_posterior.mean, d_tgt);
  return out;
}

// ---------------------------------------------------------------------------
// View-quality analysis
// ---------------------------------------------------------------------------

struct ViewQualityReport {
  double acc_static_from_positive_views = 0.0;
  double acc_dynamic_from_prior_dynamics = 0.0;
  // raw phi similarities per third and per latent space
  std::array<std::vector<double>, 3> static_sims;
  std::array<std::vector<double>, 3> dynamic_sims;
  std::array<double, 3> static_mean{};
  std::array<double, 3> dynamic_mean{};
  // histogram over phi in [0, 7.5], 30 bins, per third (static space)
  static constexpr int kBins = 30;
  static constexpr double kBinMax = 7.5;
  std::array<std::array<long, kBins>, 3> histogram{};
};

// Two-sided permutation test on the difference of means between two
// similarity samples. Returns the p-value.
inline double permutation_pvalue(const std::vector<double>& a, const std::vector<double>& b,
                                 int n_perm, std::uint64_t seed) {
  require(!a.empty() && !b.empty(), "permutation_pvalue: empty sample");
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / v.size();
  };
  const double observed = std::abs(mean(a) - mean(b));
  std::vector<double> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  Rng rng(seed);
  int exceed = 0;
  for (int p = 0; p < n_perm; ++p) {
    for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i)
      std::swap(pool[i], pool[rng.uniform_int(i + 1)]);
    double sa = 0;
    for (size_t i = 0; i < a.size(); ++i) sa += pool[i];
    double sb = 0;
    for (size_t i = a.size(); i < pool.size(); ++i) sb += pool[i];
    if (std::abs(sa / a.size() - sb / b.size()) >= observed) ++exceed;
  }
  return double(exceed + 1) / double(n_perm + 1);
}

// (a) classify anchor labels from generated views (positive statics should
// keep the static label; prior-sampled dynamics should lose the dynamic
// label), (b) collect per-third phi similarities of the latent samples.
template <class Model>
ViewQualityReport analyze_view_quality(const Model& model, const SequenceBatch& test_set,
                                       std::uint64_t seed, ClassifierKind kind,
                                       double tau = 0.5) {
  test_set.validate();
  require(test_set.has_labels(), "analyze_view_quality: labeled set required");
  const int n = test_set.size();
  require(n >= 3, "analyze_view_quality: need at least 3 sequences");
  const int ds = model.static_dim();
  const int dd = model.dynamic_dim();
  const int T = model.seq_len();

  std::vector<SequencePosterior> posts(n);
  for (int i = 0; i < n; ++i) posts[i] = model.encode_one(test_set.sequence(i));

  // latent samples for the similarity analysis
  Mat s_samp(n, ds), d_samp(n, static_cast<long>(T) * dd);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {tag_hash("vq-sample"), static_cast<std::uint64_t>(i)}));
    s_samp.row(i) = reparameterize(posts[i].static_posterior, rng.normal_vec(ds)).transpose();
    for (int t = 0; t < T; ++t)
      d_samp.row(i).segment(static_cast<long>(t) * dd, dd) =
          reparameterize(posts[i].dynamic_posterior.steps[t], rng.normal_vec(dd)).transpose();
  }

  std::vector<DiagonalGaussian> statics(n);
  std::vector<GaussianSequence> chains(n);
  for (int i = 0; i < n; ++i) {
    statics[i] = posts[i].static_posterior;
    chains[i] = posts[i].dynamic_posterior;
  }
  KlDistanceMatrix d_static = pairwise_kl_matrix(statics);
  KlDistanceMatrix d_dynamic = pairwise_kl_matrix_sequences(chains);

  ViewQualityReport out;
  const int third = n / 3;
  const int far_start = (2 * n) / 3;
  auto collect = [&](const KlDistanceMatrix& dist, const Mat& samples,
                     std::array<std::vector<double>, 3>& sims, bool fill_hist) {
    for (int i = 0; i < n; ++i) {
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      const Vec row = dist.values.row(i);
      std::sort(order.begin(), order.end(), [&](int x, int y) {
        if (row[x] != row[y]) return row[x] < row[y];
        if (x == i) return true;
        if (y == i) return false;
        return x < y;
      });
      for (int pos = 0; pos < n; ++pos) {
        const int part = pos < third ? 0 : (pos < far_start ? 1 : 2);
        const Vec u = samples.row(i).transpose();
        const Vec v = samples.row(order[pos]).transpose();
        const double phi = similarity_phi(u, v, tau);
        sims[part].push_back(phi);
        if (fill_hist) {
          int bin = static_cast<int>(phi / ViewQualityReport::kBinMax *
                                     ViewQualityReport::kBins);
          bin = std::min(std::max(bin, 0), ViewQualityReport::kBins - 1);
          ++out.histogram[part][bin];
        }
      }
    }
  };
  collect(d_static, s_samp, out.static_sims, true);
  collect(d_dynamic, d_samp, out.dynamic_sims, false);
  for (int p = 0; p < 3; ++p) {
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return v.empty() ? 0.0 : s / v.size();
    };
    out.static_mean[p] = mean(out.static_sims[p]);
    out.dynamic_mean[p] = mean(out.dynamic_sims[p]);
  }

  // (a) view-quality classification: s+ views should predict the anchor's
  // static label; the prior-sampled dynamics paired with them should predict
  // the anchor's dynamic label only at chance.
  ViewSampler sampler(model, ViewConfig{});
  Mat s_pos(n, ds), d_prior(n, static_cast<long>(T) * dd);
  for (int i = 0; i < n; ++i) {
    ViewPools pools = partition_thirds(d_static.values.row(i), i, NegativeMode::farthest_third,
                                       derive_seed(seed, {tag_hash("vq-pool"),
                                                          static_cast<std::uint64_t>(i)}));
    const std::uint64_t vs = derive_seed(seed, {tag_hash("vq-view"),
                                                static_cast<std::uint64_t>(i)});
    s_pos.row(i) = sampler.sample_positive_static(pools, posts, vs).transpose();
    auto [pd, path] = model.prior_rollout_one(T, derive_seed(vs, {tag_hash("vq-prior")}));
    (void)pd;
    for (int t = 0; t < T; ++t)
      d_prior.row(i).segment(static_cast<long>(t) * dd, dd) = path[t].transpose();
  }
  std::vector<int> tr, te;
  eval_detail::benchmark_split(n, test_set.static_labels, test_set.dynamic_labels,
                               derive_seed(seed, {tag_hash("vq-split")}), tr, te);
  auto run_clf = [&](const Mat& feats, const VecI& labels) {
    Mat xtr(tr.size(), feats.cols()), xte(te.size(), feats.cols());
    VecI ytr(tr.size()), yte(te.size());
    for (size_t i = 0; i < tr.size(); ++i) {
      xtr.row(i) = feats.row(tr[i]);
      ytr[static_cast<long>(i)] = labels[tr[i]];
    }
    for (size_t i = 0; i < te.size(); ++i) {
      xte.row(i) = feats.row(te[i]);
      yte[static_cast<long>(i)] = labels[te[i]];
    }
    auto clf = make_classifier(kind);
    clf->fit(xtr, ytr, labels.maxCoeff() + 1, seed);
    return clf->accuracy(xte, yte);
  };
  out.acc_static_from_positive_views = run_clf(s_pos, test_set.static_labels);
  out.acc_dynamic_from_prior_dynamics = run_clf(d_prior, test_set.dynamic_labels);
  return out;
}

// ---------------------------------------------------------------------------
// Negative-mode ablation
// ---------------------------------------------------------------------------

struct AblationRow {
  NegativeMode mode;
  double swap_accuracy = 0.0;
};

inline std::vector<AblationRow> run_negative_mode_ablation(const ModelConfig& mcfg,
                                                           const TrainConfig& base,
                                                           const LabeledDataset& data,
                                                           const std::string& run_root) {
  JudgeModel judge = train_judge(data.train, JudgeTarget::dynamic_label, base.seed);
  std::vector<AblationRow> out;
  for (NegativeMode mode : {NegativeMode::random, NegativeMode::middle_third,
                            NegativeMode::middle_plus_farthest, NegativeMode::farthest_third}) {
    TrainConfig cfg = base;
    cfg.negative_mode = mode;
    Trainer trainer(mcfg, cfg, run_root + "/ablate-" + to_string(mode));
    trainer.train(data.train);
    out.push_back({mode, metric_swap_accuracy(trainer.model(), judge, data.test, base.seed)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

struct EvalReport {
  double acc = 0.0;
  double is_score = 1.0;
  double intra_entropy = 0.0;
  double inter_entropy = 0.0;
  double eer_static = 0.0;
  double eer_dynamic = 0.0;
  LaccTable lacc;
  ViewQualityReport views;
  double judge_holdout_accuracy = 0.0;
  bool degenerate_entropy_set = false;

  void validate() const {
    for (double f : {acc, eer_static, eer_dynamic, lacc.acc_s_static, lacc.acc_s_dynamic,
                     lacc.acc_d_static, lacc.acc_d_dynamic})
      require(f >= 0.0 && f <= 1.0, "EvalReport: fraction out of [0,1]");
    require(intra_entropy >= 0.0 && inter_entropy >= 0.0, "EvalReport: negative entropy");
    require(is_score >= 1.0 - 1e-12, "EvalReport: IS below 1");
  }
};

template <class Model>
EvalReport evaluate_model(const Model& model, const LabeledDataset& data, std::uint64_t seed,
                          ClassifierKind kind = ClassifierKind::linear_margin) {
  EvalReport r;
  JudgeModel judge = train_judge(data.train, JudgeTarget::dynamic_label, seed);
  r.judge_holdout_accuracy = judge.holdout_accuracy();

  r.acc = metric_swap_accuracy(model, judge, data.test, seed);

  // entropies over the same generated set used for the accuracy metric
  Mat generated(data.test.size(), data.test.data.cols());
  for (int i = 0; i < data.test.size(); ++i) {
    SequencePosterior post = model.encode_one(data.test.sequence(i));
    std::vector<Vec> d_path(post.dynamic_posterior.length());
    for (int t = 0; t < post.dynamic_posterior.length(); ++t)
      d_path[t] = post.dynamic_posterior.steps[t].mean;
    Vec s_new = sample_prior_static(model.static_dim(),
                                    derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    Mat gen = model.decode_one(s_new, d_path);
    for (int t = 0; t < data.test.seq_len; ++t)
      generated.row(i).segment(static_cast<long>(t) * data.test.frame_elems,
                               data.test.frame_elems) = gen.row(t);
  }
  GenerationEntropies ge = metric_is_and_entropies(judge.predict_proba(generated));
  r.is_score = ge.is_score;
  r.intra_entropy = ge.intra_entropy;
  r.inter_entropy = ge.inter_entropy;
  r.degenerate_entropy_set = ge.degenerate_single_sample;

  // verification-style EER on posterior means with static identities
  std::vector<Vec> s_emb, d_emb;
  for (int i = 0; i < data.test.size(); ++i) {
    SequencePosterior post = model.encode_one(data.test.sequence(i));
    s_emb.push_back(post.static_posterior.mean);
    Vec flat(static_cast<long>(model.seq_len()) * model.dynamic_dim());
    for (int t = 0; t < model.seq_len(); ++t)
      flat.segment(static_cast<long>(t) * model.dynamic_dim(), model.dynamic_dim()) =
          post.dynamic_posterior.steps[t].mean;
    d_emb.push_back(flat);
  }
  r.eer_static = metric_eer(s_emb, data.test.static_labels);
  r.eer_dynamic = metric_eer(d_emb, data.test.static_labels);

  r.lacc = latent_classification_benchmark(model, data.test, kind, seed);
  r.views = analyze_view_quality(model, data.test, seed, kind);
  r.validate();
  return r;
}

}  // namespace seqdis
