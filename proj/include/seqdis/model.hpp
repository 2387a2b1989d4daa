#pragma once

#include <utility>
#include <vector>

#include "seqdis/distributions.hpp"
#include "seqdis/nn.hpp"

namespace seqdis {

// ---------------------------------------------------------------------------
// Configuration and batch types
// ---------------------------------------------------------------------------

struct ModelConfig {
  int static_dim = 32;
  int dynamic_dim = 8;
  int seq_len = 8;
  std::vector<int> frame_shape;        // {C, H, W} for images, {F} for time series
  int recurrent_hidden = 64;
  std::vector<int> conv_channel_plan;  // per stride-2 block; empty for non-image data
  int frame_feature_dim = 64;
  int prior_hidden = 32;

  bool image() const { return frame_shape.size() == 3; }

  int frame_elems() const {
    int e = 1;
    for (int d : frame_shape) e *= d;
    return e;
  }

  // Spatial size at the bottom of the conv stack.
  int base_hw() const {
    int hw = frame_shape.size() == 3 ? frame_shape[1] : 0;
    for (size_t i = 0; i < conv_channel_plan.size(); ++i) hw /= 2;
    return hw;
  }

  void validate() const {
    require(static_dim > dynamic_dim,
            "ModelConfig: static_dim must exceed dynamic_dim (dimension heuristic)");
    require(dynamic_dim >= 1 && seq_len >= 2, "ModelConfig: dims positive, seq_len >= 2");
    require(recurrent_hidden >= 1 && frame_feature_dim >= 1 && prior_hidden >= 1,
            "ModelConfig: hidden sizes must be positive");
    require(frame_shape.size() == 1 || frame_shape.size() == 3,
            "ModelConfig: frame_shape must be (features) or (channels, height, width)");
    for (int d : frame_shape) require(d >= 1, "ModelConfig: frame dims positive");
    if (image()) {
      require(!conv_channel_plan.empty(), "ModelConfig: image data needs a conv plan");
      require(frame_shape[1] == frame_shape[2], "ModelConfig: frames must be square");
      int hw = frame_shape[1];
      for (size_t i = 0; i < conv_channel_plan.size(); ++i) {
        require(hw % 2 == 0, "ModelConfig: frame size not divisible by conv plan");
        hw /= 2;
      }
      require(hw >= 1, "ModelConfig: conv plan too deep for frame size");
    } else {
      require(conv_channel_plan.empty(), "ModelConfig: conv plan given for non-image data");
    }
  }
};

struct SequenceBatch {
  Mat data;  // n rows, each row a sequence flattened as T frames of frame_elems
  int seq_len = 0;
  int frame_elems = 0;
  VecI static_labels;   // size n or empty
  VecI dynamic_labels;  // size n or empty

  int size() const { return static_cast<int>(data.rows()); }

  bool has_labels() const { return static_labels.size() > 0 && dynamic_labels.size() > 0; }

  void validate() const {
    require(seq_len >= 1 && frame_elems >= 1, "SequenceBatch: bad shape");
    require(data.cols() == static_cast<long>(seq_len) * frame_elems,
            "SequenceBatch: data width does not match seq_len * frame_elems");
    if (!data.allFinite()) throw NumericError("SequenceBatch: non-finite values");
    if (static_labels.size() > 0)
      require(static_labels.size() == data.rows(), "SequenceBatch: static label count");
    if (dynamic_labels.size() > 0)
      require(dynamic_labels.size() == data.rows(), "SequenceBatch: dynamic label count");
  }

  Mat sequence(int i) const {  // T x frame_elems view of row i
    Mat out(seq_len, frame_elems);
    for (int t = 0; t < seq_len; ++t)
      out.row(t) = data.row(i).segment(static_cast<long>(t) * frame_elems, frame_elems);
    return out;
  }
};

struct SequencePosterior {
  DiagonalGaussian static_posterior;
  GaussianSequence dynamic_posterior;
};

// Batched posterior parameters as graph nodes (rows = batch).
struct PosteriorGraph {
  ad::Var s_mean, s_logvar;
  std::vector<ad::Var> d_mean, d_logvar;  // per step

  int batch() const { return static_cast<int>(s_mean->v.rows()); }
  int steps() const { return static_cast<int>(d_mean.size()); }
};

struct PriorGraph {
  std::vector<ad::Var> mean, logvar;  // per step
};

inline Vec sample_prior_static(int d_s, std::uint64_t seed) {
  require(d_s >= 1, "sample_prior_static: dimension must be >= 1");
  Rng rng(seed);
  return rng.normal_vec(d_s);
}

// ---------------------------------------------------------------------------
// The variational sequence model: frame encoder -> bidirectional LSTM with a
// static head on the final states and a causal dynamic head over the forward
// states only (q(d_i | .) must not see frames beyond i), a learned LSTM prior
// over the dynamic chain, and a per-frame decoder on concat(s, d_i).
// ---------------------------------------------------------------------------

class SequenceModel {
 public:
  SequenceModel() = default;

  SequenceModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(seed, {tag_hash("init")}));
    const int ff = cfg_.frame_feature_dim;
    const int hid = cfg_.recurrent_hidden;

    if (cfg_.image()) {
      int c = cfg_.frame_shape[0];
      int hw = cfg_.frame_shape[1];
      for (int out_c : cfg_.conv_channel_plan) {
        convs_.emplace_back(ad::ConvDims{c, hw, hw, out_c, 4, 2, 1}, rng);
        c = out_c;
        hw /= 2;
      }
      enc_fc_ = nn::Linear(c * hw * hw, ff, rng);
    } else {
      const int f = cfg_.frame_shape[0];
      ts_fc1_ = nn::Linear(f, 32, rng);
      ts_fc2_ = nn::Linear(32, 64, rng);
      ts_fc3_ = nn::Linear(64, ff, rng);
    }

    lstm_fwd_ = nn::LstmCell(ff, hid, rng);
    lstm_bwd_ = nn::LstmCell(ff, hid, rng);
    s_mean_head_ = nn::Linear(2 * hid, cfg_.static_dim, rng);
    s_logvar_head_ = nn::Linear(2 * hid, cfg_.static_dim, rng);
    dyn_rnn_ = nn::RnnCell(hid, hid, rng);
    d_mean_head_ = nn::Linear(hid, cfg_.dynamic_dim, rng);
    d_logvar_head_ = nn::Linear(hid, cfg_.dynamic_dim, rng);

    prior_cell_ = nn::LstmCell(cfg_.dynamic_dim, cfg_.prior_hidden, rng);
    prior_mean_head_ = nn::Linear(cfg_.prior_hidden, cfg_.dynamic_dim, rng);
    prior_logvar_head_ = nn::Linear(cfg_.prior_hidden, cfg_.dynamic_dim, rng);

    const int dz = cfg_.static_dim + cfg_.dynamic_dim;
    if (cfg_.image()) {
      const int base = cfg_.base_hw();
      const auto& plan = cfg_.conv_channel_plan;
      dec_fc_ = nn::Linear(dz, plan.back() * base * base, rng);
      int hw = base;
      for (int i = static_cast<int>(plan.size()) - 1; i >= 0; --i) {
        const int in_c = plan[i];
        const int out_c = i > 0 ? plan[i - 1] : cfg_.frame_shape[0];
        deconvs_.emplace_back(ad::ConvDims{in_c, hw, hw, out_c, 4, 2, 1}, rng);
        hw *= 2;
      }
    } else {
      dec_ts1_ = nn::Linear(dz, 32, rng);
      dec_ts2_ = nn::Linear(32, 64, rng);
      dec_ts3_ = nn::Linear(64, cfg_.frame_shape[0], rng);
    }
  }

  const ModelConfig& config() const { return cfg_; }

  // ---- graph-level API (rows = batch) ----

  // x: (n, T * frame_elems) -> batched posterior parameters.
  PosteriorGraph encode_g(const ad::Var& x) const {
    const int T = cfg_.seq_len;
    const int D = cfg_.frame_elems();
    require(x->v.cols() == static_cast<long>(T) * D, "encode: input width mismatch");
    const int n = static_cast<int>(x->v.rows());

    ad::Var frames = ad::split_rows(x, T);  // (n*T, D), row i*T + t
    ad::Var feat = frame_features(frames);  // (n*T, ff)

    std::vector<ad::Var> f_t(T);
    for (int t = 0; t < T; ++t) {
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i * T + t;
      f_t[t] = ad::gather_rows(feat, idx);
    }

    auto fwd = lstm_fwd_.zero_state(n);
    std::vector<ad::Var> h_fwd(T);
    for (int t = 0; t < T; ++t) {
      fwd = lstm_fwd_.step(f_t[t], fwd);
      h_fwd[t] = fwd.h;
    }
    auto bwd = lstm_bwd_.zero_state(n);
    ad::Var h_bwd_first;
    for (int t = T - 1; t >= 0; --t) {
      bwd = lstm_bwd_.step(f_t[t], bwd);
      if (t == 0) h_bwd_first = bwd.h;
    }

    PosteriorGraph out;
    ad::Var s_in = ad::concat_cols({h_fwd[T - 1], h_bwd_first});
    out.s_mean = s_mean_head_(s_in);
    out.s_logvar = s_logvar_head_(s_in);

    ad::Var r = dyn_rnn_.zero_state(n);
    out.d_mean.resize(T);
    out.d_logvar.resize(T);
    for (int t = 0; t < T; ++t) {
      r = dyn_rnn_.step(h_fwd[t], r);
      out.d_mean[t] = d_mean_head_(r);
      out.d_logvar[t] = d_logvar_head_(r);
    }
    return out;
  }

  // s: (n, d_s), d: T vars of (n, d_d) -> reconstruction (n, T * frame_elems).
  // Frame t depends only on (s, d_t).
  ad::Var decode_g(const ad::Var& s, const std::vector<ad::Var>& d) const {
    const int T = cfg_.seq_len;
    require(static_cast<int>(d.size()) == T, "decode: wrong number of dynamic steps");
    require(s->v.cols() == cfg_.static_dim, "decode: static dim mismatch");
    const int n = static_cast<int>(s->v.rows());

    std::vector<ad::Var> z_t(T);
    for (int t = 0; t < T; ++t) {
      require(d[t]->v.cols() == cfg_.dynamic_dim && d[t]->v.rows() == n,
              "decode: dynamic step shape mismatch");
      z_t[t] = ad::concat_cols({s, d[t]});
    }
    // Stack t-major then permute into sequence-major rows (i*T + t).
    ad::Var stacked = ad::concat_rows(z_t);
    std::vector<int> perm(static_cast<size_t>(n) * T);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < T; ++t) perm[static_cast<size_t>(i) * T + t] = t * n + i;
    ad::Var z = ad::gather_rows(stacked, perm);  // (n*T, dz)

    ad::Var frames;
    if (cfg_.image()) {
      ad::Var h = ad::leaky_relu(dec_fc_(z));
      for (size_t i = 0; i < deconvs_.size(); ++i) {
        h = deconvs_[i](h);
        if (i + 1 < deconvs_.size()) h = ad::leaky_relu(h);
      }
      frames = ad::sigmoid(h);
    } else {
      ad::Var h = ad::tanh_(dec_ts1_(z));
      h = ad::relu(dec_ts2_(h));
      frames = dec_ts3_(h);
    }
    return ad::merge_rows(frames, T);  // (n, T*D)
  }

  // Prior parameters with the chain teacher-forced on the given step inputs:
  // step t receives d_steps[t-1] (step 0 receives zeros).
  PriorGraph prior_given_g(int n_rows, const std::vector<ad::Var>& d_steps) const {
    const int T = static_cast<int>(d_steps.size());
    require(T >= 1, "prior_given_g: empty chain");
    PriorGraph out;
    out.mean.resize(T);
    out.logvar.resize(T);
    auto st = prior_cell_.zero_state(n_rows);
    ad::Var zero_in = ad::constant(Mat::Zero(n_rows, cfg_.dynamic_dim));
    for (int t = 0; t < T; ++t) {
      st = prior_cell_.step(t == 0 ? zero_in : d_steps[t - 1], st);
      out.mean[t] = prior_mean_head_(st.h);
      out.logvar[t] = prior_logvar_head_(st.h);
    }
    return out;
  }

  // Rollout sampling its own path with the provided noise (n, T*d_d).
  std::pair<PriorGraph, std::vector<ad::Var>> prior_rollout_g(int n_rows, int T,
                                                              const Mat& noise) const {
    require(T >= 1, "prior_rollout_g: T must be >= 1");
    require(noise.rows() == n_rows && noise.cols() == static_cast<long>(T) * cfg_.dynamic_dim,
            "prior_rollout_g: noise shape mismatch");
    PriorGraph out;
    out.mean.resize(T);
    out.logvar.resize(T);
    std::vector<ad::Var> path(T);
    auto st = prior_cell_.zero_state(n_rows);
    ad::Var prev = ad::constant(Mat::Zero(n_rows, cfg_.dynamic_dim));
    for (int t = 0; t < T; ++t) {
      st = prior_cell_.step(prev, st);
      out.mean[t] = prior_mean_head_(st.h);
      out.logvar[t] = prior_logvar_head_(st.h);
      ad::Var eps = ad::constant(noise.middleCols(static_cast<long>(t) * cfg_.dynamic_dim,
                                                  cfg_.dynamic_dim));
      path[t] = ad::add(out.mean[t], ad::mul(ad::exp_(ad::scale(out.logvar[t], 0.5)), eps));
      prev = path[t];
    }
    return {out, path};
  }

  // ---- value-level API ----

  std::vector<SequencePosterior> encode(const SequenceBatch& batch) const {
    batch.validate();
    require(batch.seq_len == cfg_.seq_len && batch.frame_elems == cfg_.frame_elems(),
            "encode: batch shape does not match model config");
    ad::NoGradGuard ng;
    PosteriorGraph pg = encode_g(ad::constant(batch.data));
    return split_posteriors(pg);
  }

  std::vector<SequencePosterior> split_posteriors(const PosteriorGraph& pg) const {
    const int n = pg.batch();
    const int T = pg.steps();
    std::vector<SequencePosterior> out(n);
    for (int i = 0; i < n; ++i) {
      out[i].static_posterior =
          DiagonalGaussian(pg.s_mean->v.row(i).transpose(), pg.s_logvar->v.row(i).transpose());
      out[i].dynamic_posterior.steps.resize(T);
      for (int t = 0; t < T; ++t)
        out[i].dynamic_posterior.steps[t] = DiagonalGaussian(
            pg.d_mean[t]->v.row(i).transpose(), pg.d_logvar[t]->v.row(i).transpose());
    }
    return out;
  }

  // Single-sequence decode: returns T x frame_elems.
  Mat decode(const Vec& s, const std::vector<Vec>& d_path) const {
    require(s.size() == cfg_.static_dim, "decode: static dim mismatch");
    require(static_cast<int>(d_path.size()) == cfg_.seq_len, "decode: dynamic path length");
    ad::NoGradGuard ng;
    std::vector<ad::Var> d(d_path.size());
    for (size_t t = 0; t < d_path.size(); ++t) {
      require(d_path[t].size() == cfg_.dynamic_dim, "decode: dynamic dim mismatch");
      d[t] = ad::constant(d_path[t].transpose());
    }
    ad::Var x = decode_g(ad::constant(s.transpose()), d);
    Mat out(cfg_.seq_len, cfg_.frame_elems());
    for (int t = 0; t < cfg_.seq_len; ++t)
      out.row(t) = x->v.row(0).segment(static_cast<long>(t) * cfg_.frame_elems(),
                                       cfg_.frame_elems());
    return out;
  }

  std::pair<GaussianSequence, std::vector<Vec>> prior_dynamics_rollout(
      int T, std::uint64_t seed) const {
    require(T >= 1, "prior_dynamics_rollout: T must be >= 1");
    Rng rng(seed);
    Mat noise(1, static_cast<long>(T) * cfg_.dynamic_dim);
    for (long c = 0; c < noise.cols(); ++c) noise(0, c) = rng.normal();
    ad::NoGradGuard ng;
    auto [pg, path] = prior_rollout_g(1, T, noise);
    GaussianSequence seq;
    seq.steps.resize(T);
    std::vector<Vec> p(T);
    for (int t = 0; t < T; ++t) {
      seq.steps[t] =
          DiagonalGaussian(pg.mean[t]->v.row(0).transpose(), pg.logvar[t]->v.row(0).transpose());
      p[t] = path[t]->v.row(0).transpose();
    }
    return {seq, p};
  }

  // ---- single-sequence adapters (the view-sampler model interface) ----

  int static_dim() const { return cfg_.static_dim; }
  int dynamic_dim() const { return cfg_.dynamic_dim; }
  int seq_len() const { return cfg_.seq_len; }

  Mat decode_one(const Vec& s, const std::vector<Vec>& d_path) const { return decode(s, d_path); }

  SequencePosterior encode_one(const Mat& seq) const {
    require(seq.rows() == cfg_.seq_len && seq.cols() == cfg_.frame_elems(),
            "encode_one: sequence shape mismatch");
    ad::NoGradGuard ng;
    Mat row(1, seq.size());
    for (int t = 0; t < cfg_.seq_len; ++t)
      row.middleCols(static_cast<long>(t) * cfg_.frame_elems(), cfg_.frame_elems()) = seq.row(t);
    PosteriorGraph pg = encode_g(ad::constant(row));
    return split_posteriors(pg)[0];
  }

  std::pair<GaussianSequence, std::vector<Vec>> prior_rollout_one(int T,
                                                                  std::uint64_t seed) const {
    return prior_dynamics_rollout(T, seed);
  }

  std::vector<std::pair<std::string, ad::Var>> named_parameters() const {
    nn::ParamMap out;
    if (cfg_.image()) {
      for (size_t i = 0; i < convs_.size(); ++i)
        convs_[i].collect("enc.conv" + std::to_string(i), out);
      enc_fc_.collect("enc.fc", out);
    } else {
      ts_fc1_.collect("enc.ts1", out);
      ts_fc2_.collect("enc.ts2", out);
      ts_fc3_.collect("enc.ts3", out);
    }
    lstm_fwd_.collect("enc.lstm_fwd", out);
    lstm_bwd_.collect("enc.lstm_bwd", out);
    s_mean_head_.collect("enc.s_mean", out);
    s_logvar_head_.collect("enc.s_logvar", out);
    dyn_rnn_.collect("enc.dyn_rnn", out);
    d_mean_head_.collect("enc.d_mean", out);
    d_logvar_head_.collect("enc.d_logvar", out);
    prior_cell_.collect("prior.lstm", out);
    prior_mean_head_.collect("prior.mean", out);
    prior_logvar_head_.collect("prior.logvar", out);
    if (cfg_.image()) {
      dec_fc_.collect("dec.fc", out);
      for (size_t i = 0; i < deconvs_.size(); ++i)
        deconvs_[i].collect("dec.deconv" + std::to_string(i), out);
    } else {
      dec_ts1_.collect("dec.ts1", out);
      dec_ts2_.collect("dec.ts2", out);
      dec_ts3_.collect("dec.ts3", out);
    }
    return out;
  }

  std::vector<ad::Var> parameters() const {
    std::vector<ad::Var> out;
    for (auto& [name, v] : named_parameters()) out.push_back(v);
    return out;
  }

 private:
  ad::Var frame_features(const ad::Var& frames) const {
    if (cfg_.image()) {
      ad::Var h = frames;
      for (const auto& conv : convs_) h = ad::leaky_relu(conv(h));
      return ad::leaky_relu(enc_fc_(h));
    }
    ad::Var h = ad::relu(ts_fc1_(frames));
    h = ad::relu(ts_fc2_(h));
    return ad::relu(ts_fc3_(h));
  }

  ModelConfig cfg_;

  std::vector<nn::Conv2d> convs_;
  nn::Linear enc_fc_;
  nn::Linear ts_fc1_, ts_fc2_, ts_fc3_;
  nn::LstmCell lstm_fwd_, lstm_bwd_;
  nn::Linear s_mean_head_, s_logvar_head_;
  nn::RnnCell dyn_rnn_;
  nn::Linear d_mean_head_, d_logvar_head_;
  nn::LstmCell prior_cell_;
  nn::Linear prior_mean_head_, prior_logvar_head_;
  nn::Linear dec_fc_;
  std::vector<nn::ConvT2d> deconvs_;
  nn::Linear dec_ts1_, dec_ts2_, dec_ts3_;
};

}  // namespace seqdis
