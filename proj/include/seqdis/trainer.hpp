#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "seqdis/config_io.hpp"
#include "seqdis/model.hpp"
#include "seqdis/objective.hpp"
#include "seqdis/optim.hpp"
#include "seqdis/views.hpp"

namespace seqdis {

constexpr std::uint32_t kCheckpointMagic = 0x5351434B;  // "SQCK"
constexpr std::uint32_t kCheckpointVersion = 1;

// Optimization loop: encode -> pairwise KL matrices -> view sampling ->
// objective -> Adam update. Every random decision derives from
// (seed, epoch, step), so a resumed run continues the exact trajectory of an
// uninterrupted one and a rerun from the echoed config reproduces the
// metrics log bitwise.
class Trainer {
 public:
  Trainer(ModelConfig mcfg, TrainConfig tcfg, std::string run_dir)
      : mcfg_(std::move(mcfg)), tcfg_(tcfg), run_dir_(std::move(run_dir)) {
    mcfg_.validate();
    tcfg_.validate();
    std::filesystem::create_directories(run_dir_);
    model_ = SequenceModel(mcfg_, tcfg_.seed);
    params_ = model_.parameters();
    opt_.lr = tcfg_.learning_rate;
    opt_.init(params_);
  }

  static Trainer resume(const std::string& ckpt_path, const std::string& run_dir) {
    io::BinReader r(ckpt_path);
    if (r.u32() != kCheckpointMagic) throw IoError("not a checkpoint (bad magic): " + ckpt_path);
    const std::uint32_t ver = r.u32();
    if (ver != kCheckpointVersion)
      throw IoError("checkpoint version mismatch: file has v" + std::to_string(ver) +
                    ", expected v" + std::to_string(kCheckpointVersion));
    io::KvFile kv = io::KvFile::parse_text(r.str());
    Trainer t(model_config_from_kv(kv), train_config_from_kv(kv), run_dir);

    const std::uint64_t n_params = r.u64();
    auto named = t.model_.named_parameters();
    if (n_params != named.size()) throw IoError("checkpoint incompatible: parameter count");
    for (auto& [name, var] : named) {
      const std::string fname = r.str();
      Mat m = r.mat();
      if (fname != name) throw IoError("checkpoint incompatible: expected tensor '" + name +
                                       "', found '" + fname + "'");
      if (m.rows() != var->v.rows() || m.cols() != var->v.cols())
        throw IoError("checkpoint incompatible: tensor shape for '" + name + "'");
      var->v = m;
    }
    t.opt_.t = r.i64();
    for (size_t i = 0; i < t.params_.size(); ++i) {
      t.opt_.m[i] = r.mat();
      t.opt_.v[i] = r.mat();
    }
    t.epoch_ = static_cast<int>(r.i64());
    t.step_ = r.i64();
    if (!r.at_eof()) throw IoError("corrupt checkpoint (trailing bytes): " + ckpt_path);
    return t;
  }

  void save_checkpoint(const std::string& path) const {
    io::BinWriter w(path);
    w.u32(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    io::KvFile kv;
    model_config_to_kv(mcfg_, kv);
    train_config_to_kv(tcfg_, kv);
    w.str(kv.serialize());
    auto named = model_.named_parameters();
    w.u64(named.size());
    for (auto& [name, var] : named) {
      w.str(name);
      w.mat(var->v);
    }
    w.i64(opt_.t);
    for (size_t i = 0; i < params_.size(); ++i) {
      w.mat(opt_.m[i]);
      w.mat(opt_.v[i]);
    }
    w.i64(epoch_);
    w.i64(step_);
  }

  // Runs the remaining epochs. On divergence the last end-of-epoch
  // checkpoint is left in place and the exception propagates.
  LossBreakdown train(const SequenceBatch& data) {
    data.validate();
    require(data.size() >= 1, "train: dataset is empty");
    require(data.seq_len == mcfg_.seq_len && data.frame_elems == mcfg_.frame_elems(),
            "train: dataset shape does not match model config");

    std::ofstream metrics(metrics_path(), step_ == 0 ? std::ios::trunc : std::ios::app);
    if (!metrics) throw IoError("cannot open metrics log: " + metrics_path());

    LossBreakdown last;
    while (epoch_ < tcfg_.epochs) {
      std::vector<int> order(data.size());
      std::iota(order.begin(), order.end(), 0);
      Rng shuffle_rng(derive_seed(tcfg_.seed, {tag_hash("shuffle"),
                                               static_cast<std::uint64_t>(epoch_)}));
      for (int i = data.size() - 1; i > 0; --i)
        std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

      for (int at = 0; at < data.size(); at += tcfg_.batch_size) {
        const int nb = std::min<int>(tcfg_.batch_size, data.size() - at);
        std::vector<int> batch(order.begin() + at, order.begin() + at + nb);
        try {
          last = train_step(data, batch);
        } catch (const TrainingDivergence& e) {
          std::fprintf(stderr,
                       "[seqdis] training diverged at step %ld (%s); last checkpoint kept\n",
                       step_, e.what());
          throw;
        }
        metrics << step_ << " " << epoch_ << " " << io::format_double(last.recon) << " "
                << io::format_double(last.kl_static) << " " << io::format_double(last.kl_dynamic)
                << " " << io::format_double(last.nce_static) << " "
                << io::format_double(last.nce_dynamic) << " "
                << io::format_double(last.mi_static_dynamic) << " "
                << io::format_double(last.total) << "\n";
        ++step_;
      }
      ++epoch_;
      save_checkpoint(checkpoint_path());
    }
    return last;
  }

  SequenceModel& model() { return model_; }
  const SequenceModel& model() const { return model_; }
  const ModelConfig& model_config() const { return mcfg_; }
  const TrainConfig& train_config() const { return tcfg_; }
  int epoch() const { return epoch_; }
  long global_step() const { return step_; }

  void set_total_epochs(int epochs) {
    require(epochs >= epoch_, "set_total_epochs: target below current epoch");
    tcfg_.epochs = epochs;
  }

  std::string checkpoint_path() const { return run_dir_ + "/checkpoint.bin"; }
  std::string metrics_path() const { return run_dir_ + "/metrics.log"; }

  struct ObjectiveGraph {
    ad::Var total;
    LossBreakdown values;
  };

  // Builds the full step objective as a graph over the model parameters;
  // deterministic given (config seed, step). Validates finiteness and
  // records the canonical weighted total.
  ObjectiveGraph build_objective(const SequenceBatch& data, const std::vector<int>& batch_idx,
                                 int epoch, long step) const {
    const int nb = static_cast<int>(batch_idx.size());
    const int ds = mcfg_.static_dim;
    const int dd = mcfg_.dynamic_dim;
    const int T = mcfg_.seq_len;

    Mat xb(nb, data.data.cols());
    for (int r = 0; r < nb; ++r) xb.row(r) = data.data.row(batch_idx[r]);
    ad::Var x = ad::constant(xb);

    PosteriorGraph pg = model_.encode_g(x);
    if (!pg.s_mean->v.allFinite() || !pg.s_logvar->v.allFinite())
      throw TrainingDivergence("encoder_output", std::numeric_limits<double>::quiet_NaN());

    Rng base_rng(derive_seed(tcfg_.seed, {tag_hash("base-noise"),
                                          static_cast<std::uint64_t>(step)}));
    Mat s_noise = base_rng.normal_mat(nb, ds);
    ad::Var s_samp = reparam_g(pg.s_mean, pg.s_logvar, s_noise);
    std::vector<ad::Var> d_samp(T);
    for (int t = 0; t < T; ++t)
      d_samp[t] = reparam_g(pg.d_mean[t], pg.d_logvar[t], base_rng.normal_mat(nb, dd));

    PriorGraph prior = model_.prior_given_g(nb, d_samp);
    ad::Var xhat = model_.decode_g(s_samp, d_samp);

    ad::Var recon = objective::recon_g(xhat, x, tcfg_.mse_batch_sum);
    ad::Var kls = objective::mean_rows_g(objective::kl_rows_std_g(pg.s_mean, pg.s_logvar));
    ad::Var kld_rows = objective::kl_rows_g(pg.d_mean[0], pg.d_logvar[0], prior.mean[0],
                                            prior.logvar[0]);
    for (int t = 1; t < T; ++t)
      kld_rows = ad::add(kld_rows, objective::kl_rows_g(pg.d_mean[t], pg.d_logvar[t],
                                                        prior.mean[t], prior.logvar[t]));
    ad::Var kld = objective::mean_rows_g(kld_rows);

    ad::Var d_samp_flat = ad::concat_cols(d_samp);
    ad::Var mi = objective::mi_mws_g(s_samp, pg.s_mean, pg.s_logvar, d_samp_flat,
                                     ad::concat_cols(pg.d_mean), ad::concat_cols(pg.d_logvar));

    const bool contrastive = tcfg_.weights.lambda4 > 0.0 &&
                             epoch >= tcfg_.warmup_epochs_contrastive && nb >= 3;
    ad::Var nce_s = ad::scalar(0.0);
    ad::Var nce_d = ad::scalar(0.0);
    if (contrastive) build_contrastive_terms(pg, s_samp, d_samp_flat, nb, step, nce_s, nce_d);

    const LossWeights& w = tcfg_.weights;
    ObjectiveGraph out;
    out.total = ad::add(
        ad::sub(ad::add(ad::add(ad::scale(recon, w.lambda1), ad::scale(kls, w.lambda2)),
                        ad::scale(kld, w.lambda3)),
                ad::scale(ad::add(nce_s, nce_d), w.lambda4)),
        ad::scale(mi, w.lambda5));
    out.values = total_objective(w, recon->v(0, 0), kls->v(0, 0), kld->v(0, 0), nce_s->v(0, 0),
                                 nce_d->v(0, 0), mi->v(0, 0));
    return out;
  }

 private:
  static ad::Var reparam_g(const ad::Var& mean, const ad::Var& logvar, const Mat& noise) {
    return ad::add(mean, ad::mul(ad::exp_(ad::scale(logvar, 0.5)), ad::constant(noise)));
  }

  LossBreakdown train_step(const SequenceBatch& data, const std::vector<int>& batch_idx) {
    ObjectiveGraph obj = build_objective(data, batch_idx, epoch_, step_);
    LossBreakdown b = obj.values;

    ad::backward(obj.total);
    if (tcfg_.grad_clip_norm > 0.0) {
      const double norm = clip_gradients(params_, tcfg_.grad_clip_norm);
      if (norm > tcfg_.grad_clip_norm)
        std::fprintf(stderr, "[seqdis] grad clip fired at step %ld (norm %.3f)\n", step_, norm);
    }
    opt_.step(params_);
    ad::zero_grad(params_);
    return b;
  }

  // Assembles both infoNCE terms. View row layout: the nb positives first,
  // then negatives grouped per anchor (anchor i's negatives occupy rows
  // nb + i*count .. nb + (i+1)*count - 1).
  void build_contrastive_terms(const PosteriorGraph& pg, const ad::Var& s_samp,
                               const ad::Var& d_samp_flat, int nb, long step, ad::Var& nce_s,
                               ad::Var& nce_d) const {
    const int ds = mcfg_.static_dim;
    const int dd = mcfg_.dynamic_dim;
    const int T = mcfg_.seq_len;
    const int count = resolve_negative_count(
        ViewConfig{tcfg_.negative_mode, tcfg_.negative_dynamics, tcfg_.negatives_per_anchor},
        nb);
    const int rows = nb * (1 + count);

    // pools from detached posterior parameters
    std::vector<SequencePosterior> posts = model_.split_posteriors(pg);
    std::vector<DiagonalGaussian> statics(nb);
    std::vector<GaussianSequence> chains(nb);
    for (int i = 0; i < nb; ++i) {
      statics[i] = posts[i].static_posterior;
      chains[i] = posts[i].dynamic_posterior;
    }
    KlDistanceMatrix d_static = pairwise_kl_matrix(statics);
    KlDistanceMatrix d_dynamic = pairwise_kl_matrix_sequences(chains);

    const std::uint64_t vseed =
        derive_seed(tcfg_.seed, {tag_hash("views"), static_cast<std::uint64_t>(step)});
    std::vector<ViewPools> pools_s(nb), pools_d(nb);
    for (int i = 0; i < nb; ++i) {
      pools_s[i] = partition_thirds(d_static.values.row(i), i, tcfg_.negative_mode,
                                    derive_seed(vseed, {tag_hash("pool-s"),
                                                        static_cast<std::uint64_t>(i)}));
      pools_d[i] = partition_thirds(d_dynamic.values.row(i), i, tcfg_.negative_mode,
                                    derive_seed(vseed, {tag_hash("pool-d"),
                                                        static_cast<std::uint64_t>(i)}));
    }

    Rng vrng(vseed);
    auto draw_picks = [&](const std::vector<ViewPools>& pools) {
      std::vector<int> picks(rows);
      for (int i = 0; i < nb; ++i)
        picks[i] = pools[i].positive_pool[vrng.uniform_int(
            static_cast<int>(pools[i].positive_pool.size()))];
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < count; ++j)
          picks[nb + i * count + j] = pools[i].negative_pool[vrng.uniform_int(
              static_cast<int>(pools[i].negative_pool.size()))];
      return picks;
    };
    std::vector<int> s_picks = draw_picks(pools_s);
    std::vector<int> d_picks = draw_picks(pools_d);

    Mat sv_latent_noise = vrng.normal_mat(rows, ds);
    Mat sv_dyn_noise = vrng.normal_mat(rows, T * dd);
    Mat sv_reenc_noise = vrng.normal_mat(rows, ds);
    Mat dv_chain_noise = vrng.normal_mat(rows, T * dd);
    Mat dv_static_noise = vrng.normal_mat(rows, ds);
    Mat dv_reenc_noise = vrng.normal_mat(rows, T * dd);

    // anchor index of each view row (positives row i -> anchor i)
    std::vector<int> row_anchor(rows);
    for (int i = 0; i < nb; ++i) row_anchor[i] = i;
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < count; ++j) row_anchor[nb + i * count + j] = i;

    ad::Var s_views, d_views_flat;
    {
      // With grad_through_views off, view construction is pure data
      // generation; gradients enter only through the re-encoding below.
      std::optional<ad::NoGradGuard> guard;
      if (!tcfg_.grad_through_views) guard.emplace();

      if (tcfg_.view_trick == ViewTrick::plain_reparam) {
        s_views = reparam_g(ad::gather_rows(pg.s_mean, s_picks),
                            ad::gather_rows(pg.s_logvar, s_picks), sv_latent_noise);
        std::vector<ad::Var> chain(T);
        for (int t = 0; t < T; ++t)
          chain[t] = reparam_g(ad::gather_rows(pg.d_mean[t], d_picks),
                               ad::gather_rows(pg.d_logvar[t], d_picks),
                               dv_chain_noise.middleCols(static_cast<long>(t) * dd, dd));
        d_views_flat = ad::concat_cols(chain);
      } else {
        // ---- static views: s~ from pools, dynamics from the prior ----
        ad::Var s_tilde = reparam_g(ad::gather_rows(pg.s_mean, s_picks),
                                    ad::gather_rows(pg.s_logvar, s_picks), sv_latent_noise);
        auto [prior_g, prior_path] = model_.prior_rollout_g(rows, T, sv_dyn_noise);
        std::vector<ad::Var> d_partner = prior_path;
        if (tcfg_.negative_dynamics == NegativePartner::anchor) {
          // negatives reuse the anchor's posterior dynamics instead
          std::vector<int> neg_anchor(row_anchor.begin() + nb, row_anchor.end());
          for (int t = 0; t < T; ++t) {
            ad::Var anchor_part =
                reparam_g(ad::gather_rows(pg.d_mean[t], neg_anchor),
                          ad::gather_rows(pg.d_logvar[t], neg_anchor),
                          sv_dyn_noise.block(nb, static_cast<long>(t) * dd, rows - nb, dd));
            d_partner[t] =
                ad::concat_rows({ad::slice_rows(prior_path[t], 0, nb), anchor_part});
          }
        }
        ad::Var x_static_views = model_.decode_g(s_tilde, d_partner);

        // ---- dynamic views: chains from pools, statics from p(s) ----
        std::vector<ad::Var> d_tilde(T);
        for (int t = 0; t < T; ++t)
          d_tilde[t] = reparam_g(ad::gather_rows(pg.d_mean[t], d_picks),
                                 ad::gather_rows(pg.d_logvar[t], d_picks),
                                 dv_chain_noise.middleCols(static_cast<long>(t) * dd, dd));
        ad::Var s_partner = ad::constant(dv_static_noise);  // N(0, I) draw
        if (tcfg_.negative_dynamics == NegativePartner::anchor) {
          std::vector<int> neg_anchor(row_anchor.begin() + nb, row_anchor.end());
          ad::Var anchor_s =
              reparam_g(ad::gather_rows(pg.s_mean, neg_anchor),
                        ad::gather_rows(pg.s_logvar, neg_anchor),
                        dv_static_noise.bottomRows(rows - nb));
          s_partner = ad::concat_rows(
              {ad::constant(Mat(dv_static_noise.topRows(nb))), anchor_s});
        }
        ad::Var x_dynamic_views = model_.decode_g(s_partner, d_tilde);

        if (guard) guard.reset();  // re-encoding is gradient-tracked

        PosteriorGraph pg_sv = model_.encode_g(x_static_views);
        s_views = reparam_g(pg_sv.s_mean, pg_sv.s_logvar, sv_reenc_noise);

        PosteriorGraph pg_dv = model_.encode_g(x_dynamic_views);
        std::vector<ad::Var> reenc_chain(T);
        for (int t = 0; t < T; ++t)
          reenc_chain[t] = reparam_g(pg_dv.d_mean[t], pg_dv.d_logvar[t],
                                     dv_reenc_noise.middleCols(static_cast<long>(t) * dd, dd));
        d_views_flat = ad::concat_cols(reenc_chain);
      }
    }

    ad::Var nce_s_sum = ad::scalar(0.0);
    ad::Var nce_d_sum = ad::scalar(0.0);
    for (int i = 0; i < nb; ++i) {
      ad::Var u_s = ad::slice_rows(s_samp, i, 1);
      ad::Var pos_s = ad::slice_rows(s_views, i, 1);
      ad::Var negs_s = ad::slice_rows(s_views, nb + i * count, count);
      nce_s_sum = ad::add(nce_s_sum, objective::info_nce_g(u_s, pos_s, negs_s, tcfg_.weights.tau));

      ad::Var u_d = ad::slice_rows(d_samp_flat, i, 1);
      ad::Var pos_d = ad::slice_rows(d_views_flat, i, 1);
      ad::Var negs_d = ad::slice_rows(d_views_flat, nb + i * count, count);
      nce_d_sum = ad::add(nce_d_sum, objective::info_nce_g(u_d, pos_d, negs_d, tcfg_.weights.tau));
    }
    nce_s = ad::scale(nce_s_sum, 1.0 / nb);
    nce_d = ad::scale(nce_d_sum, 1.0 / nb);
  }

  ModelConfig mcfg_;
  TrainConfig tcfg_;
  std::string run_dir_;
  SequenceModel model_;
  std::vector<ad::Var> params_;
  Adam opt_;
  int epoch_ = 0;
  long step_ = 0;
};

}  // namespace seqdis
