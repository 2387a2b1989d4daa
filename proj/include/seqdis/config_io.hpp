#pragma once

#include <string>

#include "seqdis/io.hpp"
#include "seqdis/model.hpp"
#include "seqdis/objective.hpp"
#include "seqdis/views.hpp"

namespace seqdis {

enum class ViewTrick { predictive, plain_reparam };

inline const char* to_string(ViewTrick t) {
  return t == ViewTrick::predictive ? "predictive" : "plain-reparam";
}

inline ViewTrick parse_view_trick(const std::string& s) {
  if (s == "predictive") return ViewTrick::predictive;
  if (s == "plain-reparam") return ViewTrick::plain_reparam;
  throw ConfigError("unknown view trick: " + s);
}

inline const char* to_string(NegativePartner p) {
  return p == NegativePartner::prior ? "prior" : "anchor";
}

inline NegativePartner parse_negative_partner(const std::string& s) {
  if (s == "prior") return NegativePartner::prior;
  if (s == "anchor") return NegativePartner::anchor;
  throw ConfigError("unknown negative dynamics source: " + s);
}

struct TrainConfig {
  LossWeights weights;
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 100;
  NegativeMode negative_mode = NegativeMode::farthest_third;
  ViewTrick view_trick = ViewTrick::predictive;
  std::uint64_t seed = 1;
  int warmup_epochs_contrastive = 0;
  bool grad_through_views = false;
  NegativePartner negative_dynamics = NegativePartner::prior;
  bool mse_batch_sum = false;
  int negatives_per_anchor = 0;  // 0 -> 2 * batch_size
  double grad_clip_norm = 0.0;   // 0 disables clipping

  void validate() const {
    weights.validate();
    require(learning_rate > 0.0 && std::isfinite(learning_rate),
            "TrainConfig: learning_rate must be positive");
    require(batch_size >= 1 && epochs >= 1, "TrainConfig: batch_size and epochs positive");
    require(warmup_epochs_contrastive >= 0, "TrainConfig: warmup must be >= 0");
    require(negatives_per_anchor >= 0, "TrainConfig: negatives_per_anchor must be >= 0");
    require(grad_clip_norm >= 0.0, "TrainConfig: grad_clip_norm must be >= 0");
    if (weights.lambda4 > 0.0)
      require(batch_size >= 3, "TrainConfig: contrastive terms need batch_size >= 3");
  }
};

// ---------------------------------------------------------------------------
// kv (de)serialization; these echoes are embedded in checkpoints and run
// directories, and resolving them back must reproduce the run exactly.
// ---------------------------------------------------------------------------

inline std::string ints_to_csv(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::vector<int> csv_to_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<int>(io::parse_int(item, key)));
  return out;
}

inline void model_config_to_kv(const ModelConfig& c, io::KvFile& kv) {
  kv.values["model.static_dim"] = std::to_string(c.static_dim);
  kv.values["model.dynamic_dim"] = std::to_string(c.dynamic_dim);
  kv.values["model.seq_len"] = std::to_string(c.seq_len);
  kv.values["model.frame_shape"] = ints_to_csv(c.frame_shape);
  kv.values["model.recurrent_hidden"] = std::to_string(c.recurrent_hidden);
  kv.values["model.conv_channel_plan"] = ints_to_csv(c.conv_channel_plan);
  kv.values["model.frame_feature_dim"] = std::to_string(c.frame_feature_dim);
  kv.values["model.prior_hidden"] = std::to_string(c.prior_hidden);
}

inline ModelConfig model_config_from_kv(const io::KvFile& kv) {
  ModelConfig c;
  auto geti = [&](const char* k, int dflt) {
    return kv.has(k) ? static_cast<int>(io::parse_int(kv.get(k), k)) : dflt;
  };
  c.static_dim = geti("model.static_dim", c.static_dim);
  c.dynamic_dim = geti("model.dynamic_dim", c.dynamic_dim);
  c.seq_len = geti("model.seq_len", c.seq_len);
  c.frame_shape = csv_to_ints(kv.get_or("model.frame_shape", "3,16,16"), "model.frame_shape");
  c.recurrent_hidden = geti("model.recurrent_hidden", c.recurrent_hidden);
  c.conv_channel_plan =
      csv_to_ints(kv.get_or("model.conv_channel_plan", ""), "model.conv_channel_plan");
  c.frame_feature_dim = geti("model.frame_feature_dim", c.frame_feature_dim);
  c.prior_hidden = geti("model.prior_hidden", c.prior_hidden);
  return c;
}

inline void train_config_to_kv(const TrainConfig& c, io::KvFile& kv) {
  kv.values["train.lambda1"] = io::format_double(c.weights.lambda1);
  kv.values["train.lambda2"] = io::format_double(c.weights.lambda2);
  kv.values["train.lambda3"] = io::format_double(c.weights.lambda3);
  kv.values["train.lambda4"] = io::format_double(c.weights.lambda4);
  kv.values["train.lambda5"] = io::format_double(c.weights.lambda5);
  kv.values["train.tau"] = io::format_double(c.weights.tau);
  kv.values["train.learning_rate"] = io::format_double(c.learning_rate);
  kv.values["train.batch_size"] = std::to_string(c.batch_size);
  kv.values["train.epochs"] = std::to_string(c.epochs);
  kv.values["train.negative_mode"] = to_string(c.negative_mode);
  kv.values["train.view_trick"] = to_string(c.view_trick);
  kv.values["train.seed"] = std::to_string(c.seed);
  kv.values["train.warmup_epochs_contrastive"] = std::to_string(c.warmup_epochs_contrastive);
  kv.values["train.grad_through_views"] = c.grad_through_views ? "true" : "false";
  kv.values["train.negative_dynamics"] = to_string(c.negative_dynamics);
  kv.values["train.mse_batch_sum"] = c.mse_batch_sum ? "true" : "false";
  kv.values["train.negatives_per_anchor"] = std::to_string(c.negatives_per_anchor);
  kv.values["train.grad_clip_norm"] = io::format_double(c.grad_clip_norm);
}

inline TrainConfig train_config_from_kv(const io::KvFile& kv) {
  TrainConfig c;
  auto getd = [&](const char* k, double dflt) {
    return kv.has(k) ? io::parse_double(kv.get(k), k) : dflt;
  };
  auto geti = [&](const char* k, long dflt) { return kv.has(k) ? io::parse_int(kv.get(k), k) : dflt; };
  auto getb = [&](const char* k, bool dflt) {
    return kv.has(k) ? io::parse_bool(kv.get(k), k) : dflt;
  };
  c.weights.lambda1 = getd("train.lambda1", c.weights.lambda1);
  c.weights.lambda2 = getd("train.lambda2", c.weights.lambda2);
  c.weights.lambda3 = getd("train.lambda3", c.weights.lambda3);
  c.weights.lambda4 = getd("train.lambda4", c.weights.lambda4);
  c.weights.lambda5 = getd("train.lambda5", c.weights.lambda5);
  c.weights.tau = getd("train.tau", c.weights.tau);
  c.learning_rate = getd("train.learning_rate", c.learning_rate);
  c.batch_size = static_cast<int>(geti("train.batch_size", c.batch_size));
  c.epochs = static_cast<int>(geti("train.epochs", c.epochs));
  if (kv.has("train.negative_mode"))
    c.negative_mode = parse_negative_mode(kv.get("train.negative_mode"));
  if (kv.has("train.view_trick")) c.view_trick = parse_view_trick(kv.get("train.view_trick"));
  c.seed = static_cast<std::uint64_t>(geti("train.seed", static_cast<long>(c.seed)));
  c.warmup_epochs_contrastive =
      static_cast<int>(geti("train.warmup_epochs_contrastive", c.warmup_epochs_contrastive));
  c.grad_through_views = getb("train.grad_through_views", c.grad_through_views);
  if (kv.has("train.negative_dynamics"))
    c.negative_dynamics = parse_negative_partner(kv.get("train.negative_dynamics"));
  c.mse_batch_sum = getb("train.mse_batch_sum", c.mse_batch_sum);
  c.negatives_per_anchor =
      static_cast<int>(geti("train.negatives_per_anchor", c.negatives_per_anchor));
  c.grad_clip_norm = getd("train.grad_clip_norm", c.grad_clip_norm);
  return c;
}

}  // namespace seqdis
