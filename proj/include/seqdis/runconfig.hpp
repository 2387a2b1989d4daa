#pragma once

#include <optional>
#include <set>
#include <string>

#include "seqdis/classifiers.hpp"
#include "seqdis/config_io.hpp"
#include "seqdis/synth.hpp"

namespace seqdis {

// ---------------------------------------------------------------------------
// One declarative document drives a whole run: data, model, train and eval
// sections. Resolution order: built-in defaults < preset < config file < CLI
// overrides. Unknown keys are rejected with the offending key named.
// ---------------------------------------------------------------------------

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "data.kind", "data.path", "data.static_classes", "data.motion_classes", "data.seq_len",
      "data.frame_size", "data.feature_dim", "data.samples_per_pair", "data.noise_sigma",
      "data.seed",
      "model.static_dim", "model.dynamic_dim", "model.seq_len", "model.frame_shape",
      "model.recurrent_hidden", "model.conv_channel_plan", "model.frame_feature_dim",
      "model.prior_hidden",
      "train.lambda1", "train.lambda2", "train.lambda3", "train.lambda4", "train.lambda5",
      "train.tau", "train.learning_rate", "train.batch_size", "train.epochs",
      "train.negative_mode", "train.view_trick", "train.seed",
      "train.warmup_epochs_contrastive", "train.grad_through_views", "train.negative_dynamics",
      "train.mse_batch_sum", "train.negatives_per_anchor", "train.grad_clip_norm",
      "eval.classifier", "eval.seed"};
  return keys;
}

// Presets: shapes-tiny is the desk-scale configuration sized for minutes of
// CPU training; sprites-like / mug-like / timeseries carry the published
// hyperparameter rows verbatim, applied to the synthetic stand-in datasets.
inline std::string preset_text(const std::string& name) {
  if (name == "shapes-tiny")
    return R"(data.kind = shape-motion
data.static_classes = 6
data.motion_classes = 4
data.seq_len = 8
data.frame_size = 16
data.samples_per_pair = 10
data.seed = 1
model.static_dim = 16
model.dynamic_dim = 4
model.seq_len = 8
model.frame_shape = 3,16,16
model.recurrent_hidden = 48
model.conv_channel_plan = 8,16
model.frame_feature_dim = 48
model.prior_hidden = 16
train.lambda1 = 5
train.lambda2 = 1
train.lambda3 = 1
train.lambda4 = 0.5
train.lambda5 = 1
train.tau = 0.5
train.learning_rate = 0.0015
train.batch_size = 12
train.epochs = 40
train.negative_mode = farthest-third
train.view_trick = predictive
train.seed = 1
)";
  if (name == "sprites-like")
    return R"(data.kind = shape-motion
data.static_classes = 6
data.motion_classes = 4
data.seq_len = 8
data.frame_size = 64
data.samples_per_pair = 10
data.seed = 1
model.static_dim = 256
model.dynamic_dim = 32
model.seq_len = 8
model.frame_shape = 3,64,64
model.recurrent_hidden = 256
model.conv_channel_plan = 32,64,128,256,128
model.frame_feature_dim = 128
model.prior_hidden = 64
train.lambda1 = 10
train.lambda2 = 5
train.lambda3 = 1
train.lambda4 = 5
train.lambda5 = 1
train.tau = 0.5
train.learning_rate = 0.002
train.batch_size = 100
train.epochs = 600
train.seed = 1
)";
  if (name == "mug-like")
    return R"(data.kind = shape-motion
data.static_classes = 6
data.motion_classes = 4
data.seq_len = 15
data.frame_size = 64
data.samples_per_pair = 10
data.seed = 1
model.static_dim = 256
model.dynamic_dim = 64
model.seq_len = 15
model.frame_shape = 3,64,64
model.recurrent_hidden = 256
model.conv_channel_plan = 32,64,128,256,128
model.frame_feature_dim = 128
model.prior_hidden = 64
train.lambda1 = 5
train.lambda2 = 9
train.lambda3 = 1
train.lambda4 = 0.5
train.lambda5 = 2.5
train.tau = 0.5
train.learning_rate = 0.0015
train.batch_size = 16
train.epochs = 600
train.seed = 1
)";
  if (name == "timeseries")
    return R"(data.kind = time-series
data.static_classes = 6
data.motion_classes = 4
data.seq_len = 16
data.feature_dim = 10
data.samples_per_pair = 10
data.noise_sigma = 0.1
data.seed = 1
model.static_dim = 12
model.dynamic_dim = 4
model.seq_len = 16
model.frame_shape = 10
model.recurrent_hidden = 32
model.conv_channel_plan =
model.frame_feature_dim = 32
model.prior_hidden = 16
train.lambda1 = 2.5
train.lambda2 = 7
train.lambda3 = 1
train.lambda4 = 0.1
train.lambda5 = 2.5
train.tau = 0.5
train.learning_rate = 0.001
train.batch_size = 10
train.epochs = 600
train.seed = 1
)";
  throw ConfigError("unknown preset: " + name +
                    " (available: shapes-tiny, sprites-like, mug-like, timeseries)");
}

struct RunConfig {
  io::KvFile kv;

  void reject_unknown_keys() const {
    for (const auto& [k, v] : kv.values)
      if (!known_config_keys().count(k)) throw ConfigError("unknown config key: " + k);
  }

  std::string data_kind() const { return kv.get_or("data.kind", "shape-motion"); }
  std::string data_path() const { return kv.get_or("data.path", ""); }

  ShapeMotionSpec shape_spec() const {
    ShapeMotionSpec s;
    auto geti = [&](const char* k, int d) {
      return kv.has(k) ? static_cast<int>(io::parse_int(kv.get(k), k)) : d;
    };
    s.n_static_classes = geti("data.static_classes", s.n_static_classes);
    s.n_motion_classes = geti("data.motion_classes", s.n_motion_classes);
    s.seq_len = geti("data.seq_len", s.seq_len);
    s.frame_size = geti("data.frame_size", s.frame_size);
    s.samples_per_pair = geti("data.samples_per_pair", s.samples_per_pair);
    s.seed = static_cast<std::uint64_t>(
        geti("data.seed", static_cast<int>(s.seed)));
    return s;
  }

  TimeSeriesSpec ts_spec() const {
    TimeSeriesSpec s;
    auto geti = [&](const char* k, int d) {
      return kv.has(k) ? static_cast<int>(io::parse_int(kv.get(k), k)) : d;
    };
    s.n_static_classes = geti("data.static_classes", s.n_static_classes);
    s.n_motion_classes = geti("data.motion_classes", s.n_motion_classes);
    s.seq_len = geti("data.seq_len", s.seq_len);
    s.feature_dim = geti("data.feature_dim", s.feature_dim);
    s.samples_per_pair = geti("data.samples_per_pair", s.samples_per_pair);
    s.noise_sigma = kv.has("data.noise_sigma")
                        ? io::parse_double(kv.get("data.noise_sigma"), "data.noise_sigma")
                        : s.noise_sigma;
    s.seed = static_cast<std::uint64_t>(geti("data.seed", static_cast<int>(s.seed)));
    return s;
  }

  ModelConfig model() const { return model_config_from_kv(kv); }
  TrainConfig train() const { return train_config_from_kv(kv); }

  ClassifierKind eval_classifier() const {
    return kv.has("eval.classifier") ? parse_classifier_kind(kv.get("eval.classifier"))
                                     : ClassifierKind::linear_margin;
  }
  std::uint64_t eval_seed() const {
    return kv.has("eval.seed")
               ? static_cast<std::uint64_t>(io::parse_int(kv.get("eval.seed"), "eval.seed"))
               : train().seed;
  }

  std::string serialize() const { return kv.serialize(); }
};

inline RunConfig resolve_run_config(const std::string& preset, const std::string& config_path,
                                    const std::map<std::string, std::string>& overrides) {
  RunConfig rc;
  if (!preset.empty()) rc.kv = io::KvFile::parse_text(preset_text(preset));
  if (!config_path.empty()) {
    io::KvFile file = io::KvFile::parse_file(config_path);
    for (const auto& [k, v] : file.values) rc.kv.values[k] = v;
  }
  for (const auto& [k, v] : overrides) rc.kv.values[k] = v;
  rc.reject_unknown_keys();

  // fill cross-section defaults: the model must agree with the data shape
  if (!rc.kv.has("model.seq_len") && rc.kv.has("data.seq_len"))
    rc.kv.values["model.seq_len"] = rc.kv.get("data.seq_len");
  if (!rc.kv.has("model.frame_shape")) {
    if (rc.data_kind() == "shape-motion") {
      const int f = rc.shape_spec().frame_size;
      rc.kv.values["model.frame_shape"] = "3," + std::to_string(f) + "," + std::to_string(f);
    } else {
      rc.kv.values["model.frame_shape"] = std::to_string(rc.ts_spec().feature_dim);
    }
  }
  return rc;
}

inline LabeledDataset generate_from_config(const RunConfig& rc) {
  if (rc.data_kind() == "shape-motion") return gen_shape_motion(rc.shape_spec());
  if (rc.data_kind() == "time-series") return gen_timeseries(rc.ts_spec());
  throw ConfigError("unknown data.kind: " + rc.data_kind());
}

}  // namespace seqdis
