// Command-line front end: dataset generation, training, evaluation, swaps,
// view analysis and the negative-mode ablation, driven by declarative
// key = value config files (see README for the key reference).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "seqdis/eval.hpp"
#include "seqdis/runconfig.hpp"
#include "seqdis/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seqdis;

namespace {

struct CommonOpts {
  std::string preset;
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  long seed = -1;
};

std::map<std::string, std::string> parse_overrides(const CommonOpts& o) {
  std::map<std::string, std::string> ov;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + s);
    ov[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (o.seed >= 0) {
    ov["train.seed"] = std::to_string(o.seed);
    ov["data.seed"] = std::to_string(o.seed);
    ov["eval.seed"] = std::to_string(o.seed);
  }
  return ov;
}

std::string run_root() {
  const char* env = std::getenv("SEQDIS_RUN_ROOT");
  return env && *env ? env : ".";
}

std::string resolve_run_dir(const CommonOpts& o, const RunConfig& rc, const char* stem) {
  if (!o.out.empty()) return o.out;
  return run_root() + "/" + stem + "-seed" + std::to_string(rc.train().seed);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << text;
}

void echo_configs(const CommonOpts& o, const RunConfig& rc, const std::string& dir) {
  fs::create_directories(dir);
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + o.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    write_text(dir + "/config_input.cfg", ss.str());
  }
  write_text(dir + "/config_resolved.cfg", rc.serialize());
}

LabeledDataset dataset_for(const RunConfig& rc, const std::string& data_flag) {
  const std::string path = !data_flag.empty() ? data_flag : rc.data_path();
  if (!path.empty()) return load_dataset(path);
  return generate_from_config(rc);
}

json lacc_json(const LaccTable& t) {
  return json{{"static_features",
               {{"static_lacc", t.acc_s_static},
                {"dynamic_lacc", t.acc_s_dynamic},
                {"gap", t.gap_static_features}}},
              {"dynamic_features",
               {{"static_lacc", t.acc_d_static},
                {"dynamic_lacc", t.acc_d_dynamic},
                {"gap", t.gap_dynamic_features}}}};
}

void write_thirds_csv(const ViewQualityReport& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << "third,bin_low,bin_high,count\n";
  static const char* names[3] = {"first", "middle", "last"};
  for (int part = 0; part < 3; ++part)
    for (int b = 0; b < ViewQualityReport::kBins; ++b) {
      const double lo = ViewQualityReport::kBinMax * b / ViewQualityReport::kBins;
      const double hi = ViewQualityReport::kBinMax * (b + 1) / ViewQualityReport::kBins;
      out << names[part] << "," << io::format_double(lo) << "," << io::format_double(hi) << ","
          << v.histogram[part][b] << "\n";
    }
}

void write_report(const EvalReport& r, const std::string& dir) {
  fs::create_directories(dir);
  json j{{"swap_accuracy", r.acc},
         {"inception_score", r.is_score},
         {"intra_entropy", r.intra_entropy},
         {"inter_entropy", r.inter_entropy},
         {"eer_static", r.eer_static},
         {"eer_dynamic", r.eer_dynamic},
         {"latent_classification", lacc_json(r.lacc)},
         {"judge_holdout_accuracy", r.judge_holdout_accuracy},
         {"degenerate_entropy_set", r.degenerate_entropy_set},
         {"view_quality",
          {{"acc_static_from_positive_views", r.views.acc_static_from_positive_views},
           {"acc_dynamic_from_prior_dynamics", r.views.acc_dynamic_from_prior_dynamics},
           {"static_mean_phi_by_third",
            {r.views.static_mean[0], r.views.static_mean[1], r.views.static_mean[2]}},
           {"dynamic_mean_phi_by_third",
            {r.views.dynamic_mean[0], r.views.dynamic_mean[1], r.views.dynamic_mean[2]}}}}};
  write_text(dir + "/report.json", j.dump(2) + "\n");

  std::ofstream lacc(dir + "/lacc.csv");
  lacc << "features,static_lacc,dynamic_lacc,gap\n";
  lacc << "static," << r.lacc.acc_s_static << "," << r.lacc.acc_s_dynamic << ","
       << r.lacc.gap_static_features << "\n";
  lacc << "dynamic," << r.lacc.acc_d_static << "," << r.lacc.acc_d_dynamic << ","
       << r.lacc.gap_dynamic_features << "\n";

  write_thirds_csv(r.views, dir + "/thirds_histogram.csv");
}

int cmd_generate_data(const CommonOpts& o, const std::string& csv_path) {
  RunConfig rc = resolve_run_config(o.preset, o.config_path, parse_overrides(o));
  LabeledDataset ds = generate_from_config(rc);
  std::string out = o.out.empty() ? "dataset.bin" : o.out;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_dataset(ds, out);
  if (!csv_path.empty()) {
    if (rc.data_kind() != "time-series")
      throw ConfigError("--csv export is only available for time-series datasets");
    export_timeseries_csv(ds.train, csv_path);
  }
  std::cout << "wrote " << out << ": " << ds.train.size() << " train / " << ds.test.size()
            << " test sequences (" << rc.data_kind() << ")\n";
  return 0;
}

int cmd_train(const CommonOpts& o, const std::string& data_flag, const std::string& ckpt,
              int epochs_override) {
  RunConfig rc = resolve_run_config(o.preset, o.config_path, parse_overrides(o));
  const std::string run_dir = resolve_run_dir(o, rc, "run");
  echo_configs(o, rc, run_dir);
  LabeledDataset ds = dataset_for(rc, data_flag);

  std::optional<Trainer> trainer;
  if (!ckpt.empty()) {
    trainer.emplace(Trainer::resume(ckpt, run_dir));
    if (epochs_override > 0) trainer->set_total_epochs(epochs_override);
  } else {
    TrainConfig tc = rc.train();
    if (epochs_override > 0) tc.epochs = epochs_override;
    trainer.emplace(rc.model(), tc, run_dir);
  }

  LossBreakdown last = trainer->train(ds.train);
  std::cout << "trained " << trainer->epoch() << " epochs (" << trainer->global_step()
            << " steps)\n"
            << "final total " << io::format_double(last.total) << " (recon "
            << io::format_double(last.recon) << ")\n"
            << "checkpoint: " << trainer->checkpoint_path() << "\n"
            << "metrics:    " << trainer->metrics_path() << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& data_flag, const std::string& ckpt,
             const std::string& report_dir) {
  RunConfig rc = resolve_run_config(o.preset, o.config_path, parse_overrides(o));
  const std::string dir = report_dir.empty() ? resolve_run_dir(o, rc, "eval") : report_dir;
  Trainer trainer = Trainer::resume(ckpt, dir);
  LabeledDataset ds = dataset_for(rc, data_flag);
  EvalReport r = evaluate_model(trainer.model(), ds, rc.eval_seed(), rc.eval_classifier());
  write_report(r, dir);
  std::cout << "swap accuracy      " << r.acc << "\n"
            << "inception score    " << r.is_score << "  H(y|x) " << r.intra_entropy << "  H(y) "
            << r.inter_entropy << "\n"
            << "EER static/dynamic " << r.eer_static << " / " << r.eer_dynamic << "\n"
            << "L-Acc gaps         static " << r.lacc.gap_static_features << "  dynamic "
            << r.lacc.gap_dynamic_features << "\n"
            << "report: " << dir << "/report.json\n";
  return 0;
}

int cmd_swap(const CommonOpts& o, const std::string& data_flag, const std::string& ckpt,
             int src, int tgt) {
  RunConfig rc = resolve_run_config(o.preset, o.config_path, parse_overrides(o));
  const std::string dir = resolve_run_dir(o, rc, "swap");
  Trainer trainer = Trainer::resume(ckpt, dir);
  LabeledDataset ds = dataset_for(rc, data_flag);
  require(src >= 0 && src < ds.test.size() && tgt >= 0 && tgt < ds.test.size(),
          "swap: --src/--tgt out of range of the test split");

  Mat a = ds.test.sequence(src), b = ds.test.sequence(tgt);
  SwapResult r = swap_generate(trainer.model(), a, b);
  fs::create_directories(dir);
  if (ds.frame_shape.size() == 3) {
    io::write_ppm(dir + "/swap_grid.ppm",
                  {a, b, r.recon_src, r.recon_tgt, r.content_swap, r.pose_swap},
                  ds.frame_shape[0], ds.frame_shape[1], ds.frame_shape[2]);
    std::cout << "wrote " << dir << "/swap_grid.ppm (rows: src, tgt, recon src, recon tgt, "
                 "content swap, pose swap)\n";
  } else {
    SequenceBatch flat;
    flat.seq_len = ds.test.seq_len;
    flat.frame_elems = ds.test.frame_elems;
    flat.data.resize(4, ds.test.data.cols());
    const Mat* mats[4] = {&r.recon_src, &r.recon_tgt, &r.content_swap, &r.pose_swap};
    for (int i = 0; i < 4; ++i)
      for (int t = 0; t < flat.seq_len; ++t)
        flat.data.row(i).segment(static_cast<long>(t) * flat.frame_elems, flat.frame_elems) =
            mats[i]->row(t);
    export_timeseries_csv(flat, dir + "/swap_sequences.csv");
    std::cout << "wrote " << dir << "/swap_sequences.csv\n";
  }
  return 0;
}

int cmd_analyze_views(const CommonOpts& o, const std::string& data_flag,
                      const std::string& ckpt) {
  RunConfig rc = resolve_run_config(o.preset, o.config_path, parse_overrides(o));
  const std::string dir = resolve_run_dir(o, rc, "views");
  Trainer trainer = Trainer::resume(ckpt, dir);
  LabeledDataset ds = dataset_for(rc, data_flag);
  ViewQualityReport v =
      analyze_view_quality(trainer.model(), ds.test, rc.eval_seed(), rc.eval_classifier());
  fs::create_directories(dir);
  write_thirds_csv(v, dir + "/thirds_histogram.csv");
  json j{{"acc_static_from_positive_views", v.acc_static_from_positive_views},
         {"acc_dynamic_from_prior_dynamics", v.acc_dynamic_from_prior_dynamics},
         {"static_mean_phi_by_third", {v.static_mean[0], v.static_mean[1], v.static_mean[2]}},
         {"dynamic_mean_phi_by_third",
          {v.dynamic_mean[0], v.dynamic_mean[1], v.dynamic_mean[2]}}};
  write_text(dir + "/view_quality.json", j.dump(2) + "\n");
  std::cout << "mean phi by third (static space): " << v.static_mean[0] << " "
            << v.static_mean[1] << " " << v.static_mean[2] << "\n"
            << "wrote " << dir << "/thirds_histogram.csv\n";
  return 0;
}

int cmd_ablate(const CommonOpts& o, const std::string& data_flag) {
  RunConfig rc = resolve_run_config(o.preset, o.config_path, parse_overrides(o));
  const std::string dir = resolve_run_dir(o, rc, "ablate");
  echo_configs(o, rc, dir);
  LabeledDataset ds = dataset_for(rc, data_flag);
  auto rows = run_negative_mode_ablation(rc.model(), rc.train(), ds, dir);
  std::ofstream csv(dir + "/ablation.csv");
  csv << "negative_mode,swap_accuracy\n";
  std::cout << "negative_mode            swap_accuracy\n";
  for (const auto& r : rows) {
    csv << to_string(r.mode) << "," << io::format_double(r.swap_accuracy) << "\n";
    std::printf("%-24s %.4f\n", to_string(r.mode), r.swap_accuracy);
  }
  std::cout << "wrote " << dir << "/ablation.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"static/dynamic sequence disentanglement workbench"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string data_flag, ckpt, report_dir, csv_path;
  int src = 0, tgt = 1, epochs_override = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--preset", o.preset,
                    "configuration preset (shapes-tiny, sprites-like, mug-like, timeseries)");
    cmd->add_option("--config", o.config_path, "key = value config file");
    cmd->add_option("--set", o.sets, "override a single config key (key=value), repeatable");
    cmd->add_option("--seed", o.seed, "seed for data, training and evaluation");
    cmd->add_option("--out", o.out, "output path / run directory");
  };

  auto* gen = app.add_subcommand("generate-data", "generate a synthetic labeled dataset");
  add_common(gen);
  gen->add_option("--csv", csv_path, "also export the train split as CSV (time series only)");

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train);
  train->add_option("--data", data_flag, "dataset file (defaults to data.path or generation)");
  train->add_option("--checkpoint", ckpt, "resume from this checkpoint");
  train->add_option("--epochs", epochs_override, "override the total epoch count");
  std::string negative_mode, view_trick, classifier;
  train->add_option("--negative-mode", negative_mode,
                    "negative pool rule (random, middle-third, middle-plus-farthest, "
                    "farthest-third)");
  train->add_option("--view-trick", view_trick, "view generation (predictive, plain-reparam)");

  auto* ev = app.add_subcommand("eval", "run the metric suite on a checkpoint");
  add_common(ev);
  ev->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  ev->add_option("--data", data_flag, "dataset file");
  ev->add_option("--report", report_dir, "report output directory");
  ev->add_option("--classifier", classifier,
                 "latent classifier family (linear-margin, tree-ensemble, nearest-neighbor)");

  auto* swap = app.add_subcommand("swap", "generate factor-swapped sequences");
  add_common(swap);
  swap->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  swap->add_option("--data", data_flag, "dataset file");
  swap->add_option("--src", src, "test-split index of the source sequence");
  swap->add_option("--tgt", tgt, "test-split index of the target sequence");

  auto* views = app.add_subcommand("analyze-views", "thirds similarity and view quality");
  add_common(views);
  views->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  views->add_option("--data", data_flag, "dataset file");

  auto* ablate = app.add_subcommand("ablate", "train once per negative mode and compare");
  add_common(ablate);
  ablate->add_option("--data", data_flag, "dataset file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (!negative_mode.empty()) o.sets.push_back("train.negative_mode=" + negative_mode);
  if (!view_trick.empty()) o.sets.push_back("train.view_trick=" + view_trick);
  if (!classifier.empty()) o.sets.push_back("eval.classifier=" + classifier);

  try {
    if (gen->parsed()) return cmd_generate_data(o, csv_path);
    if (train->parsed()) return cmd_train(o, data_flag, ckpt, epochs_override);
    if (ev->parsed()) return cmd_eval(o, data_flag, ckpt, report_dir);
    if (swap->parsed()) return cmd_swap(o, data_flag, ckpt, src, tgt);
    if (views->parsed()) return cmd_analyze_views(o, data_flag, ckpt);
    if (ablate->parsed()) return cmd_ablate(o, data_flag);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
