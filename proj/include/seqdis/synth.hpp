#pragma once

#include <string>
#include <vector>

#include "seqdis/io.hpp"
#include "seqdis/model.hpp"

namespace seqdis {

// ---------------------------------------------------------------------------
// Deterministic desk-scale datasets with known static and dynamic factors.
// Shape-motion: a colored glyph (static class) follows a parametric
// trajectory (motion class). Time series: a per-feature offset (static) plus
// a seasonal pattern (dynamic) with additive noise.
// ---------------------------------------------------------------------------

struct ShapeMotionSpec {
  int n_static_classes = 6;
  int n_motion_classes = 4;
  int seq_len = 8;
  int frame_size = 16;
  int samples_per_pair = 10;
  std::uint64_t seed = 1;

  void validate() const {
    require(n_static_classes >= 2 && n_static_classes <= 48,
            "ShapeMotionSpec: static classes in [2, 48]");
    require(n_motion_classes >= 2 && n_motion_classes <= 8,
            "ShapeMotionSpec: motion classes in [2, 8]");
    require(seq_len >= 4, "ShapeMotionSpec: seq_len >= 4");
    require(frame_size == 16 || frame_size == 32 || frame_size == 64,
            "ShapeMotionSpec: frame_size in {16, 32, 64}");
    require(samples_per_pair >= 1, "ShapeMotionSpec: samples_per_pair >= 1");
    // glyph radius + jitter margin must leave room for the trajectory
    if (trajectory_amplitude() < 1.5)
      throw ContractError("ShapeMotionSpec: frame too small for trajectory amplitude");
  }

  double glyph_radius() const { return frame_size / 5.0; }
  double trajectory_amplitude() const { return frame_size / 2.0 - glyph_radius() - 1.5; }

  std::string echo() const {
    io::KvFile kv;
    kv.values["kind"] = "shape-motion";
    kv.values["static_classes"] = std::to_string(n_static_classes);
    kv.values["motion_classes"] = std::to_string(n_motion_classes);
    kv.values["seq_len"] = std::to_string(seq_len);
    kv.values["frame_size"] = std::to_string(frame_size);
    kv.values["samples_per_pair"] = std::to_string(samples_per_pair);
    kv.values["seed"] = std::to_string(seed);
    return kv.serialize();
  }
};

struct TimeSeriesSpec {
  int n_static_classes = 6;
  int n_motion_classes = 4;
  int seq_len = 16;
  int feature_dim = 5;
  int samples_per_pair = 10;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    require(n_static_classes >= 2 && n_motion_classes >= 2, "TimeSeriesSpec: classes >= 2");
    require(seq_len >= 4 && feature_dim >= 1, "TimeSeriesSpec: shape");
    require(n_motion_classes * 2 <= seq_len,
            "TimeSeriesSpec: motion frequencies need seq_len >= 2 * classes");
    require(samples_per_pair >= 1 && noise_sigma >= 0.0, "TimeSeriesSpec: sampling params");
  }

  std::string echo() const {
    io::KvFile kv;
    kv.values["kind"] = "time-series";
    kv.values["static_classes"] = std::to_string(n_static_classes);
    kv.values["motion_classes"] = std::to_string(n_motion_classes);
    kv.values["seq_len"] = std::to_string(seq_len);
    kv.values["feature_dim"] = std::to_string(feature_dim);
    kv.values["samples_per_pair"] = std::to_string(samples_per_pair);
    kv.values["noise_sigma"] = io::format_double(noise_sigma);
    kv.values["seed"] = std::to_string(seed);
    return kv.serialize();
  }
};

struct LabeledDataset {
  SequenceBatch train;
  SequenceBatch test;
  std::vector<int> frame_shape;
  int n_static_classes = 0;
  int n_motion_classes = 0;
  std::string spec_echo;
  // per-sequence generator parameters, one row per sequence:
  // motion_class, phase, amplitude, offset_x, offset_y
  Mat train_meta, test_meta;
};

namespace synth_detail {

// Point-symmetric glyph coverage at (dx, dy) from the center; symmetry keeps
// the rendered mask centroid on the trajectory center.
inline bool glyph_inside(int shape, double dx, double dy, double r) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  switch (shape % 6) {
    case 0: return ax <= r && ay <= r;                                   // square
    case 1: return dx * dx + dy * dy <= r * r;                           // disc
    case 2: return ax + ay <= 1.3 * r;                                   // diamond
    case 3: return (ax <= 0.4 * r && ay <= r) || (ay <= 0.4 * r && ax <= r);  // plus
    case 4: {                                                            // ring
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.35 * r * r;
    }
    default: return ax <= r && ay <= r && std::abs(ax - ay) <= 0.4 * r;  // X
  }
}

inline void glyph_color(int static_class, double& cr, double& cg, double& cb) {
  static const double palette[8][3] = {{1.0, 0.15, 0.15}, {0.15, 1.0, 0.15}, {0.25, 0.45, 1.0},
                                       {1.0, 1.0, 0.2},   {1.0, 0.25, 1.0}, {0.2, 1.0, 1.0},
                                       {1.0, 0.6, 0.15},  {0.9, 0.9, 0.9}};
  const int c = static_class % 8;
  cr = palette[c][0];
  cg = palette[c][1];
  cb = palette[c][2];
}

// Closed-form trajectory center at step t.
inline void trajectory_center(int motion_class, int t, int T, double amp, double phase,
                              double off_x, double off_y, double c0, double& cx, double& cy) {
  const double u = double(t) / double(T);      // one full period over the sequence
  const double lin = T > 1 ? double(t) / double(T - 1) : 0.0;
  switch (motion_class % 8) {
    case 0:  // translate right
      cx = c0 - amp + 2.0 * amp * lin;
      cy = c0 + off_y;
      break;
    case 1:  // translate left
      cx = c0 + amp - 2.0 * amp * lin;
      cy = c0 + off_y;
      break;
    case 2:  // vertical bounce
      cx = c0 + off_x;
      cy = c0 + amp * std::sin(2.0 * M_PI * u + phase);
      break;
    case 3:  // circle
      cx = c0 + amp * std::cos(2.0 * M_PI * u + phase);
      cy = c0 + amp * std::sin(2.0 * M_PI * u + phase);
      break;
    case 4:  // diagonal down-right
      cx = c0 - amp + 2.0 * amp * lin;
      cy = c0 - amp + 2.0 * amp * lin;
      break;
    case 5:  // horizontal oscillation
      cx = c0 + amp * std::sin(2.0 * M_PI * u + phase);
      cy = c0 + off_y;
      break;
    case 6:  // figure eight
      cx = c0 + amp * std::sin(2.0 * M_PI * u + phase);
      cy = c0 + amp * std::sin(4.0 * M_PI * u + 2.0 * phase);
      break;
    default:  // diagonal up-right
      cx = c0 - amp + 2.0 * amp * lin;
      cy = c0 + amp - 2.0 * amp * lin;
      break;
  }
}

// Render one frame (3 channels) with 4x4 supersampled coverage into
// data(row, col0 ...).
inline void render_frame(Mat& data, long row, long col0, int frame_size, int shape, double cr,
                         double cg, double cb, double cx, double cy, double r,
                         double brightness) {
  const int S = 4;
  for (int y = 0; y < frame_size; ++y)
    for (int x = 0; x < frame_size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < S; ++sy)
        for (int sx = 0; sx < S; ++sx) {
          const double px = x + (sx + 0.5) / S;
          const double py = y + (sy + 0.5) / S;
          if (glyph_inside(shape, px - cx, py - cy, r)) ++hits;
        }
      const double cov = brightness * hits / double(S * S);
      const long base = static_cast<long>(y) * frame_size + x;
      data(row, col0 + 0 * frame_size * frame_size + base) = cov * cr;
      data(row, col0 + 1 * frame_size * frame_size + base) = cov * cg;
      data(row, col0 + 2 * frame_size * frame_size + base) = cov * cb;
    }
}

}  // namespace synth_detail

inline LabeledDataset gen_shape_motion(const ShapeMotionSpec& spec) {
  spec.validate();
  const int K = spec.n_static_classes, M = spec.n_motion_classes;
  const int T = spec.seq_len, F = spec.frame_size, spp = spec.samples_per_pair;
  const int frame_elems = 3 * F * F;
  const double r = spec.glyph_radius();
  const double A = spec.trajectory_amplitude();
  const double c0 = F / 2.0;

  const int test_per_pair = spp >= 2 ? std::max(1, spp / 5) : 0;
  const int train_per_pair = spp - test_per_pair;
  const int n_train = K * M * train_per_pair;
  const int n_test = K * M * test_per_pair;

  LabeledDataset ds;
  ds.frame_shape = {3, F, F};
  ds.n_static_classes = K;
  ds.n_motion_classes = M;
  ds.spec_echo = spec.echo();
  auto init_split = [&](SequenceBatch& b, Mat& meta, int n) {
    b.seq_len = T;
    b.frame_elems = frame_elems;
    b.data.resize(n, static_cast<long>(T) * frame_elems);
    b.static_labels.resize(n);
    b.dynamic_labels.resize(n);
    meta.resize(n, 5);
  };
  init_split(ds.train, ds.train_meta, n_train);
  init_split(ds.test, ds.test_meta, n_test);

  int at_train = 0, at_test = 0;
  for (int k = 0; k < K; ++k)
    for (int m = 0; m < M; ++m)
      for (int rep = 0; rep < spp; ++rep) {
        Rng rng(derive_seed(spec.seed, {tag_hash("shape-motion"), static_cast<std::uint64_t>(k),
                                        static_cast<std::uint64_t>(m),
                                        static_cast<std::uint64_t>(rep)}));
        const double phase = 2.0 * M_PI * rng.uniform();
        const double amp = A * (0.85 + 0.15 * rng.uniform());
        const double off_x = 3.0 * (rng.uniform() - 0.5);
        const double off_y = 3.0 * (rng.uniform() - 0.5);
        const double brightness = 0.85 + 0.15 * rng.uniform();
        double cr, cg, cb;
        synth_detail::glyph_color(k, cr, cg, cb);

        const bool is_test = rep >= train_per_pair;
        SequenceBatch& b = is_test ? ds.test : ds.train;
        Mat& meta = is_test ? ds.test_meta : ds.train_meta;
        const int row = is_test ? at_test++ : at_train++;

        b.static_labels[row] = k;
        b.dynamic_labels[row] = m;
        meta.row(row) << m, phase, amp, off_x, off_y;
        for (int t = 0; t < T; ++t) {
          double cx, cy;
          synth_detail::trajectory_center(m, t, T, amp, phase, off_x, off_y, c0, cx, cy);
          synth_detail::render_frame(b.data, row, static_cast<long>(t) * frame_elems, F, k, cr,
                                     cg, cb, cx, cy, r, brightness);
        }
      }
  ds.train.validate();
  if (n_test) ds.test.validate();
  return ds;
}

inline LabeledDataset gen_timeseries(const TimeSeriesSpec& spec) {
  spec.validate();
  const int K = spec.n_static_classes, M = spec.n_motion_classes;
  const int T = spec.seq_len, F = spec.feature_dim, spp = spec.samples_per_pair;

  // fixed per-class offset vectors
  Mat offsets(K, F);
  for (int k = 0; k < K; ++k) {
    Rng rng(derive_seed(spec.seed, {tag_hash("ts-offset"), static_cast<std::uint64_t>(k)}));
    for (int f = 0; f < F; ++f) offsets(k, f) = 2.0 * (2.0 * rng.uniform() - 1.0);
  }

  const int test_per_pair = spp >= 2 ? std::max(1, spp / 5) : 0;
  const int train_per_pair = spp - test_per_pair;

  LabeledDataset ds;
  ds.frame_shape = {F};
  ds.n_static_classes = K;
  ds.n_motion_classes = M;
  ds.spec_echo = spec.echo();
  auto init_split = [&](SequenceBatch& b, Mat& meta, int n) {
    b.seq_len = T;
    b.frame_elems = F;
    b.data.resize(n, static_cast<long>(T) * F);
    b.static_labels.resize(n);
    b.dynamic_labels.resize(n);
    meta.resize(n, 5);
  };
  init_split(ds.train, ds.train_meta, K * M * train_per_pair);
  init_split(ds.test, ds.test_meta, K * M * test_per_pair);

  int at_train = 0, at_test = 0;
  for (int k = 0; k < K; ++k)
    for (int m = 0; m < M; ++m)
      for (int rep = 0; rep < spp; ++rep) {
        Rng rng(derive_seed(spec.seed, {tag_hash("time-series"), static_cast<std::uint64_t>(k),
                                        static_cast<std::uint64_t>(m),
                                        static_cast<std::uint64_t>(rep)}));
        const double phase = 2.0 * M_PI * rng.uniform();
        const int freq = m + 1;  // integer cycles: exactly zero-mean over the grid

        const bool is_test = rep >= train_per_pair;
        SequenceBatch& b = is_test ? ds.test : ds.train;
        Mat& meta = is_test ? ds.test_meta : ds.train_meta;
        const int row = is_test ? at_test++ : at_train++;

        b.static_labels[row] = k;
        b.dynamic_labels[row] = m;
        meta.row(row) << m, phase, 1.0, 0.0, 0.0;
        for (int t = 0; t < T; ++t)
          for (int f = 0; f < F; ++f) {
            const double theta = 2.0 * M_PI * f / double(F);
            const double pattern =
                std::sin(2.0 * M_PI * freq * t / double(T) + theta + phase);
            b.data(row, static_cast<long>(t) * F + f) =
                offsets(k, f) + pattern + spec.noise_sigma * rng.normal();
          }
      }
  ds.train.validate();
  if (ds.test.size()) ds.test.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Self-describing binary container
// ---------------------------------------------------------------------------

constexpr std::uint32_t kDatasetMagic = 0x53514453;  // "SQDS"
constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
  io::BinWriter w(path);
  w.u32(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.str(ds.spec_echo);
  w.u64(ds.frame_shape.size());
  for (int d : ds.frame_shape) w.i64(d);
  w.i64(ds.n_static_classes);
  w.i64(ds.n_motion_classes);
  for (const SequenceBatch* b : {&ds.train, &ds.test}) {
    w.i64(b->seq_len);
    w.i64(b->frame_elems);
    w.mat(b->data);
    w.veci(b->static_labels);
    w.veci(b->dynamic_labels);
  }
  w.mat(ds.train_meta);
  w.mat(ds.test_meta);
}

inline LabeledDataset load_dataset(const std::string& path) {
  io::BinReader r(path);
  if (r.u32() != kDatasetMagic) throw IoError("not a dataset file (bad magic): " + path);
  const std::uint32_t ver = r.u32();
  if (ver != kDatasetVersion)
    throw IoError("dataset version mismatch: file has v" + std::to_string(ver) + ", expected v" +
                  std::to_string(kDatasetVersion));
  LabeledDataset ds;
  ds.spec_echo = r.str();
  const std::uint64_t rank = r.u64();
  if (rank != 1 && rank != 3) throw IoError("corrupt dataset (frame rank)");
  ds.frame_shape.resize(rank);
  for (auto& d : ds.frame_shape) d = static_cast<int>(r.i64());
  ds.n_static_classes = static_cast<int>(r.i64());
  ds.n_motion_classes = static_cast<int>(r.i64());
  for (SequenceBatch* b : {&ds.train, &ds.test}) {
    b->seq_len = static_cast<int>(r.i64());
    b->frame_elems = static_cast<int>(r.i64());
    b->data = r.mat();
    b->static_labels = r.veci();
    b->dynamic_labels = r.veci();
  }
  ds.train_meta = r.mat();
  ds.test_meta = r.mat();
  if (!r.at_eof()) throw IoError("corrupt dataset (trailing bytes): " + path);
  return ds;
}

// CSV export for time-series datasets: seq, t, static_label, dynamic_label, features...
inline void export_timeseries_csv(const SequenceBatch& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "seq,t,static_label,dynamic_label";
  for (int f = 0; f < b.frame_elems; ++f) out << ",f" << f;
  out << "\n";
  for (int i = 0; i < b.size(); ++i)
    for (int t = 0; t < b.seq_len; ++t) {
      out << i << "," << t << "," << (b.static_labels.size() ? b.static_labels[i] : -1) << ","
          << (b.dynamic_labels.size() ? b.dynamic_labels[i] : -1);
      for (int f = 0; f < b.frame_elems; ++f)
        out << "," << io::format_double(b.data(i, static_cast<long>(t) * b.frame_elems + f));
      out << "\n";
    }
}

}  // namespace seqdis
