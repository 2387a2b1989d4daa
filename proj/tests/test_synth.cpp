#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "seqdis/classifiers.hpp"
#include "seqdis/synth.hpp"

using namespace seqdis;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen_shape_motion counts and uniform label histogram") {
  ShapeMotionSpec spec;  // K=6 M=4 T=8 16x16 spp=10
  auto ds = gen_shape_motion(spec);

  CHECK(ds.train.size() + ds.test.size() == 240);
  CHECK(ds.train.size() == 192);
  CHECK(ds.test.size() == 48);

  // exactly uniform: every (static, motion) pair appears spp times overall
  std::map<std::pair<int, int>, int> hist;
  std::map<std::pair<int, int>, int> train_hist;
  for (const SequenceBatch* b : {&ds.train, &ds.test})
    for (int i = 0; i < b->size(); ++i)
      ++hist[{b->static_labels[i], b->dynamic_labels[i]}];
  for (int i = 0; i < ds.train.size(); ++i)
    ++train_hist[{ds.train.static_labels[i], ds.train.dynamic_labels[i]}];
  CHECK(hist.size() == 24);
  for (auto& [key, count] : hist) CHECK(count == 10);
  // every pair occurs in train
  CHECK(train_hist.size() == 24);

  CHECK(ds.train.data.minCoeff() >= 0.0);
  CHECK(ds.train.data.maxCoeff() <= 1.0);
  CHECK(ds.train.data.maxCoeff() > 0.5);  // glyphs actually rendered
}

TEST_CASE("gen_shape_motion is bitwise deterministic under its seed") {
  ShapeMotionSpec spec;
  spec.samples_per_pair = 2;
  auto a = gen_shape_motion(spec);
  auto b = gen_shape_motion(spec);
  CHECK(a.train.data == b.train.data);
  CHECK(a.test.data == b.test.data);
  spec.seed = 2;
  auto c = gen_shape_motion(spec);
  CHECK(a.train.data != c.train.data);
}

TEST_CASE("foreground centroid follows the closed-form trajectory") {
  ShapeMotionSpec spec;
  spec.samples_per_pair = 2;
  auto ds = gen_shape_motion(spec);
  const int F = spec.frame_size;
  const double c0 = F / 2.0;

  for (int i = 0; i < ds.train.size(); ++i) {
    const int m = static_cast<int>(ds.train_meta(i, 0));
    const double phase = ds.train_meta(i, 1);
    const double amp = ds.train_meta(i, 2);
    const double off_x = ds.train_meta(i, 3);
    const double off_y = ds.train_meta(i, 4);
    for (int t = 0; t < spec.seq_len; ++t) {
      double cx, cy;
      synth_detail::trajectory_center(m, t, spec.seq_len, amp, phase, off_x, off_y, c0, cx, cy);

      // intensity-weighted centroid of the foreground mask
      double wx = 0, wy = 0, wsum = 0;
      for (int y = 0; y < F; ++y)
        for (int x = 0; x < F; ++x) {
          double v = 0;
          for (int ch = 0; ch < 3; ++ch)
            v += ds.train.data(i, (static_cast<long>(t) * 3 + ch) * F * F + y * F + x);
          if (v > 0.05) {
            wx += v * (x + 0.5);
            wy += v * (y + 0.5);
            wsum += v;
          }
        }
      REQUIRE(wsum > 0.0);
      INFO("seq " << i << " motion " << m << " frame " << t);
      CHECK(std::abs(wx / wsum - cx) < 1.0);
      CHECK(std::abs(wy / wsum - cy) < 1.0);
    }
  }
}

TEST_CASE("gen_shape_motion rejects bad specs") {
  ShapeMotionSpec s;
  s.n_static_classes = 1;
  CHECK_THROWS_AS(s.validate(), ContractError);
  s = ShapeMotionSpec{};
  s.frame_size = 8;
  CHECK_THROWS_AS(s.validate(), ContractError);
  s = ShapeMotionSpec{};
  s.seq_len = 2;
  CHECK_THROWS_AS(s.validate(), ContractError);
}

TEST_CASE("raw pixels are linearly separable by static class (benchmark ceiling)") {
  ShapeMotionSpec spec;  // 240 sequences
  auto ds = gen_shape_motion(spec);
  LinearMarginClassifier clf;
  clf.fit(ds.train.data, ds.train.static_labels, spec.n_static_classes, 5);
  const double acc = clf.accuracy(ds.test.data, ds.test.static_labels);
  INFO("static-from-pixels accuracy " << acc);
  CHECK(acc > 0.90);
}

TEST_CASE("gen_timeseries closed forms and determinism") {
  TimeSeriesSpec spec;
  spec.n_static_classes = 3;
  spec.n_motion_classes = 2;
  spec.seq_len = 12;
  spec.feature_dim = 3;
  spec.samples_per_pair = 4;

  SECTION("zero noise gives exact closed-form signals") {
    TimeSeriesSpec s0 = spec;
    s0.noise_sigma = 0.0;
    auto ds = gen_timeseries(s0);
    // x[t,f] - pattern must be constant over t (the static offset) and shared
    // by all sequences of the same static class.
    std::map<int, Vec> offsets;
    for (int i = 0; i < ds.train.size(); ++i) {
      const int m = static_cast<int>(ds.train_meta(i, 0));
      const double phase = ds.train_meta(i, 1);
      Vec off(spec.feature_dim);
      for (int f = 0; f < spec.feature_dim; ++f) {
        const double theta = 2.0 * M_PI * f / spec.feature_dim;
        for (int t = 0; t < spec.seq_len; ++t) {
          const double pattern =
              std::sin(2.0 * M_PI * (m + 1) * t / double(spec.seq_len) + theta + phase);
          const double resid = ds.train.data(i, static_cast<long>(t) * spec.feature_dim + f) -
                               pattern;
          if (t == 0)
            off[f] = resid;
          else
            CHECK_THAT(resid, Catch::Matchers::WithinAbs(off[f], 1e-12));
        }
      }
      const int k = ds.train.static_labels[i];
      if (offsets.count(k))
        CHECK(offsets[k].isApprox(off, 1e-12));
      else
        offsets[k] = off;
    }
  }

  SECTION("static offset recoverable from per-sequence means") {
    TimeSeriesSpec s = spec;
    s.noise_sigma = 0.2;
    s.seed = 11;
    auto ds0 = gen_timeseries(s);
    TimeSeriesSpec clean = s;
    clean.noise_sigma = 0.0;
    auto dsc = gen_timeseries(clean);
    const double tol = 3.0 * s.noise_sigma / std::sqrt(double(s.seq_len));
    for (int i = 0; i < ds0.train.size(); ++i)
      for (int f = 0; f < s.feature_dim; ++f) {
        double noisy_mean = 0, clean_mean = 0;
        for (int t = 0; t < s.seq_len; ++t) {
          noisy_mean += ds0.train.data(i, static_cast<long>(t) * s.feature_dim + f);
          clean_mean += dsc.train.data(i, static_cast<long>(t) * s.feature_dim + f);
        }
        // patterns are exactly zero-mean, so the clean mean is the offset
        CHECK(std::abs(noisy_mean / s.seq_len - clean_mean / s.seq_len) < tol);
      }
  }

  SECTION("deterministic under seed") {
    auto a = gen_timeseries(spec);
    auto b = gen_timeseries(spec);
    CHECK(a.train.data == b.train.data);
  }
}

TEST_CASE("dataset container round trip") {
  ShapeMotionSpec spec;
  spec.samples_per_pair = 2;
  spec.n_static_classes = 3;
  spec.n_motion_classes = 2;
  auto ds = gen_shape_motion(spec);

  const std::string p1 = "/tmp/seqdis_test_ds1.bin";
  const std::string p2 = "/tmp/seqdis_test_ds2.bin";
  save_dataset(ds, p1);
  auto loaded = load_dataset(p1);
  save_dataset(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));

  CHECK(loaded.train.data == ds.train.data);
  CHECK(loaded.test.static_labels == ds.test.static_labels);
  CHECK(loaded.spec_echo == ds.spec_echo);
  CHECK(loaded.n_static_classes == 3);

  SECTION("empty file is a format error") {
    const std::string pe = "/tmp/seqdis_test_empty.bin";
    std::ofstream(pe, std::ios::binary).close();
    CHECK_THROWS_AS(load_dataset(pe), IoError);
  }

  SECTION("bad magic is a format error") {
    const std::string pb = "/tmp/seqdis_test_badmagic.bin";
    std::ofstream out(pb, std::ios::binary);
    out << "not a dataset at all";
    out.close();
    CHECK_THROWS_AS(load_dataset(pb), IoError);
  }

  SECTION("version mismatch is explicit") {
    std::string bytes = slurp(p1);
    bytes[4] = 99;  // version field follows the 4-byte magic
    const std::string pv = "/tmp/seqdis_test_badver.bin";
    std::ofstream out(pv, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_WITH(load_dataset(pv), Catch::Matchers::ContainsSubstring("version mismatch"));
  }

  SECTION("truncation is detected") {
    std::string bytes = slurp(p1);
    const std::string pt = "/tmp/seqdis_test_trunc.bin";
    std::ofstream out(pt, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_dataset(pt), IoError);
  }

  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("time-series CSV export") {
  TimeSeriesSpec spec;
  spec.n_static_classes = 2;
  spec.n_motion_classes = 2;
  spec.seq_len = 6;
  spec.feature_dim = 2;
  spec.samples_per_pair = 2;
  auto ds = gen_timeseries(spec);
  const std::string p = "/tmp/seqdis_test_ts.csv";
  export_timeseries_csv(ds.train, p);
  std::ifstream in(p);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 1 + ds.train.size() * spec.seq_len);
  std::remove(p.c_str());
}
