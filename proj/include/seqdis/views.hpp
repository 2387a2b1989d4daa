#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "seqdis/distributions.hpp"
#include "seqdis/model.hpp"

namespace seqdis {

enum class NegativeMode { random, middle_third, middle_plus_farthest, farthest_third };

inline const char* to_string(NegativeMode m) {
  switch (m) {
    case NegativeMode::random: return "random";
    case NegativeMode::middle_third: return "middle-third";
    case NegativeMode::middle_plus_farthest: return "middle-plus-farthest";
    case NegativeMode::farthest_third: return "farthest-third";
  }
  return "?";
}

inline NegativeMode parse_negative_mode(const std::string& s) {
  if (s == "random") return NegativeMode::random;
  if (s == "middle-third") return NegativeMode::middle_third;
  if (s == "middle-plus-farthest") return NegativeMode::middle_plus_farthest;
  if (s == "farthest-third") return NegativeMode::farthest_third;
  throw ConfigError("unknown negative mode: " + s);
}

// Positive / negative index pools over one batch, for one anchor.
struct ViewPools {
  int anchor_index = -1;
  std::vector<int> positive_pool;
  std::vector<int> negative_pool;
};

struct ViewBundle {
  Vec positive;
  std::vector<Vec> negatives;
};

// Sort the anchor's distance row ascending and slice into thirds:
// S+ = first floor(n/3) indices, S- per mode from the tail. Ties break by
// index, except the anchor always sorts first among equal distances so that
// its zero self-distance keeps it inside S+ even in degenerate all-equal rows.
// Pools are disjoint; random mode draws outside S+ (so never the anchor).
inline ViewPools partition_thirds(const Vec& d_row, int anchor_index, NegativeMode mode,
                                  std::uint64_t seed = 0) {
  const int n = static_cast<int>(d_row.size());
  if (n < 3) throw ContractError("partition_thirds: batch too small (n < 3)");
  require(anchor_index >= 0 && anchor_index < n, "partition_thirds: anchor out of range");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    if (d_row[x] != d_row[y]) return d_row[x] < d_row[y];
    if (x == anchor_index) return true;
    if (y == anchor_index) return false;
    return x < y;
  });

  const int third = n / 3;
  const int far_start = (2 * n) / 3;

  ViewPools p;
  p.anchor_index = anchor_index;
  p.positive_pool.assign(order.begin(), order.begin() + third);

  switch (mode) {
    case NegativeMode::farthest_third:
      p.negative_pool.assign(order.begin() + far_start, order.end());
      break;
    case NegativeMode::middle_third:
      p.negative_pool.assign(order.begin() + third, order.begin() + far_start);
      break;
    case NegativeMode::middle_plus_farthest:
      p.negative_pool.assign(order.begin() + third, order.end());
      break;
    case NegativeMode::random: {
      std::vector<int> complement(order.begin() + third, order.end());
      Rng rng(seed);
      p.negative_pool = rng.sample_without_replacement(complement, third);
      std::sort(p.negative_pool.begin(), p.negative_pool.end());
      break;
    }
  }
  return p;
}

// Where the complementary factor of a negative view comes from: a fresh
// prior sample (Fig-style) or the anchor's own posterior (Alg-style).
enum class NegativePartner { prior, anchor };

struct ViewConfig {
  NegativeMode mode = NegativeMode::farthest_third;
  NegativePartner negative_dynamics = NegativePartner::prior;
  int negatives_per_anchor = 0;  // 0 -> 2 * batch_size
};

inline int resolve_negative_count(const ViewConfig& cfg, int batch_size) {
  return cfg.negatives_per_anchor > 0 ? cfg.negatives_per_anchor : 2 * batch_size;
}

// Value-level predictive sampling. Model must provide:
//   int static_dim() / dynamic_dim() / seq_len()
//   Mat decode_one(const Vec& s, const std::vector<Vec>& d_path)
//   SequencePosterior encode_one(const Mat& seq)   // T x frame_elems
//   std::pair<GaussianSequence, std::vector<Vec>> prior_rollout_one(int T, uint64_t seed)
// Everything is a pure function of (model parameters, inputs, seed).
template <class Model>
class ViewSampler {
 public:
  ViewSampler(const Model& model, ViewConfig cfg) : model_(model), cfg_(cfg) {}

  const ViewConfig& config() const { return cfg_; }

  // Alg-style positive block: pick a pool distribution, sample s~ from it,
  // pair with prior dynamics, decode, re-encode, sample the new posterior.
  Vec sample_positive_static(const ViewPools& pools,
                             const std::vector<SequencePosterior>& batch,
                             std::uint64_t seed) const {
    require(!pools.positive_pool.empty(), "sample_positive_static: empty pool");
    Rng rng(seed);
    const int pick = pools.positive_pool[rng.uniform_int(
        static_cast<int>(pools.positive_pool.size()))];
    const int ds = model_.static_dim();
    Vec s_tilde = reparameterize(batch[pick].static_posterior, rng.normal_vec(ds));
    auto [prior_dist, d_tilde] =
        model_.prior_rollout_one(model_.seq_len(), derive_seed(seed, {tag_hash("pos-dyn")}));
    (void)prior_dist;
    Mat x_pos = model_.decode_one(s_tilde, d_tilde);
    SequencePosterior post = model_.encode_one(x_pos);
    return reparameterize(post.static_posterior, rng.normal_vec(ds));
  }

  // 2n draws with replacement from S-; each draw goes through the same
  // decode / re-encode pipeline with its own noise.
  std::vector<Vec> sample_negative_statics(const SequencePosterior& anchor,
                                           const ViewPools& pools,
                                           const std::vector<SequencePosterior>& batch,
                                           int count, std::uint64_t seed) const {
    require(!pools.negative_pool.empty(), "sample_negative_statics: empty pool");
    require(count >= 1, "sample_negative_statics: count must be >= 1");
    const int ds = model_.static_dim();
    const int dd = model_.dynamic_dim();
    const int T = model_.seq_len();
    Rng rng(seed);
    std::vector<Vec> out;
    out.reserve(count);
    for (int j = 0; j < count; ++j) {
      const int pick = pools.negative_pool[rng.uniform_int(
          static_cast<int>(pools.negative_pool.size()))];
      Vec s_tilde = reparameterize(batch[pick].static_posterior, rng.normal_vec(ds));
      std::vector<Vec> d_path(T);
      if (cfg_.negative_dynamics == NegativePartner::prior) {
        auto [pd, path] = model_.prior_rollout_one(
            T, derive_seed(seed, {tag_hash("neg-dyn"), static_cast<std::uint64_t>(j)}));
        (void)pd;
        d_path = std::move(path);
      } else {
        for (int t = 0; t < T; ++t)
          d_path[t] =
              reparameterize(anchor.dynamic_posterior.steps[t], rng.normal_vec(dd));
      }
      Mat x_neg = model_.decode_one(s_tilde, d_path);
      SequencePosterior post = model_.encode_one(x_neg);
      out.push_back(reparameterize(post.static_posterior, rng.normal_vec(ds)));
    }
    return out;
  }

  // Dynamic mirror: candidate chain from the dynamic pools, static partner
  // from p(s) = N(0, I); re-encoded chains are flattened to length T * d_d.
  ViewBundle sample_dynamic_views(int anchor_index,
                                  const std::vector<SequencePosterior>& batch,
                                  const Vec& d_dynamic_row, NegativeMode mode,
                                  std::uint64_t seed) const {
    const int n = static_cast<int>(batch.size());
    ViewPools pools = partition_thirds(d_dynamic_row, anchor_index, mode,
                                       derive_seed(seed, {tag_hash("pools")}));
    const int ds = model_.static_dim();
    const int dd = model_.dynamic_dim();
    const int T = model_.seq_len();
    Rng rng(seed);

    auto sample_chain_view = [&](int pick, bool partner_from_anchor) {
      std::vector<Vec> d_tilde(T);
      for (int t = 0; t < T; ++t)
        d_tilde[t] = reparameterize(batch[pick].dynamic_posterior.steps[t], rng.normal_vec(dd));
      Vec s_partner;
      if (partner_from_anchor)
        s_partner = reparameterize(batch[anchor_index].static_posterior, rng.normal_vec(ds));
      else
        s_partner = rng.normal_vec(ds);  // p(s) = N(0, I)
      Mat x = model_.decode_one(s_partner, d_tilde);
      SequencePosterior post = model_.encode_one(x);
      Vec flat(static_cast<long>(T) * dd);
      for (int t = 0; t < T; ++t)
        flat.segment(static_cast<long>(t) * dd, dd) =
            reparameterize(post.dynamic_posterior.steps[t], rng.normal_vec(dd));
      return flat;
    };

    ViewBundle out;
    {
      const int pick = pools.positive_pool[rng.uniform_int(
          static_cast<int>(pools.positive_pool.size()))];
      out.positive = sample_chain_view(pick, /*partner_from_anchor=*/false);
    }
    const int count = resolve_negative_count(cfg_, n);
    const bool neg_anchor_partner = cfg_.negative_dynamics == NegativePartner::anchor;
    out.negatives.reserve(count);
    for (int j = 0; j < count; ++j) {
      const int pick = pools.negative_pool[rng.uniform_int(
          static_cast<int>(pools.negative_pool.size()))];
      out.negatives.push_back(sample_chain_view(pick, neg_anchor_partner));
    }
    return out;
  }

 private:
  const Model& model_;
  ViewConfig cfg_;
};

}  // namespace seqdis
