#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "ccr/anchor/anchor.hpp"
#include "ccr/data/dataset.hpp"

namespace ccr::eval {

// The paper-style evaluation set: the held-out target plus 100 items sampled
// uniformly without replacement from those the user never interacted with.
// Deterministic per (seed, user).
std::vector<std::int32_t> build_eval_candidates(std::int32_t user, std::int32_t target,
                                                std::span<const std::int32_t> user_items_sorted,
                                                std::size_t n_items, std::uint64_t seed,
                                                std::size_t n_negatives = 100);

struct MetricPair {
  double ndcg = 0.0;
  double hr = 0.0;
};

// Single-relevant-item convention: with r the 1-based rank of the target,
// HR@K = 1[r <= K] and NDCG@K = 1/log2(r+1) for r <= K, else 0.
std::map<int, MetricPair> ndcg_hr(std::span<const std::int32_t> ranked, std::int32_t target,
                                  std::span<const int> ks);

struct RankingMetrics {
  std::map<int, MetricPair> at_k;
  std::size_t n_users = 0;
  std::uint64_t seed = 0;
};

struct EvalConfig {
  std::vector<int> ks = {5, 10};
  std::uint64_t seed = 1;
  int workers = 1;
};

// Mean per-user metrics over the split's entries on their 101-candidate
// sets. Entries whose prefix is shorter than the anchor window are skipped;
// n_users reports how many were evaluated.
RankingMetrics evaluate_model(const anchor::AnchorModel& model,
                              const std::vector<data::EvalEntry>& entries,
                              const std::vector<std::vector<std::int32_t>>& user_items,
                              std::size_t n_items, const EvalConfig& cfg);

}  // namespace ccr::eval
