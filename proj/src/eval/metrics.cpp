#include "ccr/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ccr/common.hpp"

namespace ccr::eval {

std::vector<std::int32_t> build_eval_candidates(std::int32_t user, std::int32_t target,
                                                std::span<const std::int32_t> user_items_sorted,
                                                std::size_t n_items, std::uint64_t seed,
                                                std::size_t n_negatives) {
  if (n_items < n_negatives + 1) {
    throw DataError("catalog of " + std::to_string(n_items) + " items cannot seat " +
                    std::to_string(n_negatives + 1) + " evaluation candidates");
  }
  std::vector<std::int32_t> pool;
  pool.reserve(n_items - user_items_sorted.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < n_items; ++i) {
    const auto item = static_cast<std::int32_t>(i);
    while (cursor < user_items_sorted.size() && user_items_sorted[cursor] < item) ++cursor;
    const bool interacted = cursor < user_items_sorted.size() && user_items_sorted[cursor] == item;
    if (!interacted && item != target) pool.push_back(item);
  }
  if (pool.size() < n_negatives) {
    throw DataError("user " + std::to_string(user) + " leaves only " +
                    std::to_string(pool.size()) + " never-interacted items; need " +
                    std::to_string(n_negatives));
  }

  auto rng = make_rng(mix_seed(seed, static_cast<std::uint64_t>(user), fnv1a64("eval-cand")));
  // Partial Fisher-Yates: the first n_negatives slots become the sample.
  for (std::size_t i = 0; i < n_negatives; ++i) {
    const std::size_t j = i + rng() % (pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::int32_t> out;
  out.reserve(n_negatives + 1);
  out.push_back(target);
  out.insert(out.end(), pool.begin(), pool.begin() + static_cast<long>(n_negatives));
  return out;
}

std::map<int, MetricPair> ndcg_hr(std::span<const std::int32_t> ranked, std::int32_t target,
                                  std::span<const int> ks) {
  std::size_t rank = 0;
  bool found = false;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] == target) {
      rank = i + 1;
      found = true;
      break;
    }
  }
  if (!found) throw ContractError("ndcg_hr: target absent from ranked list");

  std::map<int, MetricPair> out;
  for (const int k : ks) {
    MetricPair m;
    if (rank <= static_cast<std::size_t>(k)) {
      m.hr = 1.0;
      m.ndcg = 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    }
    out[k] = m;
  }
  return out;
}

RankingMetrics evaluate_model(const anchor::AnchorModel& model,
                              const std::vector<data::EvalEntry>& entries,
                              const std::vector<std::vector<std::int32_t>>& user_items,
                              std::size_t n_items, const EvalConfig& cfg) {
  if (entries.empty()) throw ContractError("evaluate_model: empty evaluation set");
  const std::size_t window = model.window();

  struct PerEntry {
    bool used = false;
    std::map<int, MetricPair> metrics;
  };
  std::vector<PerEntry> results(entries.size());

  parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
    const auto& e = entries[i];
    if (e.history.size() < window) return;
    const auto candidates =
        build_eval_candidates(e.user, e.target, user_items[static_cast<std::size_t>(e.user)],
                              n_items, cfg.seed);
    anchor::Query q;
    q.user = e.user;
    q.items = std::span(e.history).last(window);
    q.feedback = std::span(e.feedback).last(window);
    const auto ranked = model.rank(q, candidates);
    std::vector<std::int32_t> order;
    order.reserve(ranked.size());
    for (const auto& s : ranked) order.push_back(s.item);
    results[i].metrics = ndcg_hr(order, e.target, cfg.ks);
    results[i].used = true;
  });

  RankingMetrics metrics;
  metrics.seed = cfg.seed;
  for (const int k : cfg.ks) metrics.at_k[k] = MetricPair{};
  for (const auto& r : results) {
    if (!r.used) continue;
    metrics.n_users += 1;
    for (const auto& [k, m] : r.metrics) {
      metrics.at_k[k].ndcg += m.ndcg;
      metrics.at_k[k].hr += m.hr;
    }
  }
  if (metrics.n_users == 0) {
    throw ContractError("evaluate_model: no entry has a full history window");
  }
  for (auto& [k, m] : metrics.at_k) {
    m.ndcg /= static_cast<double>(metrics.n_users);
    m.hr /= static_cast<double>(metrics.n_users);
  }
  return metrics;
}

}  // namespace ccr::eval
