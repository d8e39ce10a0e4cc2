#pragma once

// Independent re-implementations used as test oracles. These deliberately
// avoid the library's ranking/aggregation code paths.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "ccr/anchor/anchor.hpp"
#include "ccr/explain/explain.hpp"

namespace ccr::testing {

// Sort-and-scan metric oracle: ranks by (score desc, item asc), scans for the
// target, applies the textbook definitions.
struct MetricOracle {
  static std::pair<double, double> ndcg_hr(const std::vector<std::pair<std::int32_t, double>>& scored,
                                           std::int32_t target, int k) {
    auto order = scored;
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::size_t rank = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (order[i].first == target) {
        rank = i + 1;
        break;
      }
    }
    if (rank == 0 || rank > static_cast<std::size_t>(k)) return {0.0, 0.0};
    return {1.0 / std::log2(static_cast<double>(rank) + 1.0), 1.0};
  }
};

// Brute-force PN/PS oracle: recomputes every list from scratch by scoring
// each candidate with AnchorModel::score, never touching rank/rank_top_k.
struct PnPsOracle {
  static std::vector<std::int32_t> top_k_from_scratch(const anchor::AnchorModel& anchor,
                                                      std::int32_t user,
                                                      const std::vector<std::int32_t>& items,
                                                      const std::vector<std::uint8_t>& feedback,
                                                      const std::vector<std::int32_t>& candidates,
                                                      std::size_t k) {
    anchor::Query q;
    q.user = user;
    q.items = items;
    q.feedback = feedback;
    std::vector<std::int32_t> unique = candidates;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::vector<std::pair<std::int32_t, double>> scored;
    for (const auto c : unique) scored.emplace_back(c, anchor.score(q, c));
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::vector<std::int32_t> out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(scored[i].first);
    return out;
  }

  static void apply(const explain::ExplanationRecord& r, bool complement,
                    std::vector<std::int32_t>& items, std::vector<std::uint8_t>& feedback) {
    std::vector<bool> in_set(r.history.size(), false);
    for (const auto p : r.positions) in_set[p] = true;
    for (std::size_t t = 0; t < r.history.size(); ++t) {
      const bool intervene = complement ? !in_set[t] : in_set[t];
      if (intervene && r.mode == explain::Mode::kRemove) continue;
      items.push_back(r.history[t]);
      feedback.push_back(intervene && r.mode == explain::Mode::kReverse
                             ? static_cast<std::uint8_t>(r.feedback[t] ? 0 : 1)
                             : r.feedback[t]);
    }
  }

  // Returns {pn, ps} averaged over the records.
  static std::pair<double, double> evaluate(const std::vector<explain::ExplanationRecord>& records,
                                            const anchor::AnchorModel& anchor, std::size_t k) {
    double pn = 0.0, ps = 0.0;
    for (const auto& r : records) {
      {
        std::vector<std::int32_t> items;
        std::vector<std::uint8_t> feedback;
        apply(r, /*complement=*/false, items, feedback);
        const auto top = top_k_from_scratch(anchor, r.user, items, feedback, r.candidates,
                                            std::min(k, r.candidates.size()));
        if (std::find(top.begin(), top.end(), r.recommended_item) == top.end()) pn += 1.0;
      }
      {
        std::vector<std::int32_t> items;
        std::vector<std::uint8_t> feedback;
        apply(r, /*complement=*/true, items, feedback);
        const auto top = top_k_from_scratch(anchor, r.user, items, feedback, r.candidates,
                                            std::min(k, r.candidates.size()));
        if (std::find(top.begin(), top.end(), r.recommended_item) != top.end()) ps += 1.0;
      }
    }
    const auto n = static_cast<double>(records.size());
    return {pn / n, ps / n};
  }
};

}  // namespace ccr::testing
