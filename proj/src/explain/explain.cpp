#include "ccr/explain/explain.hpp"

#include <algorithm>
#include <atomic>
#include <set>

#include "ccr/common.hpp"
#include "ccr/eval/metrics.hpp"

namespace ccr::explain {

std::string mode_name(Mode m) { return m == Mode::kReverse ? "reverse" : "remove"; }

Mode mode_from_name(const std::string& name) {
  if (name == "reverse") return Mode::kReverse;
  if (name == "remove") return Mode::kRemove;
  throw ConfigError("unknown explanation mode: " + name);
}

namespace {

// The record's intervention applied to its own history window. keep_set=false
// intervenes on E_ij (PN); keep_set=true intervenes on everything else (PS).
struct ModifiedHistory {
  std::vector<std::int32_t> items;
  std::vector<std::uint8_t> feedback;
};

ModifiedHistory modify_history(const ExplanationRecord& r, bool intervene_on_complement) {
  std::vector<bool> in_set(r.history.size(), false);
  for (const std::size_t pos : r.positions) {
    if (pos >= r.history.size()) {
      throw ContractError("explanation position " + std::to_string(pos) +
                          " outside history of length " + std::to_string(r.history.size()));
    }
    in_set[pos] = true;
  }
  for (std::size_t i = 0; i < r.positions.size(); ++i) {
    if (r.explanation_items[i] != r.history[r.positions[i]]) {
      throw ContractError("explanation item " + std::to_string(r.explanation_items[i]) +
                          " does not match history position " +
                          std::to_string(r.positions[i]));
    }
  }

  ModifiedHistory out;
  for (std::size_t t = 0; t < r.history.size(); ++t) {
    const bool intervene = intervene_on_complement ? !in_set[t] : in_set[t];
    if (intervene && r.mode == Mode::kRemove) continue;
    out.items.push_back(r.history[t]);
    const auto fb = r.feedback[t];
    out.feedback.push_back(intervene && r.mode == Mode::kReverse
                               ? static_cast<std::uint8_t>(fb ? 0 : 1)
                               : fb);
  }
  return out;
}

std::optional<double> evaluate_condition(const std::vector<ExplanationRecord>& records,
                                         const anchor::AnchorModel& anchor, std::size_t k,
                                         int workers, bool intervene_on_complement,
                                         bool count_when_present) {
  if (records.empty()) return std::nullopt;
  std::vector<std::uint8_t> hits(records.size(), 0);
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const auto& r = records[i];
    const auto modified = modify_history(r, intervene_on_complement);
    anchor::Query q;
    q.user = r.user;
    q.items = modified.items;
    q.feedback = modified.feedback;
    const auto top = anchor.rank_top_k(q, r.candidates, std::min(k, r.candidates.size()));
    const bool present = std::find(top.begin(), top.end(), r.recommended_item) != top.end();
    hits[i] = (present == count_when_present) ? 1 : 0;
  });
  double total = 0.0;
  for (const auto h : hits) total += h;
  return total / static_cast<double>(records.size());
}

}  // namespace

std::vector<ExplanationRecord> extract_explanations(
    const sampler::Sampler& sampler, const anchor::AnchorModel& anchor,
    const std::vector<data::EvalEntry>& entries,
    const std::vector<std::vector<std::int32_t>>& user_items, std::size_t n_items,
    const ExplainConfig& cfg) {
  const std::size_t window = anchor.window();
  std::vector<std::vector<ExplanationRecord>> per_entry(entries.size());

  parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
    const auto& e = entries[i];
    if (e.history.size() < window) return;
    const auto candidates = eval::build_eval_candidates(
        e.user, e.target, user_items[static_cast<std::size_t>(e.user)], n_items, cfg.seed);
    const std::vector<std::int32_t> items(e.history.end() - static_cast<long>(window),
                                          e.history.end());
    const std::vector<std::uint8_t> feedback(e.feedback.end() - static_cast<long>(window),
                                             e.feedback.end());
    anchor::Query q;
    q.user = e.user;
    q.items = items;
    q.feedback = feedback;
    const auto top_n = anchor.rank_top_k(q, candidates, std::min(cfg.top_n, candidates.size()));

    for (const std::int32_t recommended : top_n) {
      const auto iv = sampler.optimize_delta(
          e.user, items, feedback, recommended,
          mix_seed(cfg.seed, static_cast<std::uint64_t>(e.user),
                   static_cast<std::uint64_t>(recommended)));
      ExplanationRecord rec;
      rec.user = e.user;
      rec.recommended_item = recommended;
      rec.mode = cfg.mode;
      for (std::size_t t = 0; t < iv.binarized.size(); ++t) {
        if (iv.binarized[t]) {
          rec.positions.push_back(t);
          rec.explanation_items.push_back(items[t]);
        }
      }
      if (rec.positions.empty()) continue;  // all-zero delta: nothing to explain

      const auto intervened = sampler::apply_intervention(feedback, iv.binarized);
      std::vector<std::int32_t> all_items(sampler.model().config().n_items);
      for (std::size_t v = 0; v < all_items.size(); ++v) {
        all_items[v] = static_cast<std::int32_t>(v);
      }
      const auto gen =
          sampler.generate_next(e.user, items, intervened, recommended, all_items);
      rec.alternative_item = gen.item;
      rec.alternative_score = gen.confidence;
      rec.history = items;
      rec.feedback = feedback;
      rec.candidates = candidates;
      per_entry[i].push_back(std::move(rec));
    }
  });

  std::vector<ExplanationRecord> out;
  for (auto& batch : per_entry) {
    for (auto& rec : batch) out.push_back(std::move(rec));
  }
  return out;
}

std::optional<double> evaluate_pn(const std::vector<ExplanationRecord>& records,
                                  const anchor::AnchorModel& anchor, std::size_t k,
                                  int workers) {
  // PN condition: after intervening on E_ij itself, v_j is out of the list.
  return evaluate_condition(records, anchor, k, workers, /*intervene_on_complement=*/false,
                            /*count_when_present=*/false);
}

std::optional<double> evaluate_ps(const std::vector<ExplanationRecord>& records,
                                  const anchor::AnchorModel& anchor, std::size_t k,
                                  int workers) {
  // PS condition: after intervening on everything but E_ij, v_j remains.
  return evaluate_condition(records, anchor, k, workers, /*intervene_on_complement=*/true,
                            /*count_when_present=*/true);
}

double f_ns(double pn, double ps) {
  if (pn + ps <= 0.0) return 0.0;
  return 2.0 * pn * ps / (pn + ps);
}

PnPsReport evaluate_records(const std::vector<ExplanationRecord>& records,
                            const anchor::AnchorModel& anchor, const ExplainConfig& cfg) {
  PnPsReport report;
  report.k = cfg.k;
  report.top_n = cfg.top_n;
  report.mode = cfg.mode;
  report.evaluated = records.size();
  std::set<std::int32_t> users;
  for (const auto& r : records) users.insert(r.user);
  report.users = users.size();
  report.pn = evaluate_pn(records, anchor, cfg.k, cfg.workers);
  report.ps = evaluate_ps(records, anchor, cfg.k, cfg.workers);
  if (report.pn && report.ps) report.f_ns = f_ns(*report.pn, *report.ps);
  return report;
}

}  // namespace ccr::explain
