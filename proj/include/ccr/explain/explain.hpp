#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccr/anchor/anchor.hpp"
#include "ccr/data/dataset.hpp"
#include "ccr/sampler/sampler.hpp"

namespace ccr::explain {

enum class Mode { kReverse, kRemove };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

// One explained recommendation: the history positions whose feedback
// reversal suppresses v_j, plus the evaluation context (window + candidate
// set) needed to recompute recommendation lists.
struct ExplanationRecord {
  std::int32_t user = 0;
  std::int32_t recommended_item = 0;           // v_j from the anchor's top-N
  std::vector<std::size_t> positions;          // delta = 1 positions
  std::vector<std::int32_t> explanation_items; // E_ij
  Mode mode = Mode::kReverse;
  std::int32_t alternative_item = 0;           // v̂ generated under the intervention
  double alternative_score = 0.0;

  std::vector<std::int32_t> history;  // the window the recommendation used
  std::vector<std::uint8_t> feedback;
  std::vector<std::int32_t> candidates;  // the 101-candidate evaluation set
};

struct ExplainConfig {
  std::size_t top_n = 1;  // explain the top-N recommendations per user
  std::size_t k = 10;     // membership cutoff for PN/PS lists
  Mode mode = Mode::kReverse;
  std::uint64_t seed = 1;
  int workers = 1;
};

// For each entry: take the anchor's top-N on the user's candidate set, run
// the sampler's intervention search with v_j as the suppressed target, and
// keep the positions whose binarized delta is 1. All-zero deltas produce no
// record.
std::vector<ExplanationRecord> extract_explanations(
    const sampler::Sampler& sampler, const anchor::AnchorModel& anchor,
    const std::vector<data::EvalEntry>& entries,
    const std::vector<std::vector<std::int32_t>>& user_items, std::size_t n_items,
    const ExplainConfig& cfg);

// PN: reverse (or remove) the feedback of E_ij, recompute the top-K list over
// the record's candidate set; the record counts when v_j has left the list.
// Empty record sets yield nullopt (undefined, reported as null).
std::optional<double> evaluate_pn(const std::vector<ExplanationRecord>& records,
                                  const anchor::AnchorModel& anchor, std::size_t k,
                                  int workers = 1);

// PS: keep E_ij intact, reverse (or remove) everything else; the record
// counts when v_j is still in the recomputed top-K list.
std::optional<double> evaluate_ps(const std::vector<ExplanationRecord>& records,
                                  const anchor::AnchorModel& anchor, std::size_t k,
                                  int workers = 1);

// Harmonic mean, 0 when both inputs are 0.
double f_ns(double pn, double ps);

struct PnPsReport {
  std::optional<double> pn;
  std::optional<double> ps;
  double f_ns = 0.0;
  std::size_t evaluated = 0;  // records entering the PN/PS denominators
  std::size_t users = 0;
  std::size_t k = 0;
  std::size_t top_n = 0;
  Mode mode = Mode::kReverse;
};

PnPsReport evaluate_records(const std::vector<ExplanationRecord>& records,
                            const anchor::AnchorModel& anchor, const ExplainConfig& cfg);

}  // namespace ccr::explain
