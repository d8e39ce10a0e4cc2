#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccr/data/dataset.hpp"
#include "ccr/diff/checkpoint.hpp"
#include "ccr/diff/params.hpp"
#include "ccr/diff/tape.hpp"

namespace ccr::logic {

struct NcrConfig {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t embed_dim = 64;
  std::size_t window = 5;
  double beta = 5.0;          // pairwise loss sharpness
  double lambda_logic = 0.1;  // double-negation regularizer weight
  double lambda_l2 = 1e-4;    // weight decay
  std::uint64_t seed = 1;
};

struct ScoredItem {
  std::int32_t item = 0;
  double score = 0.0;
};

enum class NegativeSampling {
  kUniform,     // uniform over the catalog, excluding the target
  kPopularity,  // proportional to empirical target frequency; surfaces the
                // hard negatives that teach feedback polarity
};

struct TrainConfig {
  double lr = 0.001;
  int epochs = 10;
  int batch = 128;
  int negatives = 1;
  NegativeSampling sampling = NegativeSampling::kUniform;
  std::uint64_t seed = 1;
};

struct EpochStats {
  double loss = 0.0;
  double logic_reg = 0.0;  // mean double-negation residual
};

class NcrModel;

// Per-tape builder that caches parameter leaves so each tensor appears once
// per graph. train=false freezes every model parameter as a plain constant,
// which is what the intervention optimizer relies on.
class NcrGraph {
 public:
  NcrGraph(const NcrModel& model, diff::Tape& tape, bool train);

  diff::ValueId user_emb(std::int32_t user);
  diff::ValueId item_emb(std::int32_t item);
  diff::ValueId encode(std::int32_t user, std::int32_t item);
  diff::ValueId logical_not(diff::ValueId e);
  diff::ValueId logical_or(diff::ValueId a, diff::ValueId b);
  diff::ValueId logical_and(diff::ValueId a, diff::ValueId b);
  // Eq. 3 literal: the event itself for positive feedback, its negation for
  // negative feedback.
  diff::ValueId literal(diff::ValueId event, int feedback);
  // Left-to-right OR fold of the transformed literals, then the target event.
  diff::ValueId expression(std::span<const diff::ValueId> transformed_literals,
                           diff::ValueId target_event);
  // (1 + cos(expr, T)) / 2
  diff::ValueId similarity_to_true(diff::ValueId expr);

  // Parameter leaves touched so far (for the l2 term).
  const std::vector<diff::ValueId>& touched_params() const { return touched_; }

  // Rolls the tape back and drops cached leaves that no longer exist. Use
  // this instead of Tape::rollback whenever the graph object outlives the
  // mark (shared-prefix candidate loops, per-step intervention graphs).
  void rollback(std::size_t mark);

 private:
  diff::ValueId leaf(const std::string& name);
  diff::ValueId row_leaf(const std::string& name, std::size_t row, std::int32_t key);
  diff::ValueId mlp2(diff::ValueId x, const char* w1, const char* b1, const char* w2,
                     const char* b2);

  const NcrModel& model_;
  diff::Tape& tape_;
  bool train_;
  std::vector<std::pair<std::string, diff::ValueId>> leaves_;
  std::vector<std::pair<std::int64_t, diff::ValueId>> row_leaves_;
  std::vector<diff::ValueId> touched_;
};

// The NCR network: event encoder (2-layer MLP over [u;v]), learned NOT / OR /
// AND modules, and similarity-to-True scoring of the material-implication
// expression.
class NcrModel {
 public:
  explicit NcrModel(const NcrConfig& cfg);

  const NcrConfig& config() const { return cfg_; }
  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }

  // Frozen-parameter scoring of one candidate given a user's history window.
  double score(std::int32_t user, std::span<const std::int32_t> items,
               std::span<const std::uint8_t> feedback, std::int32_t candidate) const;

  // Scores every (deduplicated) candidate; descending score, ties by
  // ascending item id. The expression prefix is shared across candidates.
  std::vector<ScoredItem> rank_candidates(std::int32_t user,
                                          std::span<const std::int32_t> items,
                                          std::span<const std::uint8_t> feedback,
                                          std::span<const std::int32_t> candidates) const;

  std::vector<EpochStats> train(const std::vector<data::TrainingExample>& examples,
                                const TrainConfig& tc);

  void save(const std::string& path) const;
  static NcrModel load(const std::string& path);

 private:
  friend class NcrGraph;
  NcrConfig cfg_;
  diff::ParamStore params_;
};

// Training loss for one example against sampled negatives (mean pairwise
// term over the negatives; the expression prefix is shared). Exposed for
// gradient tests. Returns the scalar loss node.
diff::ValueId example_loss(NcrGraph& g, diff::Tape& tape, const NcrConfig& cfg,
                           const data::TrainingExample& ex,
                           std::span<const std::int32_t> negatives,
                           double* logic_reg_out = nullptr);

}  // namespace ccr::logic
