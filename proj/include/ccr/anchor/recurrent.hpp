#pragma once

#include "ccr/anchor/anchor.hpp"
#include "ccr/diff/params.hpp"
#include "ccr/diff/tape.hpp"

namespace ccr::anchor {

struct RecurrentConfig {
  std::size_t n_items = 0;
  std::size_t embed_dim = 64;
  std::size_t window = 5;
  double lambda_l2 = 1e-4;
  std::uint64_t seed = 1;
};

// Lightweight recurrent anchor: item embeddings plus additive feedback
// embeddings feed a gated cell (update + candidate gates); the final hidden
// state is projected and scored by dot product with the candidate embedding.
// Feedback embeddings are what make counterfactual B* visible to it.
class RecurrentAnchor : public AnchorModel {
 public:
  explicit RecurrentAnchor(const RecurrentConfig& cfg);

  std::string kind() const override { return "recurrent"; }
  std::size_t window() const override { return cfg_.window; }
  std::size_t n_items() const override { return cfg_.n_items; }
  std::vector<double> train(const std::vector<data::TrainingExample>& examples,
                            const AnchorTrainConfig& tc) override;
  double score(const Query& q, std::int32_t item) const override;
  std::vector<logic::ScoredItem> rank(const Query& q,
                                      std::span<const std::int32_t> candidates) const override;
  void save(const std::string& path) const override;
  static RecurrentAnchor load(const std::string& path);

  const RecurrentConfig& config() const { return cfg_; }
  diff::ParamStore& params() { return params_; }

  // Projected representation of a history (frozen parameters); exposed so
  // tests can check feedback sensitivity directly.
  std::vector<double> project_history(const Query& q) const;

 private:
  diff::ValueId build_projection(diff::Tape& tape, bool train, const Query& q,
                                 std::vector<diff::ValueId>* touched) const;

  RecurrentConfig cfg_;
  diff::ParamStore params_;
};

}  // namespace ccr::anchor
