#pragma once

// Shared desk-scale planted-logic fixtures for model-level tests.

#include <memory>
#include <vector>

#include "ccr/anchor/anchor.hpp"
#include "ccr/data/dataset.hpp"
#include "ccr/data/synthetic.hpp"
#include "ccr/logic/ncr.hpp"

namespace ccr::testing {

struct PlantedWorld {
  data::SyntheticCorpus corpus;
  std::vector<data::UserSequence> sequences;
  data::DatasetSplit split;
  std::vector<data::TrainingExample> train_examples;
  std::vector<std::vector<std::int32_t>> user_items;
};

inline PlantedWorld make_world(const data::SyntheticSpec& spec, std::size_t window) {
  PlantedWorld w;
  w.corpus = data::generate_planted_logic_corpus(spec);
  w.sequences = data::build_sequences(w.corpus.interactions, w.corpus.n_users);
  w.split = data::split_leave_one_out(w.sequences);
  w.train_examples = data::windowize(w.split.train, window);
  w.user_items = data::user_item_sets(w.sequences, w.corpus.n_users);
  return w;
}

inline logic::NcrModel train_ncr(const PlantedWorld& w, std::size_t embed_dim,
                                 std::size_t window, int epochs, double lr,
                                 std::uint64_t seed) {
  logic::NcrConfig mc;
  mc.n_users = w.corpus.n_users;
  mc.n_items = w.corpus.n_items;
  mc.embed_dim = embed_dim;
  mc.window = window;
  mc.seed = seed;
  logic::NcrModel model(mc);
  logic::TrainConfig tc;
  tc.lr = lr;
  tc.epochs = epochs;
  tc.batch = 128;
  tc.seed = seed + 1;
  model.train(w.train_examples, tc);
  return model;
}

// Test-only anchor that knows the rule table: scores 1 when the candidate is
// the consequence of the most recent trigger in the history, else 0.
class RuleOracleAnchor : public anchor::AnchorModel {
 public:
  RuleOracleAnchor(data::RuleTable rules, std::size_t n_items, std::size_t window)
      : rules_(std::move(rules)), n_items_(n_items), window_(window) {}

  std::string kind() const override { return "rule-oracle"; }
  std::size_t window() const override { return window_; }
  std::size_t n_items() const override { return n_items_; }
  std::vector<double> train(const std::vector<data::TrainingExample>&,
                            const anchor::AnchorTrainConfig&) override {
    return {};
  }
  double score(const anchor::Query& q, std::int32_t item) const override {
    for (std::size_t t = q.items.size(); t-- > 0;) {
      if (rules_.is_trigger(q.items[t])) {
        return rules_.next_item(q.items[t], q.feedback[t]) == item ? 1.0 : 0.0;
      }
    }
    return 0.0;
  }
  std::vector<logic::ScoredItem> rank(const anchor::Query& q,
                                      std::span<const std::int32_t> candidates) const override {
    std::vector<std::int32_t> unique(candidates.begin(), candidates.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::vector<logic::ScoredItem> out;
    for (const auto c : unique) out.push_back({c, score(q, c)});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.item < b.item;
    });
    return out;
  }
  void save(const std::string&) const override {}

 private:
  data::RuleTable rules_;
  std::size_t n_items_;
  std::size_t window_;
};

}  // namespace ccr::testing
