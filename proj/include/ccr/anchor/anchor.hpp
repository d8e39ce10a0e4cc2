#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccr/data/dataset.hpp"
#include "ccr/logic/ncr.hpp"

namespace ccr::anchor {

// A user's scoring context: the window of historical items with their
// explicit feedback bits.
struct Query {
  std::int32_t user = 0;
  std::span<const std::int32_t> items;
  std::span<const std::uint8_t> feedback;
};

struct AnchorTrainConfig {
  double lr = 0.001;
  int epochs = 10;
  int batch = 128;
  int negatives = 1;
  std::uint64_t seed = 1;
};

// Behavior contract shared by the NCR and recurrent anchors: train /
// re-optimize on examples, score deterministically against the current
// parameters, rank with a fixed tie-break.
class AnchorModel {
 public:
  virtual ~AnchorModel() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t window() const = 0;
  virtual std::size_t n_items() const = 0;

  // Returns the per-epoch mean training loss; counterfactual examples weigh
  // the same as originals.
  virtual std::vector<double> train(const std::vector<data::TrainingExample>& examples,
                                    const AnchorTrainConfig& tc) = 0;

  virtual double score(const Query& q, std::int32_t item) const = 0;

  // Full ordering of the (deduplicated) candidates: descending score, ties by
  // ascending item id.
  virtual std::vector<logic::ScoredItem> rank(const Query& q,
                                              std::span<const std::int32_t> candidates) const = 0;

  virtual void save(const std::string& path) const = 0;

  std::vector<std::int32_t> rank_top_k(const Query& q, std::span<const std::int32_t> candidates,
                                       std::size_t k) const;
};

class NcrAnchor : public AnchorModel {
 public:
  explicit NcrAnchor(logic::NcrModel model) : model_(std::move(model)) {}

  std::string kind() const override { return "ncr"; }
  std::size_t window() const override { return model_.config().window; }
  std::size_t n_items() const override { return model_.config().n_items; }
  std::vector<double> train(const std::vector<data::TrainingExample>& examples,
                            const AnchorTrainConfig& tc) override;
  double score(const Query& q, std::int32_t item) const override;
  std::vector<logic::ScoredItem> rank(const Query& q,
                                      std::span<const std::int32_t> candidates) const override;
  void save(const std::string& path) const override { model_.save(path); }

  const logic::NcrModel& model() const { return model_; }
  logic::NcrModel& model() { return model_; }

 private:
  logic::NcrModel model_;
};

// Loads any anchor checkpoint, dispatching on the header's model-kind tag.
std::unique_ptr<AnchorModel> load_anchor(const std::string& path);

// Fresh anchor of the requested kind ("ncr" or "recurrent").
std::unique_ptr<AnchorModel> make_anchor(const std::string& kind, std::size_t n_users,
                                         std::size_t n_items, std::size_t embed_dim,
                                         std::size_t window, std::uint64_t seed);

}  // namespace ccr::anchor
