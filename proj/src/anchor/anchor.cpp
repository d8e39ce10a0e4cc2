#include "ccr/anchor/anchor.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ccr/anchor/recurrent.hpp"
#include "ccr/common.hpp"

namespace ccr::anchor {

std::vector<std::int32_t> AnchorModel::rank_top_k(const Query& q,
                                                  std::span<const std::int32_t> candidates,
                                                  std::size_t k) const {
  if (k > candidates.size()) {
    throw ContractError("rank_top_k: k=" + std::to_string(k) + " exceeds " +
                        std::to_string(candidates.size()) + " candidates");
  }
  const auto ranked = rank(q, candidates);
  std::vector<std::int32_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k && i < ranked.size(); ++i) out.push_back(ranked[i].item);
  return out;
}

std::vector<double> NcrAnchor::train(const std::vector<data::TrainingExample>& examples,
                                     const AnchorTrainConfig& tc) {
  logic::TrainConfig ltc;
  ltc.lr = tc.lr;
  ltc.epochs = tc.epochs;
  ltc.batch = tc.batch;
  ltc.negatives = tc.negatives;
  ltc.seed = tc.seed;
  std::vector<double> losses;
  for (const auto& st : model_.train(examples, ltc)) losses.push_back(st.loss);
  return losses;
}

double NcrAnchor::score(const Query& q, std::int32_t item) const {
  return model_.score(q.user, q.items, q.feedback, item);
}

std::vector<logic::ScoredItem> NcrAnchor::rank(const Query& q,
                                               std::span<const std::int32_t> candidates) const {
  return model_.rank_candidates(q.user, q.items, q.feedback, candidates);
}

std::unique_ptr<AnchorModel> load_anchor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError("checkpoint missing header: " + path);
  in.close();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  const std::string kind = header.value("meta", nlohmann::json::object()).value("model_kind", "");
  if (kind == "ncr") return std::make_unique<NcrAnchor>(logic::NcrModel::load(path));
  if (kind == "recurrent") {
    return std::make_unique<RecurrentAnchor>(RecurrentAnchor::load(path));
  }
  throw DataError("unknown model kind \"" + kind + "\" in checkpoint " + path);
}

std::unique_ptr<AnchorModel> make_anchor(const std::string& kind, std::size_t n_users,
                                         std::size_t n_items, std::size_t embed_dim,
                                         std::size_t window, std::uint64_t seed) {
  if (kind == "ncr") {
    logic::NcrConfig cfg;
    cfg.n_users = n_users;
    cfg.n_items = n_items;
    cfg.embed_dim = embed_dim;
    cfg.window = window;
    cfg.seed = seed;
    return std::make_unique<NcrAnchor>(logic::NcrModel(cfg));
  }
  if (kind == "recurrent") {
    RecurrentConfig cfg;
    cfg.n_items = n_items;
    cfg.embed_dim = embed_dim;
    cfg.window = window;
    cfg.seed = seed;
    return std::make_unique<RecurrentAnchor>(cfg);
  }
  throw ConfigError("unknown anchor kind: " + kind);
}

}  // namespace ccr::anchor
