#include "ccr/anchor/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "ccr/common.hpp"
#include "ccr/kernels/kernels.hpp"

namespace ccr::anchor {

namespace {

using diff::Shape;
using diff::Tape;
using diff::ValueId;

std::vector<double> normal_init(std::uint64_t seed, std::size_t n, double stddev) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<double> glorot_init(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  auto rng = make_rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng);
  return v;
}

void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

RecurrentAnchor::RecurrentAnchor(const RecurrentConfig& cfg) : cfg_(cfg) {
  if (cfg.n_items == 0) throw ConfigError("RecurrentAnchor needs a positive item count");
  const std::size_t d = cfg.embed_dim;
  auto ts = [&](const char* name) { return mix_seed(cfg.seed, fnv1a64(name)); };
  params_.add("item_emb", Shape::mat(cfg.n_items, d),
              normal_init(ts("item_emb"), cfg.n_items * d, 0.1));
  params_.add("fb_emb", Shape::mat(2, d), normal_init(ts("fb_emb"), 2 * d, 0.1));
  params_.add("wz", Shape::mat(d, d), glorot_init(ts("wz"), d, d));
  params_.add("uz", Shape::mat(d, d), glorot_init(ts("uz"), d, d));
  params_.add("bz", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("wh", Shape::mat(d, d), glorot_init(ts("wh"), d, d));
  params_.add("uh", Shape::mat(d, d), glorot_init(ts("uh"), d, d));
  params_.add("bh", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("wo", Shape::mat(d, d), glorot_init(ts("wo"), d, d));
  params_.add("bo", Shape::vec(d), std::vector<double>(d, 0.0));
}

ValueId RecurrentAnchor::build_projection(Tape& tape, bool train, const Query& q,
                                          std::vector<ValueId>* touched) const {
  if (q.items.size() != q.feedback.size()) {
    throw ContractError("history and feedback lengths differ");
  }
  if (q.items.empty()) throw ContractError("recurrent anchor needs a non-empty history");

  auto& store = const_cast<diff::ParamStore&>(params_);
  std::vector<std::pair<std::string, ValueId>> cache;
  auto leaf = [&](const std::string& name) {
    for (const auto& [n, id] : cache) {
      if (n == name) return id;
    }
    ValueId id;
    if (train) {
      id = tape.param(store, name);
      if (touched) touched->push_back(id);
    } else {
      const auto& e = params_.at(name);
      id = tape.input(e.shape, e.value.data());
    }
    cache.emplace_back(name, id);
    return id;
  };
  auto item_row = [&](std::int32_t item) {
    if (item < 0 || static_cast<std::size_t>(item) >= cfg_.n_items) {
      throw ContractError("item id " + std::to_string(item) + " out of range");
    }
    if (train) {
      const ValueId id = tape.param_row(store, "item_emb", static_cast<std::size_t>(item));
      if (touched) touched->push_back(id);
      return id;
    }
    const auto& e = params_.at("item_emb");
    return tape.input(Shape::vec(e.shape.cols),
                      e.value.data() + static_cast<std::size_t>(item) * e.shape.cols);
  };
  auto fb_row = [&](std::uint8_t fb) {
    if (train) {
      const ValueId id = tape.param_row(store, "fb_emb", fb ? 1u : 0u);
      if (touched) touched->push_back(id);
      return id;
    }
    const auto& e = params_.at("fb_emb");
    return tape.input(Shape::vec(e.shape.cols), e.value.data() + (fb ? 1u : 0u) * e.shape.cols);
  };

  const std::vector<double> zeros(cfg_.embed_dim, 0.0);
  ValueId h = tape.input(zeros);
  for (std::size_t t = 0; t < q.items.size(); ++t) {
    const ValueId x = tape.add(item_row(q.items[t]), fb_row(q.feedback[t]));
    const ValueId z = tape.sigmoid(
        tape.add(tape.add(tape.matmul(leaf("wz"), x), tape.matmul(leaf("uz"), h)), leaf("bz")));
    const ValueId cand = tape.tanh(
        tape.add(tape.add(tape.matmul(leaf("wh"), x), tape.matmul(leaf("uh"), h)), leaf("bh")));
    const ValueId keep = tape.add_const(tape.scale(z, -1.0), 1.0);  // 1 - z
    h = tape.add(tape.mul(keep, h), tape.mul(z, cand));
  }
  return tape.add(tape.matmul(leaf("wo"), h), leaf("bo"));
}

std::vector<double> RecurrentAnchor::project_history(const Query& q) const {
  Tape tape;
  const ValueId out = build_projection(tape, /*train=*/false, q, nullptr);
  return tape.value(out);
}

double RecurrentAnchor::score(const Query& q, std::int32_t item) const {
  if (item < 0 || static_cast<std::size_t>(item) >= cfg_.n_items) {
    throw ContractError("item id " + std::to_string(item) + " out of range");
  }
  const auto out = project_history(q);
  const auto& emb = params_.at("item_emb");
  return kernels::active().dot(
      out.data(), emb.value.data() + static_cast<std::size_t>(item) * emb.shape.cols, out.size());
}

std::vector<logic::ScoredItem> RecurrentAnchor::rank(
    const Query& q, std::span<const std::int32_t> candidates) const {
  if (candidates.empty()) throw ContractError("rank: empty candidate set");
  std::vector<std::int32_t> unique(candidates.begin(), candidates.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  const auto out = project_history(q);
  const auto& emb = params_.at("item_emb");
  std::vector<logic::ScoredItem> scored;
  scored.reserve(unique.size());
  for (const std::int32_t item : unique) {
    if (item < 0 || static_cast<std::size_t>(item) >= cfg_.n_items) {
      throw ContractError("item id " + std::to_string(item) + " out of range");
    }
    const double s = kernels::active().dot(
        out.data(), emb.value.data() + static_cast<std::size_t>(item) * emb.shape.cols,
        out.size());
    scored.push_back({item, s});
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  });
  return scored;
}

std::vector<double> RecurrentAnchor::train(const std::vector<data::TrainingExample>& examples,
                                           const AnchorTrainConfig& tc) {
  if (examples.empty()) throw ContractError("train: empty example set");
  auto rng = make_rng(mix_seed(tc.seed, fnv1a64("recurrent-train")));
  std::uniform_int_distribution<std::int32_t> item_pick(
      0, static_cast<std::int32_t>(cfg_.n_items) - 1);
  diff::Adam adam;
  Tape tape;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> losses;
  const int negatives = std::max(tc.negatives, 1);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    shuffle_indices(order, rng);
    double epoch_loss = 0.0;
    std::size_t terms = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tc.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch));
      const double inv =
          1.0 / static_cast<double>((end - start) * static_cast<std::size_t>(negatives));
      params_.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = examples[order[i]];
        Query q{ex.user, ex.history, ex.feedback};
        for (int k = 0; k < negatives; ++k) {
          std::int32_t neg = item_pick(rng);
          while (neg == ex.target) neg = item_pick(rng);
          tape.clear();
          std::vector<ValueId> touched;
          const ValueId out = build_projection(tape, /*train=*/true, q, &touched);
          auto& store = params_;
          const ValueId pos_emb = tape.param_row(store, "item_emb",
                                                 static_cast<std::size_t>(ex.target));
          const ValueId neg_emb =
              tape.param_row(store, "item_emb", static_cast<std::size_t>(neg));
          touched.push_back(pos_emb);
          touched.push_back(neg_emb);
          const ValueId margin = tape.sub(tape.dot(out, pos_emb), tape.dot(out, neg_emb));
          ValueId loss = tape.softplus(tape.scale(margin, -1.0));
          ValueId l2 = -1;
          for (const ValueId p : touched) {
            const ValueId term = tape.sum(tape.mul(p, p));
            l2 = l2 < 0 ? term : tape.add(l2, term);
          }
          if (l2 >= 0) loss = tape.add(loss, tape.scale(l2, cfg_.lambda_l2));
          epoch_loss += tape.scalar_value(loss);
          ++terms;
          tape.backward(loss, inv);
        }
      }
      adam.step(params_, tc.lr);
    }
    losses.push_back(epoch_loss / static_cast<double>(terms));
  }
  return losses;
}

void RecurrentAnchor::save(const std::string& path) const {
  nlohmann::json meta;
  meta["model_kind"] = "recurrent";
  meta["config"] = {{"n_items", cfg_.n_items},
                    {"embed_dim", cfg_.embed_dim},
                    {"window", cfg_.window},
                    {"lambda_l2", cfg_.lambda_l2},
                    {"seed", cfg_.seed}};
  diff::save_checkpoint(path, params_, meta);
}

RecurrentAnchor RecurrentAnchor::load(const std::string& path) {
  auto ckpt = diff::load_checkpoint(path);
  const auto meta = nlohmann::json::parse(ckpt.meta_json);
  if (meta.value("model_kind", "") != "recurrent") {
    throw DataError("checkpoint at " + path + " is not a recurrent model");
  }
  const auto& c = meta.at("config");
  RecurrentConfig cfg;
  cfg.n_items = c.at("n_items").get<std::size_t>();
  cfg.embed_dim = c.at("embed_dim").get<std::size_t>();
  cfg.window = c.at("window").get<std::size_t>();
  cfg.lambda_l2 = c.at("lambda_l2").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  RecurrentAnchor model(cfg);
  for (std::size_t i = 0; i < model.params_.size(); ++i) {
    auto& entry = model.params_.entry(i);
    entry.value = ckpt.params.at(entry.name).value;
  }
  return model;
}

}  // namespace ccr::anchor
