#include "ccr/logic/ncr.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "ccr/common.hpp"

namespace ccr::logic {

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

std::uint64_t tensor_seed(std::uint64_t model_seed, const char* name) {
  return mix_seed(model_seed, fnv1a64(name));
}

// Operating-point initializations for the logic modules. On the region
// ||x||_inf < c a 2-layer ReLU MLP can realize exact linear maps via the
// shift trick relu(Ax + c) = Ax + c; the weights stay fully trainable.
constexpr double kLinearRegion = 4.0;

// W1 = -I, b1 = c  =>  h = relu(c - x) = c - x;  W2 = I, b2 = -c  =>  y = -x.
// NOT starts as exact vector negation, so double negation is the identity
// from step zero and feedback polarity is visible to the rest of the net.
void init_negation(diff::ParamStore& p, const char* w1, const char* b1, const char* w2,
                   const char* b2, std::size_t d) {
  auto& W1 = p.at(w1).value;
  auto& W2 = p.at(w2).value;
  std::fill(W1.begin(), W1.end(), 0.0);
  std::fill(W2.begin(), W2.end(), 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    W1[i * d + i] = -1.0;
    W2[i * d + i] = 1.0;
  }
  std::fill(p.at(b1).value.begin(), p.at(b1).value.end(), kLinearRegion);
  std::fill(p.at(b2).value.begin(), p.at(b2).value.end(), -kLinearRegion);
}

// W1 = [I I], rest as above: the binary module starts as vector addition.
void init_sum(diff::ParamStore& p, const char* w1, const char* b1, const char* w2,
              const char* b2, std::size_t d) {
  auto& W1 = p.at(w1).value;  // d x 2d
  auto& W2 = p.at(w2).value;  // d x d
  std::fill(W1.begin(), W1.end(), 0.0);
  std::fill(W2.begin(), W2.end(), 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    W1[i * 2 * d + i] = 1.0;
    W1[i * 2 * d + d + i] = 1.0;
    W2[i * d + i] = 1.0;
  }
  std::fill(p.at(b1).value.begin(), p.at(b1).value.end(), kLinearRegion);
  std::fill(p.at(b2).value.begin(), p.at(b2).value.end(), -kLinearRegion);
}

// Deterministic Fisher-Yates, independent of the standard library's shuffle.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

NcrModel::NcrModel(const NcrConfig& cfg) : cfg_(cfg) {
  if (cfg.n_users == 0 || cfg.n_items == 0) {
    throw ConfigError("NcrModel needs positive user and item counts");
  }
  const std::size_t d = cfg.embed_dim;
  const auto s = cfg.seed;
  params_.add("user_emb", Shape::mat(cfg.n_users, d),
              normal_init(tensor_seed(s, "user_emb"), cfg.n_users * d, 0.1));
  params_.add("item_emb", Shape::mat(cfg.n_items, d),
              normal_init(tensor_seed(s, "item_emb"), cfg.n_items * d, 0.1));
  params_.add("enc_w1", Shape::mat(d, 2 * d), glorot_init(tensor_seed(s, "enc_w1"), d, 2 * d));
  params_.add("enc_b1", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("enc_w2", Shape::mat(d, d), glorot_init(tensor_seed(s, "enc_w2"), d, d));
  params_.add("enc_b2", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("not_w1", Shape::mat(d, d), glorot_init(tensor_seed(s, "not_w1"), d, d));
  params_.add("not_b1", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("not_w2", Shape::mat(d, d), glorot_init(tensor_seed(s, "not_w2"), d, d));
  params_.add("not_b2", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("or_w1", Shape::mat(d, 2 * d), glorot_init(tensor_seed(s, "or_w1"), d, 2 * d));
  params_.add("or_b1", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("or_w2", Shape::mat(d, d), glorot_init(tensor_seed(s, "or_w2"), d, d));
  params_.add("or_b2", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("and_w1", Shape::mat(d, 2 * d), glorot_init(tensor_seed(s, "and_w1"), d, 2 * d));
  params_.add("and_b1", Shape::vec(d), std::vector<double>(d, 0.0));
  params_.add("and_w2", Shape::mat(d, d), glorot_init(tensor_seed(s, "and_w2"), d, d));
  params_.add("and_b2", Shape::vec(d), std::vector<double>(d, 0.0));

  auto t = normal_init(tensor_seed(s, "true_vec"), d, 1.0);
  double norm = 0.0;
  for (double x : t) norm += x * x;
  norm = std::sqrt(norm);
  for (auto& x : t) x /= norm;
  params_.add("true_vec", Shape::vec(d), std::move(t), /*trainable=*/false);

  init_negation(params_, "not_w1", "not_b1", "not_w2", "not_b2", d);
  init_sum(params_, "or_w1", "or_b1", "or_w2", "or_b2", d);
  init_sum(params_, "and_w1", "and_b1", "and_w2", "and_b2", d);
}

NcrGraph::NcrGraph(const NcrModel& model, Tape& tape, bool train)
    : model_(model), tape_(tape), train_(train) {}

ValueId NcrGraph::leaf(const std::string& name) {
  for (const auto& [n, id] : leaves_) {
    if (n == name) return id;
  }
  const auto& entry = model_.params_.at(name);
  ValueId id;
  if (train_) {
    id = tape_.param(const_cast<diff::ParamStore&>(model_.params_), name);
    if (entry.trainable) touched_.push_back(id);
  } else {
    id = tape_.input(entry.shape, entry.value.data());
  }
  leaves_.emplace_back(name, id);
  return id;
}

ValueId NcrGraph::row_leaf(const std::string& name, std::size_t row, std::int32_t table_tag) {
  const std::int64_t key =
      (static_cast<std::int64_t>(table_tag) << 40) | static_cast<std::int64_t>(row);
  for (const auto& [k, id] : row_leaves_) {
    if (k == key) return id;
  }
  const auto& entry = model_.params_.at(name);
  if (entry.shape.rank != 2 || row >= entry.shape.rows) {
    throw ContractError("embedding id " + std::to_string(row) + " out of range for " + name +
                        " " + entry.shape.str());
  }
  ValueId id;
  if (train_) {
    id = tape_.param_row(const_cast<diff::ParamStore&>(model_.params_), name, row);
    touched_.push_back(id);
  } else {
    id = tape_.input(Shape::vec(entry.shape.cols), entry.value.data() + row * entry.shape.cols);
  }
  row_leaves_.emplace_back(key, id);
  return id;
}

void NcrGraph::rollback(std::size_t mark) {
  tape_.rollback(mark);
  const auto cutoff = static_cast<ValueId>(mark);
  std::erase_if(leaves_, [&](const auto& p) { return p.second >= cutoff; });
  std::erase_if(row_leaves_, [&](const auto& p) { return p.second >= cutoff; });
  std::erase_if(touched_, [&](ValueId id) { return id >= cutoff; });
}

ValueId NcrGraph::user_emb(std::int32_t user) {
  if (user < 0) throw ContractError("negative user id");
  return row_leaf("user_emb", static_cast<std::size_t>(user), 0);
}

ValueId NcrGraph::item_emb(std::int32_t item) {
  if (item < 0) throw ContractError("negative item id");
  return row_leaf("item_emb", static_cast<std::size_t>(item), 1);
}

ValueId NcrGraph::mlp2(ValueId x, const char* w1, const char* b1, const char* w2,
                       const char* b2) {
  const ValueId h = tape_.relu(tape_.add(tape_.matmul(leaf(w1), x), leaf(b1)));
  return tape_.add(tape_.matmul(leaf(w2), h), leaf(b2));
}

ValueId NcrGraph::encode(std::int32_t user, std::int32_t item) {
  const ValueId uv = tape_.concat(user_emb(user), item_emb(item));
  return mlp2(uv, "enc_w1", "enc_b1", "enc_w2", "enc_b2");
}

ValueId NcrGraph::logical_not(ValueId e) {
  return mlp2(e, "not_w1", "not_b1", "not_w2", "not_b2");
}

ValueId NcrGraph::logical_or(ValueId a, ValueId b) {
  return mlp2(tape_.concat(a, b), "or_w1", "or_b1", "or_w2", "or_b2");
}

ValueId NcrGraph::logical_and(ValueId a, ValueId b) {
  return mlp2(tape_.concat(a, b), "and_w1", "and_b1", "and_w2", "and_b2");
}

ValueId NcrGraph::literal(ValueId event, int feedback) {
  return feedback ? event : logical_not(event);
}

ValueId NcrGraph::expression(std::span<const ValueId> transformed_literals,
                             ValueId target_event) {
  if (transformed_literals.empty()) return target_event;
  ValueId fold = transformed_literals[0];
  for (std::size_t i = 1; i < transformed_literals.size(); ++i) {
    fold = logical_or(fold, transformed_literals[i]);
  }
  return logical_or(fold, target_event);
}

ValueId NcrGraph::similarity_to_true(ValueId expr) {
  const ValueId cos = tape_.cosine(expr, leaf("true_vec"));
  return tape_.add_const(tape_.scale(cos, 0.5), 0.5);
}

double NcrModel::score(std::int32_t user, std::span<const std::int32_t> items,
                       std::span<const std::uint8_t> feedback, std::int32_t candidate) const {
  const std::int32_t cand[] = {candidate};
  return rank_candidates(user, items, feedback, cand).front().score;
}

std::vector<ScoredItem> NcrModel::rank_candidates(
    std::int32_t user, std::span<const std::int32_t> items,
    std::span<const std::uint8_t> feedback, std::span<const std::int32_t> candidates) const {
  if (items.size() != feedback.size()) {
    throw ContractError("history and feedback lengths differ");
  }
  if (candidates.empty()) throw ContractError("rank_candidates: empty candidate set");
  if (items.size() > cfg_.window) {
    throw ContractError("history longer than the model window");
  }

  std::vector<std::int32_t> unique(candidates.begin(), candidates.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  Tape tape;
  NcrGraph g(*this, tape, /*train=*/false);
  std::vector<ValueId> transformed;
  transformed.reserve(items.size());
  for (std::size_t t = 0; t < items.size(); ++t) {
    const ValueId e = g.encode(user, items[t]);
    transformed.push_back(g.logical_not(g.literal(e, feedback[t])));
  }
  ValueId fold = -1;
  if (!transformed.empty()) {
    fold = transformed[0];
    for (std::size_t i = 1; i < transformed.size(); ++i) {
      fold = g.logical_or(fold, transformed[i]);
    }
  }

  const std::size_t mark = tape.size();
  std::vector<ScoredItem> out;
  out.reserve(unique.size());
  for (const std::int32_t item : unique) {
    const ValueId target = g.encode(user, item);
    const ValueId expr = fold >= 0 ? g.logical_or(fold, target) : target;
    out.push_back({item, tape.scalar_value(g.similarity_to_true(expr))});
    g.rollback(mark);
  }
  std::sort(out.begin(), out.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  });
  return out;
}

ValueId example_loss(NcrGraph& g, Tape& tape, const NcrConfig& cfg,
                     const data::TrainingExample& ex,
                     std::span<const std::int32_t> negatives, double* logic_reg_out) {
  if (negatives.empty()) throw ContractError("example_loss: no negatives");
  const std::size_t w = ex.history.size();
  std::vector<ValueId> events(w), transformed(w);
  for (std::size_t t = 0; t < w; ++t) {
    events[t] = g.encode(ex.user, ex.history[t]);
    transformed[t] = g.logical_not(g.literal(events[t], ex.feedback[t]));
  }
  const ValueId pos_event = g.encode(ex.user, ex.target);

  ValueId fold = -1;
  if (w > 0) {
    fold = transformed[0];
    for (std::size_t i = 1; i < w; ++i) fold = g.logical_or(fold, transformed[i]);
  }
  const ValueId pos_expr = fold >= 0 ? g.logical_or(fold, pos_event) : pos_event;
  const ValueId pos_s = g.similarity_to_true(pos_expr);

  ValueId core_sum = -1;
  for (const std::int32_t negative : negatives) {
    const ValueId neg_event = g.encode(ex.user, negative);
    const ValueId neg_expr = fold >= 0 ? g.logical_or(fold, neg_event) : neg_event;
    const ValueId neg_s = g.similarity_to_true(neg_expr);
    const ValueId term = tape.softplus(tape.scale(tape.sub(pos_s, neg_s), -cfg.beta));
    core_sum = core_sum < 0 ? term : tape.add(core_sum, term);
  }
  const ValueId core = tape.scale(core_sum, 1.0 / static_cast<double>(negatives.size()));

  // Double-negation residual ||¬¬e - e||² over the example's events. For a
  // negative-feedback literal ¬¬e is already on the tape as its transformed
  // literal; positive literals need one extra NOT application.
  ValueId reg_sum = -1;
  for (std::size_t t = 0; t < w; ++t) {
    const ValueId nn = ex.feedback[t] ? g.logical_not(transformed[t]) : transformed[t];
    const ValueId d = tape.sub(nn, events[t]);
    const ValueId term = tape.dot(d, d);
    reg_sum = reg_sum < 0 ? term : tape.add(reg_sum, term);
  }
  const ValueId nn_pos = g.logical_not(g.logical_not(pos_event));
  const ValueId d_pos = tape.sub(nn_pos, pos_event);
  const ValueId pos_term = tape.dot(d_pos, d_pos);
  reg_sum = reg_sum < 0 ? pos_term : tape.add(reg_sum, pos_term);
  const ValueId reg_mean = tape.scale(reg_sum, 1.0 / static_cast<double>(w + 1));
  if (logic_reg_out) *logic_reg_out = tape.scalar_value(reg_mean);

  ValueId l2 = -1;
  for (const ValueId p : g.touched_params()) {
    const ValueId term = tape.sum(tape.mul(p, p));
    l2 = l2 < 0 ? term : tape.add(l2, term);
  }

  ValueId loss = tape.add(core, tape.scale(reg_mean, cfg.lambda_logic));
  if (l2 >= 0) loss = tape.add(loss, tape.scale(l2, cfg.lambda_l2));
  return loss;
}

std::vector<EpochStats> NcrModel::train(const std::vector<data::TrainingExample>& examples,
                                        const TrainConfig& tc) {
  if (examples.empty()) throw ContractError("train: empty example set");
  for (const auto& ex : examples) {
    if (ex.history.size() != cfg_.window) {
      throw ContractError("training example window " + std::to_string(ex.history.size()) +
                          " does not match model window " + std::to_string(cfg_.window));
    }
  }

  auto rng = make_rng(mix_seed(tc.seed, fnv1a64("ncr-train")));
  std::uniform_int_distribution<std::int32_t> item_pick(
      0, static_cast<std::int32_t>(cfg_.n_items) - 1);
  // Popularity sampling draws from the multiset of training targets.
  std::vector<std::int32_t> target_pool;
  if (tc.sampling == NegativeSampling::kPopularity) {
    target_pool.reserve(examples.size());
    for (const auto& ex : examples) target_pool.push_back(ex.target);
  }
  std::uniform_int_distribution<std::size_t> pool_pick(
      0, target_pool.empty() ? 0 : target_pool.size() - 1);
  auto draw_negative = [&](std::int32_t target) {
    std::int32_t neg;
    do {
      neg = tc.sampling == NegativeSampling::kPopularity ? target_pool[pool_pick(rng)]
                                                         : item_pick(rng);
    } while (neg == target);
    return neg;
  };
  diff::Adam adam;
  Tape tape;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochStats> stats;
  const int negatives = std::max(tc.negatives, 1);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    shuffle_indices(order, rng);
    double epoch_loss = 0.0;
    double epoch_reg = 0.0;
    std::size_t terms = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tc.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch));
      const double inv = 1.0 / static_cast<double>(end - start);
      params_.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = examples[order[i]];
        std::vector<std::int32_t> negs(static_cast<std::size_t>(negatives));
        for (auto& n : negs) n = draw_negative(ex.target);
        tape.clear();
        NcrGraph g(*this, tape, /*train=*/true);
        double reg = 0.0;
        const ValueId loss = example_loss(g, tape, cfg_, ex, negs, &reg);
        epoch_loss += tape.scalar_value(loss);
        epoch_reg += reg;
        ++terms;
        tape.backward(loss, inv);
      }
      adam.step(params_, tc.lr);
    }
    EpochStats st;
    st.loss = epoch_loss / static_cast<double>(terms);
    st.logic_reg = epoch_reg / static_cast<double>(terms);
    stats.push_back(st);
  }
  return stats;
}

void NcrModel::save(const std::string& path) const {
  nlohmann::json meta;
  meta["model_kind"] = "ncr";
  meta["config"] = {{"n_users", cfg_.n_users},     {"n_items", cfg_.n_items},
                    {"embed_dim", cfg_.embed_dim}, {"window", cfg_.window},
                    {"beta", cfg_.beta},           {"lambda_logic", cfg_.lambda_logic},
                    {"lambda_l2", cfg_.lambda_l2}, {"seed", cfg_.seed}};
  diff::save_checkpoint(path, params_, meta);
}

NcrModel NcrModel::load(const std::string& path) {
  auto ckpt = diff::load_checkpoint(path);
  const auto meta = nlohmann::json::parse(ckpt.meta_json);
  if (meta.value("model_kind", "") != "ncr") {
    throw DataError("checkpoint at " + path + " is not an ncr model");
  }
  const auto& c = meta.at("config");
  NcrConfig cfg;
  cfg.n_users = c.at("n_users").get<std::size_t>();
  cfg.n_items = c.at("n_items").get<std::size_t>();
  cfg.embed_dim = c.at("embed_dim").get<std::size_t>();
  cfg.window = c.at("window").get<std::size_t>();
  cfg.beta = c.at("beta").get<double>();
  cfg.lambda_logic = c.at("lambda_logic").get<double>();
  cfg.lambda_l2 = c.at("lambda_l2").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();

  NcrModel model(cfg);
  for (std::size_t i = 0; i < model.params_.size(); ++i) {
    auto& entry = model.params_.entry(i);
    entry.value = ckpt.params.at(entry.name).value;
  }
  return model;
}

}  // namespace ccr::logic
