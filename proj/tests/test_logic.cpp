#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"

#include "ccr/anchor/anchor.hpp"
#include "ccr/common.hpp"
#include "ccr/logic/ncr.hpp"
#include "support/finite_diff.hpp"
#include "support/fixtures.hpp"

using ccr::diff::Shape;
using ccr::diff::Tape;
using ccr::diff::ValueId;
using namespace ccr::logic;

namespace {

NcrConfig tiny_config(std::size_t d = 8, std::size_t window = 3) {
  NcrConfig cfg;
  cfg.n_users = 6;
  cfg.n_items = 12;
  cfg.embed_dim = d;
  cfg.window = window;
  cfg.seed = 77;
  return cfg;
}

ccr::data::TrainingExample make_example(std::int32_t user, std::vector<std::int32_t> items,
                                        std::vector<std::uint8_t> fb, std::int32_t target) {
  ccr::data::TrainingExample ex;
  ex.user = user;
  ex.history = std::move(items);
  ex.feedback = std::move(fb);
  ex.target = target;
  return ex;
}

// Trained planted-logic fixture shared across the slow property tests.
struct TrainedFixture {
  ccr::testing::PlantedWorld world;
  NcrModel model;
};

const TrainedFixture& trained_fixture() {
  static const TrainedFixture fixture = [] {
    ccr::data::SyntheticSpec spec;
    spec.seed = 6;
    spec.n_users = 500;
    spec.n_items = 200;
    spec.n_rules = 8;
    spec.seq_len = 24;
    spec.noise_rate = 0.0;
    auto world = ccr::testing::make_world(spec, 5);
    NcrConfig mc;
    mc.n_users = world.corpus.n_users;
    mc.n_items = world.corpus.n_items;
    mc.embed_dim = 32;
    mc.window = 5;
    mc.seed = 11;
    NcrModel model(mc);
    TrainConfig tc;
    tc.lr = 0.005;
    tc.epochs = 18;
    tc.batch = 128;
    tc.negatives = 8;
    tc.seed = 12;
    model.train(world.train_examples, tc);
    return TrainedFixture{std::move(world), std::move(model)};
  }();
  return fixture;
}

}  // namespace

TEST_CASE("encoded events have the configured dimension") {
  NcrConfig cfg;
  cfg.n_users = 3;
  cfg.n_items = 4;
  cfg.embed_dim = 64;  // paper default
  cfg.window = 2;
  cfg.seed = 1;
  NcrModel model(cfg);
  Tape tape;
  NcrGraph g(model, tape, false);
  const ValueId e = g.encode(1, 2);
  CHECK(tape.shape_of(e).rows == 64);
  CHECK(tape.shape_of(g.logical_not(e)).rows == 64);
}

TEST_CASE("zero embeddings and zero weights leave only the encoder bias") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  auto& p = model.params();
  for (const char* name : {"user_emb", "item_emb", "enc_w1", "enc_w2", "enc_b1"}) {
    auto& v = p.at(name).value;
    std::fill(v.begin(), v.end(), 0.0);
  }
  std::vector<double> b2(cfg.embed_dim);
  for (std::size_t i = 0; i < b2.size(); ++i) b2[i] = 0.1 * static_cast<double>(i + 1);
  p.at("enc_b2").value = b2;
  Tape tape;
  NcrGraph g(model, tape, false);
  CHECK(tape.value(g.encode(0, 0)) == b2);
}

TEST_CASE("event gradients match finite differences through the encoder") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  auto& store = model.params();
  const std::vector<double> probe_w = {0.3, -0.7, 0.4, 0.9, -0.2, 0.5, -0.4, 0.8};

  auto forward = [&] {
    Tape tape;
    NcrGraph g(model, tape, false);
    return tape.scalar_value(tape.dot(g.encode(2, 5), tape.input(probe_w)));
  };
  store.zero_grad();
  {
    Tape tape;
    NcrGraph g(model, tape, true);
    tape.backward(tape.dot(g.encode(2, 5), tape.input(probe_w)));
  }
  // Gradient w.r.t. the user embedding row.
  const std::size_t d = cfg.embed_dim;
  std::vector<std::size_t> idx;
  std::vector<double> analytic;
  for (std::size_t j = 0; j < d; ++j) {
    idx.push_back(2 * d + j);
    analytic.push_back(store.at("user_emb").grad[2 * d + j]);
  }
  auto report = ccr::testing::check_param_gradient(store, "user_emb", idx, forward, analytic);
  INFO("worst rel " << report.worst_rel);
  CHECK(report.ok);
}

TEST_CASE("negation flag toggles while the module applies") {
  // The event abstraction pairs the vector with its negation parity.
  auto cfg = tiny_config();
  NcrModel model(cfg);
  Tape tape;
  NcrGraph g(model, tape, false);
  const ValueId e = g.encode(0, 1);
  bool negated = false;
  const ValueId n1 = g.logical_not(e);
  negated = !negated;
  CHECK(negated);
  const ValueId n2 = g.logical_not(n1);
  negated = !negated;
  CHECK_FALSE(negated);
  CHECK(tape.shape_of(n2).rows == cfg.embed_dim);
  // Freshly initialized NOT is exact vector negation, so ¬¬e == e here.
  const auto& original = tape.value(e);
  const auto& twice = tape.value(n2);
  for (std::size_t i = 0; i < original.size(); ++i) {
    CHECK(twice[i] == doctest::Approx(original[i]).epsilon(1e-12));
  }
}

TEST_CASE("expression follows the material-implication structure") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  Tape tape;
  NcrGraph g(model, tape, false);

  const std::vector<std::int32_t> items = {1, 2, 3};
  const std::vector<std::uint8_t> fb = {0, 1, 1};
  std::vector<ValueId> transformed;
  for (std::size_t t = 0; t < items.size(); ++t) {
    transformed.push_back(g.logical_not(g.literal(g.encode(0, items[t]), fb[t])));
  }
  const ValueId target = g.encode(0, 7);
  const ValueId expr = g.expression(transformed, target);
  CHECK(tape.shape_of(expr).rows == cfg.embed_dim);

  // Manual OR(OR(OR(¬¬e1, ¬e2), ¬e3), t): first literal negated twice, the
  // positive ones once, folded left to right with the target last.
  const ValueId e1 = g.encode(0, 1);
  const ValueId e2 = g.encode(0, 2);
  const ValueId e3 = g.encode(0, 3);
  const ValueId manual = g.logical_or(
      g.logical_or(g.logical_or(g.logical_not(g.logical_not(e1)), g.logical_not(e2)),
                   g.logical_not(e3)),
      target);
  const auto& a = tape.value(expr);
  const auto& b = tape.value(manual);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("all-positive feedback applies exactly one negation per literal") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  Tape tape;
  NcrGraph g(model, tape, false);
  const ValueId e = g.encode(0, 1);
  // literal(e, 1) is the raw event: one NOT from the rewrite, none before.
  const ValueId lit = g.literal(e, 1);
  CHECK(lit == e);
  const ValueId lit0 = g.literal(e, 0);
  CHECK(lit0 != e);
}

TEST_CASE("similarity to the true vector maps cosine onto the unit interval") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  const auto t_vec = model.params().at("true_vec").value;
  Tape tape;
  NcrGraph g(model, tape, false);

  CHECK(tape.scalar_value(g.similarity_to_true(tape.input(t_vec))) ==
        doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> neg_t(t_vec.size());
  for (std::size_t i = 0; i < t_vec.size(); ++i) neg_t[i] = -t_vec[i];
  CHECK(tape.scalar_value(g.similarity_to_true(tape.input(neg_t))) ==
        doctest::Approx(0.0).epsilon(1e-12));

  // Any vector orthogonal to T scores exactly one half.
  std::vector<double> orth(t_vec.size(), 0.0);
  orth[0] = t_vec[1];
  orth[1] = -t_vec[0];
  CHECK(tape.scalar_value(g.similarity_to_true(tape.input(orth))) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pairwise core loss is log 2 at equal scores and vanishes for wide margins") {
  Tape tape;
  const ValueId s = tape.scalar_input(0.62);
  const ValueId equal = tape.softplus(tape.scale(tape.sub(s, s), -5.0));
  CHECK(tape.scalar_value(equal) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const ValueId pos = tape.scalar_input(1.0);
  const ValueId neg = tape.scalar_input(0.0);
  const ValueId wide = tape.softplus(tape.scale(tape.sub(pos, neg), -5.0));
  CHECK(tape.scalar_value(wide) < 0.01);
}

TEST_CASE("example loss gradients match finite differences end to end") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  auto& store = model.params();
  const auto ex = make_example(1, {2, 3, 4}, {1, 0, 1}, 6);
  const std::vector<std::int32_t> negs = {8};

  auto forward = [&] {
    Tape tape;
    NcrGraph g(model, tape, true);
    return tape.scalar_value(example_loss(g, tape, cfg, ex, negs));
  };
  store.zero_grad();
  {
    Tape tape;
    NcrGraph g(model, tape, true);
    tape.backward(example_loss(g, tape, cfg, ex, negs));
  }
  for (const char* name : {"enc_w1", "not_w1", "or_w1", "item_emb"}) {
    std::vector<std::size_t> idx;
    std::vector<double> analytic;
    auto rng = ccr::make_rng(ccr::fnv1a64(name));
    const auto& entry = store.at(name);
    for (int k = 0; k < 6; ++k) {
      const std::size_t i = rng() % entry.value.size();
      idx.push_back(i);
      analytic.push_back(entry.grad[i]);
    }
    const auto report = ccr::testing::check_param_gradient(store, name, idx, forward, analytic);
    INFO("param " << name << " worst rel " << report.worst_rel << " analytic "
                  << report.analytic << " numeric " << report.numeric);
    CHECK(report.ok);
  }
}

TEST_CASE("all trainable parameters receive gradient on a generic batch") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  auto& store = model.params();
  store.zero_grad();
  Tape tape;
  // Mixed feedback so both literal branches appear.
  for (const auto& ex :
       {make_example(0, {1, 2, 3}, {1, 0, 1}, 5), make_example(1, {4, 6, 7}, {0, 1, 0}, 9)}) {
    tape.clear();
    NcrGraph g(model, tape, true);
    tape.backward(example_loss(g, tape, cfg, ex, std::vector<std::int32_t>{10}), 0.5);
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& entry = store.entry(i);
    if (entry.name == "and_w1" || entry.name == "and_b1" || entry.name == "and_w2" ||
        entry.name == "and_b2") {
      continue;  // AND is outside the default scoring pipeline
    }
    if (!entry.trainable) {
      CHECK(entry.name == "true_vec");
      continue;
    }
    double norm = 0.0;
    for (const double gv : entry.grad) norm += std::fabs(gv);
    INFO("parameter " << entry.name);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("scores stay inside the unit interval") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  auto rng = ccr::make_rng(31);
  std::uniform_int_distribution<std::int32_t> item(0, 11);
  std::bernoulli_distribution bit(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int32_t> items = {item(rng), item(rng), item(rng)};
    std::vector<std::uint8_t> fb = {bit(rng), bit(rng), bit(rng)};
    const double s = model.score(0, items, fb, item(rng));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("rank_candidates dedupes, orders, and is input-order invariant") {
  auto cfg = tiny_config();
  NcrModel model(cfg);
  const std::vector<std::int32_t> items = {1, 2, 3};
  const std::vector<std::uint8_t> fb = {1, 1, 0};

  const std::vector<std::int32_t> single = {4};
  CHECK(model.rank_candidates(0, items, fb, single).size() == 1);

  const std::vector<std::int32_t> dupes = {4, 5, 4, 6, 5};
  const auto ranked = model.rank_candidates(0, items, fb, dupes);
  CHECK(ranked.size() == 3);

  const std::vector<std::int32_t> permuted = {6, 4, 5};
  const auto ranked2 = model.rank_candidates(0, items, fb, permuted);
  REQUIRE(ranked.size() == ranked2.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].item == ranked2[i].item);
    CHECK(ranked[i].score == ranked2[i].score);
  }
  for (std::size_t i = 1; i < ranked.size(); ++i) CHECK(ranked[i - 1].score >= ranked[i].score);
}

TEST_CASE("training is deterministic per seed") {
  ccr::data::SyntheticSpec spec;
  spec.seed = 40;
  spec.n_users = 25;
  spec.n_items = 40;
  spec.n_rules = 3;
  spec.seq_len = 12;
  const auto world = ccr::testing::make_world(spec, 3);

  auto run = [&] {
    NcrConfig mc;
    mc.n_users = world.corpus.n_users;
    mc.n_items = world.corpus.n_items;
    mc.embed_dim = 8;
    mc.window = 3;
    mc.seed = 5;
    NcrModel model(mc);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.epochs = 3;
    tc.seed = 6;
    model.train(world.train_examples, tc);
    return model.params().at("item_emb").value;
  };
  const auto a = run();
  const auto b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("double-negation residual decreases over the first ten epochs") {
  ccr::data::SyntheticSpec spec;
  spec.seed = 41;
  spec.n_users = 60;
  spec.n_items = 60;
  spec.n_rules = 4;
  spec.seq_len = 14;
  const auto world = ccr::testing::make_world(spec, 3);
  NcrConfig mc;
  mc.n_users = world.corpus.n_users;
  mc.n_items = world.corpus.n_items;
  mc.embed_dim = 8;
  mc.window = 3;
  mc.seed = 15;
  NcrModel model(mc);
  // Perturb the NOT module away from its involutive initialization so the
  // regularizer has something to repair.
  auto rng = ccr::make_rng(99);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (const char* name : {"not_w1", "not_w2"}) {
    for (auto& v : model.params().at(name).value) v += noise(rng);
  }
  TrainConfig tc;
  tc.lr = 0.003;
  tc.epochs = 10;
  tc.seed = 16;
  const auto stats = model.train(world.train_examples, tc);
  REQUIRE(stats.size() == 10);
  for (std::size_t i = 1; i < stats.size(); ++i) {
    INFO("epoch " << i << ": " << stats[i - 1].logic_reg << " -> " << stats[i].logic_reg);
    CHECK(stats[i].logic_reg < stats[i - 1].logic_reg);
  }
}

TEST_CASE("trained sampler flips its preference with the trigger feedback") {
  const auto& fx = trained_fixture();
  const auto& w = fx.world;
  std::size_t total = 0, moved = 0;
  for (const auto& e : w.split.test) {
    if (e.history.size() < 5) continue;
    std::vector<std::int32_t> items(e.history.end() - 5, e.history.end());
    std::vector<std::uint8_t> fb(e.feedback.end() - 5, e.feedback.end());
    if (!w.corpus.rules.is_trigger(items[4])) continue;
    const auto like_c = w.corpus.rules.next_item(items[4], 1);
    const auto dis_c = w.corpus.rules.next_item(items[4], 0);
    const std::vector<std::int32_t> cands = {like_c, dis_c};
    const auto before = fx.model.rank_candidates(e.user, items, fb, cands).front().item;
    auto flipped = fb;
    flipped[4] = flipped[4] ? 0 : 1;
    const auto after = fx.model.rank_candidates(e.user, items, flipped, cands).front().item;
    ++total;
    const bool ok = before == w.corpus.rules.next_item(items[4], fb[4]) &&
                    after == w.corpus.rules.next_item(items[4], flipped[4]);
    moved += ok ? 1 : 0;
  }
  REQUIRE(total >= 100);
  INFO("flip-consistent " << moved << "/" << total);
  CHECK(static_cast<double>(moved) >= 0.7 * static_cast<double>(total));
}

TEST_CASE("checkpoints round trip through the anchor loader") {
  const auto& fx = trained_fixture();
  fx.model.save("ncr_roundtrip.ckpt");
  const auto loaded = NcrModel::load("ncr_roundtrip.ckpt");
  CHECK(loaded.config().embed_dim == fx.model.config().embed_dim);
  const auto& a = fx.model.params().at("or_w1").value;
  const auto& b = loaded.params().at("or_w1").value;
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);

  const auto anchor = ccr::anchor::load_anchor("ncr_roundtrip.ckpt");
  CHECK(anchor->kind() == "ncr");
  std::remove("ncr_roundtrip.ckpt");
}
