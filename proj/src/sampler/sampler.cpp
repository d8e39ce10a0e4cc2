#include "ccr/sampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

#include "ccr/common.hpp"

namespace ccr::sampler {

namespace {
using diff::Shape;
using diff::Tape;
using diff::ValueId;
}  // namespace

std::vector<std::uint8_t> apply_intervention(std::span<const std::uint8_t> feedback,
                                             std::span<const std::uint8_t> delta) {
  if (feedback.size() != delta.size()) {
    throw ContractError("apply_intervention: length mismatch " +
                        std::to_string(feedback.size()) + " vs " + std::to_string(delta.size()));
  }
  std::vector<std::uint8_t> out(feedback.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const int b = feedback[t] ? 1 : 0;
    const int d = delta[t] ? 1 : 0;
    out[t] = static_cast<std::uint8_t>((1 - b) * d + b * (1 - d));
  }
  return out;
}

void SamplerConfig::validate() const {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw ConfigError("kappa must lie in [0,1)");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (opt_steps < 1) throw ConfigError("opt_steps must be >= 1");
  if (!(opt_lr > 0.0)) throw ConfigError("opt_lr must be positive");
  if (per_sequence < 1) throw ConfigError("per_sequence must be >= 1");
}

Sampler::Sampler(const logic::NcrModel& model, const SamplerConfig& cfg)
    : model_(model), cfg_(cfg) {
  cfg_.validate();
}

InterventionVector Sampler::optimize_delta(std::int32_t user,
                                           std::span<const std::int32_t> items,
                                           std::span<const std::uint8_t> feedback,
                                           std::int32_t suppressed_target,
                                           std::uint64_t seed) const {
  if (items.size() != feedback.size() || items.empty()) {
    throw ContractError("optimize_delta: bad history");
  }
  const std::size_t w = items.size();
  const std::size_t d = model_.config().embed_dim;

  // The model is frozen, so each position's Eq. 3 literal and its negation
  // are constants; only the blend depends on Δ.
  std::vector<std::vector<double>> lit_vals(w), neg_vals(w);
  std::vector<double> target_vals;
  {
    Tape t0;
    logic::NcrGraph g0(model_, t0, /*train=*/false);
    for (std::size_t t = 0; t < w; ++t) {
      const ValueId e = g0.encode(user, items[t]);
      const ValueId lit = g0.literal(e, feedback[t]);
      const ValueId neg = g0.logical_not(lit);
      lit_vals[t] = t0.value(lit);
      neg_vals[t] = t0.value(neg);
    }
    target_vals = t0.value(g0.encode(user, suppressed_target));
  }

  auto rng = make_rng(mix_seed(seed, fnv1a64("delta-init")));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> delta(w);
  for (auto& x : delta) x = uni(rng);

  Tape tape;
  logic::NcrGraph g(model_, tape, /*train=*/false);
  std::vector<ValueId> lit_in(w), neg_in(w);
  for (std::size_t t = 0; t < w; ++t) {
    lit_in[t] = tape.input(Shape::vec(d), lit_vals[t].data());
    neg_in[t] = tape.input(Shape::vec(d), neg_vals[t].data());
  }
  const ValueId target_in = tape.input(Shape::vec(d), target_vals.data());
  // Touch the OR and True leaves once so they sit below the rollback mark.
  (void)g.similarity_to_true(g.logical_or(lit_in[0], lit_in[0]));
  const std::size_t mark = tape.size();

  InterventionVector best;
  best.deltas = delta;
  best.objective = std::numeric_limits<double>::infinity();

  // opt_steps projected-gradient updates; the objective is evaluated at every
  // visited point including the initialization and the final iterate.
  for (int step = 0; step <= cfg_.opt_steps; ++step) {
    g.rollback(mark);
    const ValueId dvar = tape.var(Shape::vec(w), delta.data());
    std::vector<ValueId> blended(w);
    for (std::size_t t = 0; t < w; ++t) {
      const ValueId dt = tape.slice(dvar, t, 1);
      const ValueId keep = tape.add_const(tape.scale(dt, -1.0), 1.0);
      blended[t] = tape.add(tape.smul(neg_in[t], dt), tape.smul(lit_in[t], keep));
    }
    ValueId fold = blended[0];
    for (std::size_t t = 1; t < w; ++t) fold = g.logical_or(fold, blended[t]);
    const ValueId expr = g.logical_or(fold, target_in);
    const ValueId score = g.similarity_to_true(expr);
    const ValueId objective = tape.add(tape.l1norm(dvar), tape.scale(score, cfg_.alpha));

    const double obj = tape.scalar_value(objective);
    if (!std::isfinite(obj)) {
      throw DomainError("optimize_delta: non-finite objective at step " + std::to_string(step));
    }
    if (step == 0) best.objective_at_init = obj;
    if (obj < best.objective) {
      best.objective = obj;
      best.deltas = delta;
    }
    if (step == cfg_.opt_steps) break;

    tape.backward(objective);
    const auto& grad = tape.grad_of(dvar);
    for (std::size_t t = 0; t < w; ++t) {
      delta[t] = std::clamp(delta[t] - cfg_.opt_lr * grad[t], 0.0, 1.0);
    }
  }

  best.binarized.resize(w);
  for (std::size_t t = 0; t < w; ++t) {
    best.binarized[t] = best.deltas[t] > cfg_.threshold ? 1 : 0;
  }
  return best;
}

Generated Sampler::generate_next(std::int32_t user, std::span<const std::int32_t> items,
                                 std::span<const std::uint8_t> intervened_feedback,
                                 std::int32_t original_target,
                                 std::span<const std::int32_t> candidates) const {
  if (candidates.empty()) throw ContractError("generate_next: empty candidate set");
  const auto ranked = model_.rank_candidates(user, items, intervened_feedback, candidates);
  Generated g;
  g.item = ranked.front().item;
  g.confidence = ranked.front().score;
  g.unchanged = g.item == original_target;
  return g;
}

double Sampler::discrete_objective(std::int32_t user, std::span<const std::int32_t> items,
                                   std::span<const std::uint8_t> feedback,
                                   std::span<const std::uint8_t> delta_bits,
                                   std::int32_t target) const {
  const auto intervened = apply_intervention(feedback, delta_bits);
  double l0 = 0.0;
  for (const auto b : delta_bits) l0 += b ? 1.0 : 0.0;
  return l0 + cfg_.alpha * model_.score(user, items, intervened, target);
}

AugmentationResult Sampler::augment_dataset(const std::vector<data::TrainingExample>& examples,
                                            std::uint64_t seed) const {
  std::vector<std::int32_t> all_items(model_.config().n_items);
  for (std::size_t i = 0; i < all_items.size(); ++i) all_items[i] = static_cast<std::int32_t>(i);

  enum class Outcome { kZeroDelta, kUnchanged, kBelowKappa, kAccepted, kAborted };
  struct Attempt {
    Outcome outcome = Outcome::kAborted;
    data::TrainingExample example;
  };
  const auto per = static_cast<std::size_t>(cfg_.per_sequence);
  std::vector<Attempt> attempts(examples.size() * per);

  parallel_for(examples.size(), cfg_.workers, [&](std::size_t i) {
    const auto& ex = examples[i];
    for (std::size_t j = 0; j < per; ++j) {
      Attempt& slot = attempts[i * per + j];
      try {
        const auto iv = optimize_delta(ex.user, ex.history, ex.feedback, ex.target,
                                       mix_seed(seed, i, j));
        const bool any = std::any_of(iv.binarized.begin(), iv.binarized.end(),
                                     [](std::uint8_t b) { return b != 0; });
        if (!any) {
          slot.outcome = Outcome::kZeroDelta;
          continue;
        }
        const auto intervened = apply_intervention(ex.feedback, iv.binarized);
        const auto gen = generate_next(ex.user, ex.history, intervened, ex.target, all_items);
        if (gen.unchanged) {
          slot.outcome = Outcome::kUnchanged;
          continue;
        }
        if (!(gen.confidence > cfg_.kappa)) {
          slot.outcome = Outcome::kBelowKappa;
          continue;
        }
        slot.outcome = Outcome::kAccepted;
        slot.example.user = ex.user;
        slot.example.history = ex.history;
        slot.example.feedback = intervened;
        slot.example.target = gen.item;
        slot.example.source = data::Source::kCounterfactual;
        slot.example.confidence = gen.confidence;
      } catch (const Error& e) {
        std::cerr << "augment: skipping example " << i << " attempt " << j << ": " << e.what()
                  << "\n";
        slot.outcome = Outcome::kAborted;
      }
    }
  });

  AugmentationResult result;
  result.report.attempted = attempts.size();
  for (auto& a : attempts) {
    switch (a.outcome) {
      case Outcome::kZeroDelta: result.report.zero_delta += 1; break;
      case Outcome::kUnchanged: result.report.unchanged_target += 1; break;
      case Outcome::kBelowKappa: result.report.below_kappa += 1; break;
      case Outcome::kAborted: result.report.aborted += 1; break;
      case Outcome::kAccepted:
        result.report.accepted += 1;
        result.counterfactuals.push_back(std::move(a.example));
        break;
    }
  }
  return result;
}

}  // namespace ccr::sampler
