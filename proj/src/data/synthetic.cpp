#include "ccr/data/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "ccr/common.hpp"

namespace ccr::data {

bool RuleTable::is_trigger(std::int32_t item) const {
  for (const auto& r : rules) {
    if (r.trigger == item) return true;
  }
  return false;
}

bool RuleTable::is_consequence(std::int32_t item) const {
  for (const auto& r : rules) {
    if (r.like_consequence == item || r.dislike_consequence == item) return true;
  }
  return false;
}

std::int32_t RuleTable::next_item(std::int32_t trigger, int feedback) const {
  for (const auto& r : rules) {
    if (r.trigger == trigger) return feedback ? r.like_consequence : r.dislike_consequence;
  }
  throw ContractError("item " + std::to_string(trigger) + " is not a rule trigger");
}

RuleTable default_rule_table(std::size_t n_rules) {
  RuleTable table;
  table.rules.reserve(n_rules);
  for (std::size_t i = 0; i < n_rules; ++i) {
    Rule r;
    r.trigger = static_cast<std::int32_t>(i);
    r.like_consequence = static_cast<std::int32_t>(n_rules + 2 * i);
    r.dislike_consequence = static_cast<std::int32_t>(n_rules + 2 * i + 1);
    table.rules.push_back(r);
  }
  return table;
}

void validate_rules(const RuleTable& table, std::size_t n_items) {
  if (table.rules.empty()) throw ConfigError("rule table is empty");
  std::set<std::int32_t> triggers, consequences;
  for (const auto& r : table.rules) {
    for (std::int32_t item : {r.trigger, r.like_consequence, r.dislike_consequence}) {
      if (item < 0 || static_cast<std::size_t>(item) >= n_items) {
        throw ConfigError("rule item " + std::to_string(item) + " outside catalog of " +
                          std::to_string(n_items));
      }
    }
    if (!triggers.insert(r.trigger).second) {
      throw ConfigError("duplicate rule trigger " + std::to_string(r.trigger));
    }
    consequences.insert(r.like_consequence);
    consequences.insert(r.dislike_consequence);
  }
  for (std::int32_t t : triggers) {
    if (consequences.count(t)) {
      throw ConfigError("trigger and consequence pools overlap at item " + std::to_string(t));
    }
  }
}

namespace {

class RecentWindow {
 public:
  explicit RecentWindow(std::size_t cap) : cap_(cap) {}
  bool contains(std::int32_t item) const {
    for (std::int32_t r : ring_) {
      if (r == item) return true;
    }
    return false;
  }
  void push(std::int32_t item) {
    if (cap_ == 0) return;
    if (ring_.size() == cap_) ring_.erase(ring_.begin());
    ring_.push_back(item);
  }

 private:
  std::size_t cap_;
  std::vector<std::int32_t> ring_;
};

}  // namespace

SyntheticCorpus generate_planted_logic_corpus(const SyntheticSpec& spec) {
  return generate_planted_logic_corpus(spec, default_rule_table(spec.n_rules));
}

SyntheticCorpus generate_planted_logic_corpus(const SyntheticSpec& spec, const RuleTable& rules) {
  validate_rules(rules, spec.n_items);
  if (spec.seq_len < 4) throw ConfigError("synthetic seq_len must be >= 4");
  const std::size_t min_items = 3 * rules.rules.size();
  if (spec.n_items < min_items + 2) {
    throw ConfigError("synthetic corpus needs more items than rule pools occupy");
  }

  std::vector<std::int32_t> noise_pool;
  for (std::size_t i = 0; i < spec.n_items; ++i) {
    const auto item = static_cast<std::int32_t>(i);
    if (!rules.is_trigger(item) && !rules.is_consequence(item)) noise_pool.push_back(item);
  }
  if (noise_pool.size() < 2) throw ConfigError("synthetic corpus has no noise items");

  SyntheticCorpus corpus;
  corpus.rules = rules;
  corpus.n_users = spec.n_users;
  corpus.n_items = spec.n_items;

  const auto n_rules = rules.rules.size();

  for (std::size_t u = 0; u < spec.n_users; ++u) {
    auto rng = make_rng(mix_seed(spec.seed, u));
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution trigger_coin(spec.trigger_prob);
    std::bernoulli_distribution noise_coin(spec.noise_rate);
    std::uniform_int_distribution<std::size_t> rule_pick(0, n_rules - 1);
    std::uniform_int_distribution<std::size_t> noise_pick(0, noise_pool.size() - 1);
    std::uniform_int_distribution<std::size_t> item_pick(0, spec.n_items - 1);

    RecentWindow recent(spec.avoid_repeat_window);
    std::vector<std::pair<std::int32_t, int>> seq;  // (item, feedback)

    auto push = [&](std::int32_t item, int fb) {
      seq.emplace_back(item, fb);
      recent.push(item);
    };
    auto pick_noise = [&]() {
      for (int attempt = 0; attempt < 64; ++attempt) {
        const std::int32_t item = noise_pool[noise_pick(rng)];
        if (!recent.contains(item)) return item;
      }
      return noise_pool[noise_pick(rng)];
    };
    auto pick_uniform_any = [&]() {
      for (int attempt = 0; attempt < 64; ++attempt) {
        const auto item = static_cast<std::int32_t>(item_pick(rng));
        if (!recent.contains(item)) return item;
      }
      return static_cast<std::int32_t>(item_pick(rng));
    };
    // A trigger block is (trigger, fb) then the rule consequence, noise-
    // replaced with probability rho. Returns false when no rule satisfies
    // the no-repeat window.
    auto emit_trigger_block = [&](bool force_positive_consequence) {
      std::int32_t trigger = -1;
      int fb = 0;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const auto& r = rules.rules[rule_pick(rng)];
        const int f = coin(rng) ? 1 : 0;
        const std::int32_t cons = f ? r.like_consequence : r.dislike_consequence;
        if (!recent.contains(r.trigger) && !recent.contains(cons) && cons != r.trigger) {
          trigger = r.trigger;
          fb = f;
          break;
        }
      }
      if (trigger < 0) return false;
      push(trigger, fb);
      std::int32_t cons = rules.next_item(trigger, fb);
      if (noise_coin(rng)) cons = pick_uniform_any();
      push(cons, force_positive_consequence ? 1 : (coin(rng) ? 1 : 0));
      return true;
    };

    const std::size_t body_len = spec.seq_len - 2;
    while (seq.size() < body_len) {
      if (!(trigger_coin(rng) && seq.size() + 2 <= body_len && emit_trigger_block(false))) {
        push(pick_noise(), coin(rng) ? 1 : 0);
      }
    }
    // Closing block: guarantees the last interaction is a positive, rule-
    // determined item so positive leave-one-out has a predictable target.
    for (int attempt = 0; attempt < 256 && !emit_trigger_block(true); ++attempt) {
      recent.push(pick_noise());  // age the window until some rule fits
    }
    if (seq.size() < spec.seq_len || seq[seq.size() - 1].second != 1) {
      throw ContractError("synthetic generator could not close user sequence with a rule block");
    }

    for (std::size_t t = 0; t < seq.size(); ++t) {
      Interaction it;
      it.user = static_cast<std::int32_t>(u);
      it.item = seq[t].first;
      it.rating = seq[t].second ? 5 : 2;  // round-trips through binarize()
      it.timestamp = static_cast<std::int64_t>(t);
      corpus.interactions.push_back(it);
    }
  }
  return corpus;
}

}  // namespace ccr::data
