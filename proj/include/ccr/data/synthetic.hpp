#pragma once

#include <cstdint>
#include <vector>

#include "ccr/data/dataset.hpp"

namespace ccr::data {

// (trigger item, feedback bit) -> consequence item. A trigger maps to one
// consequence when liked and another when disliked.
struct Rule {
  std::int32_t trigger = 0;
  std::int32_t like_consequence = 0;
  std::int32_t dislike_consequence = 0;
};

struct RuleTable {
  std::vector<Rule> rules;

  bool is_trigger(std::int32_t item) const;
  bool is_consequence(std::int32_t item) const;
  // The rule outcome for (trigger, feedback); throws if item is no trigger.
  std::int32_t next_item(std::int32_t trigger, int feedback) const;
};

// Canonical layout: triggers [0, n), like consequence n+2i, dislike n+2i+1.
RuleTable default_rule_table(std::size_t n_rules);

// Throws ConfigError when trigger and consequence pools overlap or items
// fall outside [0, n_items).
void validate_rules(const RuleTable& rules, std::size_t n_items);

struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t n_users = 100;
  std::size_t n_items = 50;
  std::size_t n_rules = 4;
  std::size_t seq_len = 20;
  double noise_rate = 0.0;    // rho: probability the consequence is replaced
  double trigger_prob = 0.5;  // chance a body step starts a trigger block
  // Avoid re-emitting an item within this many recent positions, so
  // windowized targets do not appear in their own history.
  std::size_t avoid_repeat_window = 6;
};

struct SyntheticCorpus {
  std::vector<Interaction> interactions;
  RuleTable rules;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
};

// Planted-logic generator. Every trigger interaction is immediately followed
// by its rule consequence (noise-replaced with probability noise_rate);
// feedback is i.i.d. Bernoulli(0.5). Each user's sequence ends with a trigger
// block whose consequence carries positive feedback so the leave-one-out test
// target is rule-determined.
SyntheticCorpus generate_planted_logic_corpus(const SyntheticSpec& spec);
SyntheticCorpus generate_planted_logic_corpus(const SyntheticSpec& spec, const RuleTable& rules);

}  // namespace ccr::data
