#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccr/data/dataset.hpp"
#include "ccr/logic/ncr.hpp"

namespace ccr::sampler {

// Eq. 5: B* = (1-B)⊙Δ + B⊙(1-Δ); bit t flips exactly when delta_t = 1.
std::vector<std::uint8_t> apply_intervention(std::span<const std::uint8_t> feedback,
                                             std::span<const std::uint8_t> delta);

struct SamplerConfig {
  double alpha = 10.0;   // weight of the suppression term
  double kappa = 0.7;    // confidence filter, in [0,1)
  int opt_steps = 100;
  double opt_lr = 0.05;
  double threshold = 0.5;  // binarization cut
  int per_sequence = 1;    // counterfactuals emitted per original, at most
  int workers = 1;

  void validate() const;
};

struct InterventionVector {
  std::vector<double> deltas;          // relaxed, clamped to [0,1]
  std::vector<std::uint8_t> binarized; // bit t = 1 iff deltas[t] > threshold
  double objective = 0.0;              // best objective seen
  double objective_at_init = 0.0;
};

struct Generated {
  std::int32_t item = 0;
  double confidence = 0.0;
  bool unchanged = false;  // argmax equals the original target
};

struct AugmentationReport {
  std::size_t attempted = 0;
  std::size_t zero_delta = 0;
  std::size_t unchanged_target = 0;
  std::size_t below_kappa = 0;
  std::size_t accepted = 0;
  std::size_t aborted = 0;  // non-finite objective, skipped with a diagnostic

  bool partitions() const {
    return zero_delta + unchanged_target + below_kappa + accepted + aborted == attempted;
  }
};

struct AugmentationResult {
  std::vector<data::TrainingExample> counterfactuals;
  AugmentationReport report;
};

// The CCR sampler: a trained NCR model searched for minimal feedback
// interventions. The model is frozen throughout; every entry point is const
// and safe to call from parallel workers.
class Sampler {
 public:
  Sampler(const logic::NcrModel& model, const SamplerConfig& cfg);

  const logic::NcrModel& model() const { return model_; }
  const SamplerConfig& config() const { return cfg_; }

  // Projected gradient descent on Eq. 8: minimize ||Δ||₁ + α·S(target|H,B*)
  // with Δ initialized i.i.d. uniform[0,1] from seed and clamped to [0,1]
  // after every step; returns the Δ with the lowest objective seen.
  InterventionVector optimize_delta(std::int32_t user, std::span<const std::int32_t> items,
                                    std::span<const std::uint8_t> feedback,
                                    std::int32_t suppressed_target, std::uint64_t seed) const;

  // Eq. 7: the argmax candidate under the intervened feedback, with its
  // sampler score as the confidence.
  Generated generate_next(std::int32_t user, std::span<const std::int32_t> items,
                          std::span<const std::uint8_t> intervened_feedback,
                          std::int32_t original_target,
                          std::span<const std::int32_t> candidates) const;

  // Eq. 6 evaluated exactly on a binary Δ; the brute-force oracle in the test
  // suite minimizes this over all 2^W assignments.
  double discrete_objective(std::int32_t user, std::span<const std::int32_t> items,
                            std::span<const std::uint8_t> feedback,
                            std::span<const std::uint8_t> delta_bits,
                            std::int32_t target) const;

  // Algorithm 1's augmentation sweep over the training set. Deterministic
  // given (seed, inputs); workers only change wall-clock time.
  AugmentationResult augment_dataset(const std::vector<data::TrainingExample>& examples,
                                     std::uint64_t seed) const;

 private:
  const logic::NcrModel& model_;
  SamplerConfig cfg_;
};

}  // namespace ccr::sampler
