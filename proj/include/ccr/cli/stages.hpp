#pragma once

#include <string>

#include "ccr/cli/config.hpp"

namespace ccr::cli {

// Artifact locations under the run's output directory. Every stage reads its
// inputs from disk and writes its outputs back, so the pipeline command and
// the individual commands are the same code path.
struct Paths {
  explicit Paths(const std::string& out_dir);

  std::string out;
  std::string split_manifest;
  std::string train_examples;
  std::string validation;
  std::string test;
  std::string user_items;
  std::string rules;
  std::string sampler_ckpt;
  std::string sampler_loss;

  std::string anchor_ckpt(int round) const;
  std::string anchor_loss(int round) const;
  std::string counterfactuals(int round) const;
  std::string augment_report(int round) const;
  std::string metrics(int round) const;
  std::string explanations(std::size_t top_n) const;
  std::string pnps(std::size_t top_n) const;
  std::string rounds_csv;
  std::string manifest;
};

void stage_prepare(const RunConfig& cfg);
void stage_train(const RunConfig& cfg, const std::string& role, int round);
void stage_augment(const RunConfig& cfg, int round);
void stage_evaluate(const RunConfig& cfg, int round);
void stage_explain(const RunConfig& cfg, int round);
// prepare -> train sampler -> train anchor -> evaluate -> [augment -> retrain
// -> evaluate]*rounds -> explain; writes the per-round CSV and manifest.
void stage_pipeline(const RunConfig& cfg);

}  // namespace ccr::cli
