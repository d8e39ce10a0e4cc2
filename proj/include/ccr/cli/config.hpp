#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ccr/data/synthetic.hpp"
#include "ccr/sampler/sampler.hpp"

namespace ccr::cli {

struct DatasetSpec {
  std::string kind = "synthetic";  // "file" | "synthetic"
  std::string path;                // file datasets
  data::SyntheticSpec synthetic;   // synthetic datasets (seed filled from run seed)
};

struct TrainSpec {
  double lr = 0.001;
  int epochs = 10;
  int batch = 128;
  int negatives = 1;
};

struct NcrSpec {
  double beta = 5.0;
  double lambda_logic = 0.1;
  double lambda_l2 = 1e-4;
};

struct ExplainSpec {
  std::vector<std::size_t> top_n = {1, 5};
  std::size_t k = 10;
  std::string mode = "reverse";
};

struct RunConfig {
  DatasetSpec dataset;
  std::size_t window = 5;
  std::size_t embed_dim = 64;
  TrainSpec train;
  int retrain_epochs = 5;
  NcrSpec ncr;
  sampler::SamplerConfig sampler;
  std::vector<int> eval_ks = {5, 10};
  ExplainSpec explain;
  int rounds = 1;
  std::string anchor_kind = "ncr";  // "ncr" | "recurrent"
  std::uint64_t seed = 0;
  bool seed_set = false;  // the seed is mandatory (config key or --seed)
  int workers = 0;        // 0 -> hardware concurrency
  std::string out_dir = "run-out";

  void validate() const;  // throws ConfigError
};

// Strict parse: unknown keys anywhere are config errors; absent keys take the
// defaults above.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config_file(const std::string& path);

// Full round-trip echo, defaults included, for the run manifest.
nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace ccr::cli
