// Command-line front end for the counterfactual augmentation pipeline.
// Subcommands mirror the pipeline stages; a JSON config carries every knob
// and the --seed/--workers/--out flags override its keys.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ccr/cli/config.hpp"
#include "ccr/cli/stages.hpp"
#include "ccr/common.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--workers", args.workers, "worker threads (0 = all cores)");
  cmd->add_option("--out", args.out_dir, "override the output directory");
}

ccr::cli::RunConfig resolve(const CommonArgs& args) {
  auto cfg = ccr::cli::load_config_file(args.config_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.seed_set = true;
  }
  if (args.workers) cfg.workers = *args.workers;
  if (args.out_dir) cfg.out_dir = *args.out_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual data augmentation for explicit-feedback sequential recommendation"};
  app.require_subcommand(1);

  CommonArgs prepare_args, train_args, augment_args, evaluate_args, explain_args, pipeline_args;
  std::string train_role = "sampler";
  int train_round = 0, augment_round = 1, evaluate_round = 0;
  std::optional<int> explain_round;

  auto* prepare = app.add_subcommand("prepare", "load or generate data, split and windowize");
  add_common(prepare, prepare_args);

  auto* train = app.add_subcommand("train", "train the sampler or an anchor");
  add_common(train, train_args);
  train->add_option("--role", train_role, "sampler | anchor")
      ->check(CLI::IsMember({"sampler", "anchor"}));
  train->add_option("--round", train_round,
                    "anchor round; 0 pretrains, r>0 re-optimizes on T plus rounds 1..r");

  auto* augment = app.add_subcommand("augment", "generate counterfactual examples");
  add_common(augment, augment_args);
  augment->add_option("--round", augment_round, "augmentation round (default 1)");

  auto* evaluate = app.add_subcommand("evaluate", "rank the held-out targets");
  add_common(evaluate, evaluate_args);
  evaluate->add_option("--round", evaluate_round, "anchor round to evaluate");

  auto* explain = app.add_subcommand("explain", "extract explanations and score PN/PS");
  add_common(explain, explain_args);
  explain->add_option("--round", explain_round, "anchor round to explain (default: rounds)");

  auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
  add_common(pipeline, pipeline_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  try {
    if (prepare->parsed()) {
      ccr::cli::stage_prepare(resolve(prepare_args));
    } else if (train->parsed()) {
      ccr::cli::stage_train(resolve(train_args), train_role, train_round);
    } else if (augment->parsed()) {
      ccr::cli::stage_augment(resolve(augment_args), augment_round);
    } else if (evaluate->parsed()) {
      ccr::cli::stage_evaluate(resolve(evaluate_args), evaluate_round);
    } else if (explain->parsed()) {
      const auto cfg = resolve(explain_args);
      ccr::cli::stage_explain(cfg, explain_round.value_or(cfg.rounds));
    } else if (pipeline->parsed()) {
      ccr::cli::stage_pipeline(resolve(pipeline_args));
    }
  } catch (const ccr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
