#include "ccr/cli/stages.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "ccr/anchor/anchor.hpp"
#include "ccr/anchor/recurrent.hpp"
#include "ccr/common.hpp"
#include "ccr/data/examples_io.hpp"
#include "ccr/eval/metrics.hpp"
#include "ccr/explain/explain.hpp"
#include "ccr/logic/ncr.hpp"
#include "ccr/sampler/sampler.hpp"

namespace ccr::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kBuildVersion = "ccr 0.1.0";

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  return doc;
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << doc.dump(2) << '\n';
}

struct SplitInfo {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
};

SplitInfo read_split_info(const Paths& paths) {
  const auto doc = read_json_file(paths.split_manifest);
  SplitInfo info;
  info.n_users = doc.at("n_users").get<std::size_t>();
  info.n_items = doc.at("n_items").get<std::size_t>();
  return info;
}

int effective_workers(const RunConfig& cfg) {
  return cfg.workers > 0 ? cfg.workers : hardware_workers();
}

// Counterfactual files from rounds 1..upto merged onto the originals.
std::vector<data::TrainingExample> training_union(const Paths& paths, int upto_round) {
  auto examples = data::load_examples(paths.train_examples);
  for (int r = 1; r <= upto_round; ++r) {
    const auto extra = data::load_examples(paths.counterfactuals(r));
    examples.insert(examples.end(), extra.begin(), extra.end());
  }
  return examples;
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, losses[i]);
    out << buf;
  }
}

json metrics_to_json(const eval::RankingMetrics& m) {
  json ks = json::object();
  for (const auto& [k, pair] : m.at_k) {
    ks[std::to_string(k)] = {{"ndcg", pair.ndcg}, {"hr", pair.hr}};
  }
  return json{{"ks", ks}, {"n_users", m.n_users}, {"seed", m.seed}};
}

eval::RankingMetrics evaluate_entries(const RunConfig& cfg, const Paths& paths,
                                      const anchor::AnchorModel& model,
                                      const std::string& entries_path) {
  const auto entries = data::load_eval_entries(entries_path);
  const auto user_items = data::load_user_items(paths.user_items);
  const auto info = read_split_info(paths);
  eval::EvalConfig ec;
  ec.ks = cfg.eval_ks;
  ec.seed = cfg.seed;
  ec.workers = effective_workers(cfg);
  return eval::evaluate_model(model, entries, user_items, info.n_items, ec);
}

}  // namespace

Paths::Paths(const std::string& out_dir) : out(out_dir) {
  split_manifest = out + "/split.json";
  train_examples = out + "/train_examples.jsonl";
  validation = out + "/validation.jsonl";
  test = out + "/test.jsonl";
  user_items = out + "/user_items.jsonl";
  rules = out + "/rules.json";
  sampler_ckpt = out + "/sampler.ckpt";
  sampler_loss = out + "/sampler_loss.csv";
  rounds_csv = out + "/rounds.csv";
  manifest = out + "/manifest.json";
}

std::string Paths::anchor_ckpt(int round) const {
  return out + "/anchor_round_" + std::to_string(round) + ".ckpt";
}
std::string Paths::anchor_loss(int round) const {
  return out + "/anchor_round_" + std::to_string(round) + "_loss.csv";
}
std::string Paths::counterfactuals(int round) const {
  return out + "/counterfactuals_round_" + std::to_string(round) + ".jsonl";
}
std::string Paths::augment_report(int round) const {
  return out + "/augment_report_round_" + std::to_string(round) + ".json";
}
std::string Paths::metrics(int round) const {
  return out + "/metrics_round_" + std::to_string(round) + ".json";
}
std::string Paths::explanations(std::size_t top_n) const {
  return out + "/explanations_n" + std::to_string(top_n) + ".json";
}
std::string Paths::pnps(std::size_t top_n) const {
  return out + "/pnps_n" + std::to_string(top_n) + ".json";
}

void stage_prepare(const RunConfig& cfg) {
  const Paths paths(cfg.out_dir);
  fs::create_directories(paths.out);

  std::vector<data::UserSequence> sequences;
  std::size_t n_users = 0, n_items = 0;
  json dataset_info;
  if (cfg.dataset.kind == "file") {
    const auto loaded = data::load_interactions(cfg.dataset.path);
    n_users = loaded.n_users;
    n_items = loaded.n_items;
    sequences = data::build_sequences(loaded.interactions, n_users);
    dataset_info = {{"kind", "file"},
                    {"path", cfg.dataset.path},
                    {"interactions", loaded.interactions.size()}};
    std::cerr << "prepare: " << loaded.interactions.size() << " interactions, " << n_users
              << " users, " << n_items << " items\n";
  } else {
    auto spec = cfg.dataset.synthetic;
    spec.seed = mix_seed(cfg.seed, fnv1a64("synthetic"));
    const auto corpus = data::generate_planted_logic_corpus(spec);
    n_users = corpus.n_users;
    n_items = corpus.n_items;
    sequences = data::build_sequences(corpus.interactions, n_users);
    data::save_rules(paths.rules, corpus.rules);
    dataset_info = {{"kind", "synthetic"},
                    {"interactions", corpus.interactions.size()},
                    {"rules", corpus.rules.rules.size()}};
    std::cerr << "prepare: synthetic corpus with " << corpus.interactions.size()
              << " interactions, " << n_users << " users, " << n_items << " items\n";
  }

  const auto split = data::split_leave_one_out(sequences);
  const auto examples = data::windowize(split.train, cfg.window);
  const auto user_items = data::user_item_sets(sequences, n_users);

  data::save_examples(paths.train_examples, examples);
  data::save_eval_entries(paths.validation, split.validation);
  data::save_eval_entries(paths.test, split.test);
  data::save_user_items(paths.user_items, user_items);

  json manifest;
  manifest["seed"] = cfg.seed;
  manifest["window"] = cfg.window;
  manifest["n_users"] = n_users;
  manifest["n_items"] = n_items;
  manifest["dataset"] = dataset_info;
  manifest["counts"] = {{"train_examples", examples.size()},
                        {"validation", split.validation.size()},
                        {"test", split.test.size()}};
  write_json_file(paths.split_manifest, manifest);
}

void stage_train(const RunConfig& cfg, const std::string& role, int round) {
  const Paths paths(cfg.out_dir);
  const auto info = read_split_info(paths);

  if (role == "sampler") {
    // The sampler must support the logical NOT, so it is always NCR.
    logic::NcrConfig mc;
    mc.n_users = info.n_users;
    mc.n_items = info.n_items;
    mc.embed_dim = cfg.embed_dim;
    mc.window = cfg.window;
    mc.beta = cfg.ncr.beta;
    mc.lambda_logic = cfg.ncr.lambda_logic;
    mc.lambda_l2 = cfg.ncr.lambda_l2;
    mc.seed = mix_seed(cfg.seed, fnv1a64("sampler-init"));
    logic::NcrModel model(mc);
    logic::TrainConfig tc;
    tc.lr = cfg.train.lr;
    tc.epochs = cfg.train.epochs;
    tc.batch = cfg.train.batch;
    tc.negatives = cfg.train.negatives;
    tc.seed = mix_seed(cfg.seed, fnv1a64("sampler-train"));
    const auto stats = model.train(data::load_examples(paths.train_examples), tc);
    std::vector<double> losses;
    for (const auto& s : stats) losses.push_back(s.loss);
    model.save(paths.sampler_ckpt);
    write_loss_csv(paths.sampler_loss, losses);
    return;
  }
  if (role != "anchor") throw ConfigError("train role must be \"sampler\" or \"anchor\"");

  std::unique_ptr<anchor::AnchorModel> model;
  anchor::AnchorTrainConfig tc;
  tc.lr = cfg.train.lr;
  tc.batch = cfg.train.batch;
  tc.negatives = cfg.train.negatives;
  tc.seed = mix_seed(cfg.seed, fnv1a64("anchor-train"), static_cast<std::uint64_t>(round));
  std::vector<data::TrainingExample> examples;
  if (round == 0) {
    model = anchor::make_anchor(cfg.anchor_kind, info.n_users, info.n_items, cfg.embed_dim,
                                cfg.window, mix_seed(cfg.seed, fnv1a64("anchor-init")));
    tc.epochs = cfg.train.epochs;
    examples = data::load_examples(paths.train_examples);
  } else {
    model = anchor::load_anchor(paths.anchor_ckpt(round - 1));
    tc.epochs = cfg.retrain_epochs;
    examples = training_union(paths, round);
  }
  const auto losses = model->train(examples, tc);
  model->save(paths.anchor_ckpt(round));
  write_loss_csv(paths.anchor_loss(round), losses);
}

void stage_augment(const RunConfig& cfg, int round) {
  if (round < 1) throw ConfigError("augment rounds start at 1");
  const Paths paths(cfg.out_dir);
  if (!fs::exists(paths.sampler_ckpt)) {
    throw DataError("sampler checkpoint missing; run `train --role sampler` first");
  }
  const auto model = logic::NcrModel::load(paths.sampler_ckpt);
  auto sc = cfg.sampler;
  sc.workers = effective_workers(cfg);
  const sampler::Sampler sampler(model, sc);

  const auto examples = training_union(paths, round - 1);
  const auto result =
      sampler.augment_dataset(examples, mix_seed(cfg.seed, fnv1a64("augment"),
                                                 static_cast<std::uint64_t>(round)));
  data::save_examples(paths.counterfactuals(round), result.counterfactuals);

  json report;
  report["round"] = round;
  report["attempted"] = result.report.attempted;
  report["zero_delta"] = result.report.zero_delta;
  report["unchanged_target"] = result.report.unchanged_target;
  report["below_kappa"] = result.report.below_kappa;
  report["accepted"] = result.report.accepted;
  report["aborted"] = result.report.aborted;
  report["kappa"] = cfg.sampler.kappa;
  report["alpha"] = cfg.sampler.alpha;
  write_json_file(paths.augment_report(round), report);
}

void stage_evaluate(const RunConfig& cfg, int round) {
  const Paths paths(cfg.out_dir);
  const auto model = anchor::load_anchor(paths.anchor_ckpt(round));
  const auto test_metrics = evaluate_entries(cfg, paths, *model, paths.test);
  const auto val_metrics = evaluate_entries(cfg, paths, *model, paths.validation);

  json doc;
  doc["round"] = round;
  doc["anchor_kind"] = model->kind();
  doc["anchor_checksum"] = to_hex(fnv1a64_file(paths.anchor_ckpt(round)));
  doc["test"] = metrics_to_json(test_metrics);
  doc["validation"] = metrics_to_json(val_metrics);
  write_json_file(paths.metrics(round), doc);
}

void stage_explain(const RunConfig& cfg, int round) {
  const Paths paths(cfg.out_dir);
  const auto model = logic::NcrModel::load(paths.sampler_ckpt);
  auto sc = cfg.sampler;
  sc.workers = effective_workers(cfg);
  const sampler::Sampler sampler(model, sc);
  const auto anchor_model = anchor::load_anchor(paths.anchor_ckpt(round));

  const auto entries = data::load_eval_entries(paths.test);
  const auto user_items = data::load_user_items(paths.user_items);
  const auto info = read_split_info(paths);

  for (const std::size_t n : cfg.explain.top_n) {
    explain::ExplainConfig ec;
    ec.top_n = n;
    ec.k = cfg.explain.k;
    ec.mode = explain::mode_from_name(cfg.explain.mode);
    ec.seed = mix_seed(cfg.seed, fnv1a64("explain"), n);
    ec.workers = effective_workers(cfg);

    const auto records =
        explain::extract_explanations(sampler, *anchor_model, entries, user_items,
                                      info.n_items, ec);
    json recs = json::array();
    for (const auto& r : records) {
      recs.push_back({{"user_id", r.user},
                      {"recommended_item", r.recommended_item},
                      {"positions", r.positions},
                      {"explanation_items", r.explanation_items},
                      {"mode", explain::mode_name(r.mode)},
                      {"alternative_item", r.alternative_item},
                      {"alternative_score", r.alternative_score},
                      {"history", r.history},
                      {"history_feedback", r.feedback}});
    }
    write_json_file(paths.explanations(n), recs);

    const auto report = explain::evaluate_records(records, *anchor_model, ec);
    json doc;
    doc["pn"] = report.pn ? json(*report.pn) : json(nullptr);
    doc["ps"] = report.ps ? json(*report.ps) : json(nullptr);
    doc["f_ns"] = report.f_ns;
    doc["evaluated"] = report.evaluated;
    doc["users"] = report.users;
    doc["k"] = report.k;
    doc["n"] = report.top_n;
    doc["mode"] = explain::mode_name(report.mode);
    doc["seed"] = cfg.seed;
    doc["anchor_kind"] = anchor_model->kind();
    doc["anchor_checksum"] = to_hex(fnv1a64_file(paths.anchor_ckpt(round)));
    doc["sampler_checksum"] = to_hex(fnv1a64_file(paths.sampler_ckpt));
    write_json_file(paths.pnps(n), doc);
  }
}

void stage_pipeline(const RunConfig& cfg) {
  const Paths paths(cfg.out_dir);
  fs::create_directories(paths.out);

  struct StageTime {
    std::string name;
    double seconds;
  };
  std::vector<StageTime> timings;
  auto timed = [&](const std::string& name, const auto& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      throw Error("pipeline stage \"" + name + "\" failed: " + e.what());
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    timings.push_back({name, dt.count()});
    std::cerr << "pipeline: " << name << " done in " << dt.count() << "s\n";
  };

  timed("prepare", [&] { stage_prepare(cfg); });
  timed("train-sampler", [&] { stage_train(cfg, "sampler", 0); });
  timed("train-anchor", [&] { stage_train(cfg, "anchor", 0); });
  timed("evaluate-baseline", [&] { stage_evaluate(cfg, 0); });
  for (int round = 1; round <= cfg.rounds; ++round) {
    const std::string suffix = " (round " + std::to_string(round) + ")";
    timed("augment" + suffix, [&] { stage_augment(cfg, round); });
    timed("retrain-anchor" + suffix, [&] { stage_train(cfg, "anchor", round); });
    timed("evaluate" + suffix, [&] { stage_evaluate(cfg, round); });
  }
  timed("explain", [&] { stage_explain(cfg, cfg.rounds); });

  // Per-round metrics CSV: one baseline row plus one row per round.
  {
    std::ofstream out(paths.rounds_csv, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + paths.rounds_csv);
    out << "round";
    for (const int k : cfg.eval_ks) out << ",ndcg@" << k << ",hr@" << k;
    out << ",accepted\n";
    for (int round = 0; round <= cfg.rounds; ++round) {
      const auto doc = read_json_file(paths.metrics(round));
      out << round;
      char buf[64];
      for (const int k : cfg.eval_ks) {
        const auto& m = doc.at("test").at("ks").at(std::to_string(k));
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", m.at("ndcg").get<double>(),
                      m.at("hr").get<double>());
        out << buf;
      }
      std::size_t accepted = 0;
      if (round > 0) {
        accepted = read_json_file(paths.augment_report(round)).at("accepted").get<std::size_t>();
      }
      out << "," << accepted << "\n";
    }
  }

  json manifest;
  manifest["version"] = kBuildVersion;
  manifest["config"] = config_to_json(cfg);
  manifest["config_checksum"] = to_hex(fnv1a64(config_to_json(cfg).dump()));
  json artifacts = json::object();
  auto add_artifact = [&](const std::string& name, const std::string& path) {
    if (!fs::exists(path)) return;
    artifacts[name] = {{"path", path}, {"fnv64", to_hex(fnv1a64_file(path))}};
  };
  add_artifact("split", paths.split_manifest);
  add_artifact("train_examples", paths.train_examples);
  add_artifact("validation", paths.validation);
  add_artifact("test", paths.test);
  add_artifact("user_items", paths.user_items);
  add_artifact("rules", paths.rules);
  add_artifact("sampler_ckpt", paths.sampler_ckpt);
  add_artifact("sampler_loss", paths.sampler_loss);
  for (int round = 0; round <= cfg.rounds; ++round) {
    const std::string tag = "round_" + std::to_string(round);
    add_artifact("anchor_ckpt_" + tag, paths.anchor_ckpt(round));
    add_artifact("anchor_loss_" + tag, paths.anchor_loss(round));
    add_artifact("metrics_" + tag, paths.metrics(round));
    if (round > 0) {
      add_artifact("counterfactuals_" + tag, paths.counterfactuals(round));
      add_artifact("augment_report_" + tag, paths.augment_report(round));
    }
  }
  for (const std::size_t n : cfg.explain.top_n) {
    add_artifact("explanations_n" + std::to_string(n), paths.explanations(n));
    add_artifact("pnps_n" + std::to_string(n), paths.pnps(n));
  }
  add_artifact("rounds_csv", paths.rounds_csv);
  manifest["artifacts"] = artifacts;
  json stage_times = json::array();
  for (const auto& t : timings) stage_times.push_back({{"stage", t.name}, {"seconds", t.seconds}});
  manifest["stages"] = stage_times;
  write_json_file(paths.manifest, manifest);
}

}  // namespace ccr::cli
