#include "ccr/cli/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ccr/common.hpp"
#include "ccr/explain/explain.hpp"

namespace ccr::cli {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) {
      throw ConfigError("unknown config key \"" + key + "\" in " + where);
    }
  }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key \"" + std::string(key) + "\": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (!seed_set) throw ConfigError("seed is mandatory (config \"seed\" or --seed)");
  if (dataset.kind != "file" && dataset.kind != "synthetic") {
    throw ConfigError("dataset.kind must be \"file\" or \"synthetic\"");
  }
  if (dataset.kind == "file" && dataset.path.empty()) {
    throw ConfigError("dataset.path is required for file datasets");
  }
  if (anchor_kind != "ncr" && anchor_kind != "recurrent") {
    throw ConfigError("anchor must be \"ncr\" or \"recurrent\"");
  }
  if (window < 1) throw ConfigError("window must be >= 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (train.epochs < 1 || retrain_epochs < 1) throw ConfigError("epochs must be >= 1");
  if (eval_ks.empty()) throw ConfigError("eval.ks must not be empty");
  if (explain.top_n.empty()) throw ConfigError("explain.top_n must not be empty");
  if (out_dir.empty()) throw ConfigError("output directory must not be empty");
  (void)explain::mode_from_name(explain.mode);
  sampler.validate();
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  reject_unknown_keys(doc,
                      {"dataset", "window", "embed_dim", "train", "retrain_epochs", "ncr",
                       "sampler", "eval", "explain", "rounds", "anchor", "seed", "workers",
                       "out"},
                      "config");

  if (doc.contains("dataset")) {
    const auto& d = doc.at("dataset");
    reject_unknown_keys(d,
                        {"kind", "path", "users", "items", "rules", "seq_len", "noise",
                         "trigger_prob", "avoid_repeat_window"},
                        "dataset");
    read_into(d, "kind", cfg.dataset.kind);
    read_into(d, "path", cfg.dataset.path);
    read_into(d, "users", cfg.dataset.synthetic.n_users);
    read_into(d, "items", cfg.dataset.synthetic.n_items);
    read_into(d, "rules", cfg.dataset.synthetic.n_rules);
    read_into(d, "seq_len", cfg.dataset.synthetic.seq_len);
    read_into(d, "noise", cfg.dataset.synthetic.noise_rate);
    read_into(d, "trigger_prob", cfg.dataset.synthetic.trigger_prob);
    read_into(d, "avoid_repeat_window", cfg.dataset.synthetic.avoid_repeat_window);
  }
  read_into(doc, "window", cfg.window);
  read_into(doc, "embed_dim", cfg.embed_dim);
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    reject_unknown_keys(t, {"lr", "epochs", "batch", "negatives"}, "train");
    read_into(t, "lr", cfg.train.lr);
    read_into(t, "epochs", cfg.train.epochs);
    read_into(t, "batch", cfg.train.batch);
    read_into(t, "negatives", cfg.train.negatives);
  }
  read_into(doc, "retrain_epochs", cfg.retrain_epochs);
  if (doc.contains("ncr")) {
    const auto& n = doc.at("ncr");
    reject_unknown_keys(n, {"beta", "lambda_logic", "lambda_l2"}, "ncr");
    read_into(n, "beta", cfg.ncr.beta);
    read_into(n, "lambda_logic", cfg.ncr.lambda_logic);
    read_into(n, "lambda_l2", cfg.ncr.lambda_l2);
  }
  if (doc.contains("sampler")) {
    const auto& s = doc.at("sampler");
    reject_unknown_keys(
        s, {"alpha", "kappa", "opt_steps", "opt_lr", "threshold", "per_sequence"}, "sampler");
    read_into(s, "alpha", cfg.sampler.alpha);
    read_into(s, "kappa", cfg.sampler.kappa);
    read_into(s, "opt_steps", cfg.sampler.opt_steps);
    read_into(s, "opt_lr", cfg.sampler.opt_lr);
    read_into(s, "threshold", cfg.sampler.threshold);
    read_into(s, "per_sequence", cfg.sampler.per_sequence);
  }
  if (doc.contains("eval")) {
    const auto& e = doc.at("eval");
    reject_unknown_keys(e, {"ks"}, "eval");
    read_into(e, "ks", cfg.eval_ks);
  }
  if (doc.contains("explain")) {
    const auto& e = doc.at("explain");
    reject_unknown_keys(e, {"top_n", "k", "mode"}, "explain");
    read_into(e, "top_n", cfg.explain.top_n);
    read_into(e, "k", cfg.explain.k);
    read_into(e, "mode", cfg.explain.mode);
  }
  read_into(doc, "rounds", cfg.rounds);
  read_into(doc, "anchor", cfg.anchor_kind);
  if (doc.contains("seed")) {
    read_into(doc, "seed", cfg.seed);
    cfg.seed_set = true;
  }
  read_into(doc, "workers", cfg.workers);
  read_into(doc, "out", cfg.out_dir);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  json doc;
  json d;
  d["kind"] = cfg.dataset.kind;
  if (cfg.dataset.kind == "file") {
    d["path"] = cfg.dataset.path;
  } else {
    d["users"] = cfg.dataset.synthetic.n_users;
    d["items"] = cfg.dataset.synthetic.n_items;
    d["rules"] = cfg.dataset.synthetic.n_rules;
    d["seq_len"] = cfg.dataset.synthetic.seq_len;
    d["noise"] = cfg.dataset.synthetic.noise_rate;
    d["trigger_prob"] = cfg.dataset.synthetic.trigger_prob;
    d["avoid_repeat_window"] = cfg.dataset.synthetic.avoid_repeat_window;
  }
  doc["dataset"] = d;
  doc["window"] = cfg.window;
  doc["embed_dim"] = cfg.embed_dim;
  doc["train"] = {{"lr", cfg.train.lr},
                  {"epochs", cfg.train.epochs},
                  {"batch", cfg.train.batch},
                  {"negatives", cfg.train.negatives}};
  doc["retrain_epochs"] = cfg.retrain_epochs;
  doc["ncr"] = {{"beta", cfg.ncr.beta},
                {"lambda_logic", cfg.ncr.lambda_logic},
                {"lambda_l2", cfg.ncr.lambda_l2}};
  doc["sampler"] = {{"alpha", cfg.sampler.alpha},       {"kappa", cfg.sampler.kappa},
                    {"opt_steps", cfg.sampler.opt_steps}, {"opt_lr", cfg.sampler.opt_lr},
                    {"threshold", cfg.sampler.threshold}, {"per_sequence", cfg.sampler.per_sequence}};
  doc["eval"] = {{"ks", cfg.eval_ks}};
  doc["explain"] = {{"top_n", cfg.explain.top_n}, {"k", cfg.explain.k}, {"mode", cfg.explain.mode}};
  doc["rounds"] = cfg.rounds;
  doc["anchor"] = cfg.anchor_kind;
  doc["seed"] = cfg.seed;
  doc["workers"] = cfg.workers;
  doc["out"] = cfg.out_dir;
  return doc;
}

}  // namespace ccr::cli
