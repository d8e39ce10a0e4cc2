#include "ccr/data/examples_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ccr/common.hpp"

namespace ccr::data {

namespace {

using nlohmann::json;

json require_field(const json& obj, const char* field, const std::string& path,
                   std::size_t line_no) {
  if (!obj.contains(field)) {
    throw DataError(path + ":" + std::to_string(line_no) + ": missing field \"" +
                    std::string(field) + "\"");
  }
  return obj.at(field);
}

json parse_line(const std::string& line, const std::string& path, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  return in;
}

}  // namespace

void save_examples(const std::string& path, const std::vector<TrainingExample>& examples) {
  auto out = open_out(path);
  for (const auto& ex : examples) {
    json row;
    row["user_id"] = ex.user;
    row["history"] = ex.history;
    row["history_feedback"] = ex.feedback;
    row["target"] = ex.target;
    row["source"] = ex.source == Source::kCounterfactual ? "counterfactual" : "original";
    row["confidence"] = ex.confidence;
    out << row.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<TrainingExample> load_examples(const std::string& path) {
  auto in = open_in(path);
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json row = parse_line(line, path, line_no);
    TrainingExample ex;
    ex.user = require_field(row, "user_id", path, line_no).get<std::int32_t>();
    ex.history = require_field(row, "history", path, line_no).get<std::vector<std::int32_t>>();
    ex.feedback =
        require_field(row, "history_feedback", path, line_no).get<std::vector<std::uint8_t>>();
    ex.target = require_field(row, "target", path, line_no).get<std::int32_t>();
    const std::string source = require_field(row, "source", path, line_no).get<std::string>();
    if (source == "original") {
      ex.source = Source::kOriginal;
    } else if (source == "counterfactual") {
      ex.source = Source::kCounterfactual;
    } else {
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown source \"" + source +
                      "\"");
    }
    ex.confidence = require_field(row, "confidence", path, line_no).get<double>();
    if (ex.history.size() != ex.feedback.size()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": history and history_feedback lengths differ");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_eval_entries(const std::string& path, const std::vector<EvalEntry>& entries) {
  auto out = open_out(path);
  for (const auto& e : entries) {
    json row;
    row["user_id"] = e.user;
    row["history"] = e.history;
    row["history_feedback"] = e.feedback;
    row["target"] = e.target;
    out << row.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<EvalEntry> load_eval_entries(const std::string& path) {
  auto in = open_in(path);
  std::vector<EvalEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json row = parse_line(line, path, line_no);
    EvalEntry e;
    e.user = require_field(row, "user_id", path, line_no).get<std::int32_t>();
    e.history = require_field(row, "history", path, line_no).get<std::vector<std::int32_t>>();
    e.feedback =
        require_field(row, "history_feedback", path, line_no).get<std::vector<std::uint8_t>>();
    e.target = require_field(row, "target", path, line_no).get<std::int32_t>();
    if (e.history.size() != e.feedback.size()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": history and history_feedback lengths differ");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void save_user_items(const std::string& path,
                     const std::vector<std::vector<std::int32_t>>& sets) {
  auto out = open_out(path);
  for (std::size_t u = 0; u < sets.size(); ++u) {
    json row;
    row["user"] = u;
    row["items"] = sets[u];
    out << row.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<std::vector<std::int32_t>> load_user_items(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<std::int32_t>> sets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json row = parse_line(line, path, line_no);
    const auto user = require_field(row, "user", path, line_no).get<std::size_t>();
    if (user != sets.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": user rows out of order");
    }
    sets.push_back(require_field(row, "items", path, line_no).get<std::vector<std::int32_t>>());
  }
  return sets;
}

void save_rules(const std::string& path, const RuleTable& rules) {
  json doc;
  auto arr = json::array();
  for (const auto& r : rules.rules) {
    arr.push_back({{"trigger", r.trigger},
                   {"like", r.like_consequence},
                   {"dislike", r.dislike_consequence}});
  }
  doc["rules"] = std::move(arr);
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

RuleTable load_rules(const std::string& path) {
  auto in = open_in(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  RuleTable table;
  for (const auto& r : doc.at("rules")) {
    Rule rule;
    rule.trigger = r.at("trigger").get<std::int32_t>();
    rule.like_consequence = r.at("like").get<std::int32_t>();
    rule.dislike_consequence = r.at("dislike").get<std::int32_t>();
    table.rules.push_back(rule);
  }
  return table;
}

}  // namespace ccr::data
