#pragma once

#include <string>
#include <vector>

#include "ccr/data/dataset.hpp"
#include "ccr/data/synthetic.hpp"

namespace ccr::data {

// JSON-lines round trip; each line holds user_id, history, history_feedback,
// target, source, confidence. Schema violations raise DataError with the
// offending line number and field.
void save_examples(const std::string& path, const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> load_examples(const std::string& path);

void save_eval_entries(const std::string& path, const std::vector<EvalEntry>& entries);
std::vector<EvalEntry> load_eval_entries(const std::string& path);

void save_user_items(const std::string& path,
                     const std::vector<std::vector<std::int32_t>>& sets);
std::vector<std::vector<std::int32_t>> load_user_items(const std::string& path);

void save_rules(const std::string& path, const RuleTable& rules);
RuleTable load_rules(const std::string& path);

}  // namespace ccr::data
