#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ccr::data {

struct Interaction {
  std::int32_t user = 0;
  std::int32_t item = 0;
  int rating = 0;  // 1..5
  std::int64_t timestamp = 0;
};

struct LoadResult {
  std::vector<Interaction> interactions;  // densely re-indexed ids
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<std::int64_t> original_user_ids;  // dense id -> original id
  std::vector<std::int64_t> original_item_ids;
};

// Parses `user<TAB>item<TAB>rating<TAB>timestamp` rows (MovieLens u.data
// layout) and re-indexes ids densely from 0.
LoadResult load_interactions(const std::string& path);

// 1..3 -> 0 (dislike), 4..5 -> 1 (like). Out of range throws DataError.
int binarize(int rating);

struct UserSequence {
  std::int32_t user = 0;
  std::vector<std::int32_t> items;
  std::vector<std::uint8_t> feedback;
  std::vector<std::int64_t> timestamps;

  std::size_t size() const { return items.size(); }
};

// Groups interactions per user and orders them by ascending timestamp, ties
// broken by ascending item id. Feedback comes from binarize(rating).
std::vector<UserSequence> build_sequences(const std::vector<Interaction>& interactions,
                                          std::size_t n_users);

enum class Source { kOriginal, kCounterfactual };

struct TrainingExample {
  std::int32_t user = 0;
  std::vector<std::int32_t> history;        // exactly W items
  std::vector<std::uint8_t> feedback;       // W bits
  std::int32_t target = 0;
  Source source = Source::kOriginal;
  double confidence = 1.0;
};

// Held-out positive target with its full chronological prefix; the scoring
// window is applied at evaluation time.
struct EvalEntry {
  std::int32_t user = 0;
  std::vector<std::int32_t> history;
  std::vector<std::uint8_t> feedback;
  std::int32_t target = 0;
};

struct DatasetSplit {
  std::vector<UserSequence> train;  // per-user training portion
  std::vector<EvalEntry> validation;
  std::vector<EvalEntry> test;
};

// Positive leave-one-out: per user with >= 5 interactions, the last positive
// interaction and its trailing negatives form the test group, the previous
// positive and its trailing negatives the validation group, the rest trains.
// Users with < 5 interactions or no positive interaction train only.
DatasetSplit split_leave_one_out(const std::vector<UserSequence>& sequences);

// One example per interaction with >= window predecessors inside its
// sequence; shorter prefixes are skipped, never padded.
std::vector<TrainingExample> windowize(const std::vector<UserSequence>& sequences,
                                       std::size_t window);

// Every item a user ever touched, across all splits, for "irrelevant item"
// candidate sampling. Indexed by dense user id.
std::vector<std::vector<std::int32_t>> user_item_sets(const std::vector<UserSequence>& sequences,
                                                      std::size_t n_users);

}  // namespace ccr::data
