#include "ccr/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>

#include "ccr/common.hpp"

namespace ccr::data {

namespace {

std::int64_t parse_int_field(std::string_view field, const std::string& path, std::size_t line_no,
                             const char* what) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw DataError(path + ":" + std::to_string(line_no) + ": malformed " + what + " field '" +
                    std::string(field) + "'");
  }
  return value;
}

}  // namespace

LoadResult load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interactions file: " + path);

  struct RawRow {
    std::int64_t user, item, rating, ts;
  };
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv(line);
    std::array<std::string_view, 4> fields;
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      const std::size_t tab = f < 3 ? sv.find('\t', start) : std::string_view::npos;
      if (f < 3 && tab == std::string_view::npos) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": expected 4 tab-separated fields");
      }
      fields[static_cast<std::size_t>(f)] =
          sv.substr(start, (f < 3 ? tab : sv.size()) - start);
      start = f < 3 ? tab + 1 : start;
    }
    RawRow r;
    r.user = parse_int_field(fields[0], path, line_no, "user");
    r.item = parse_int_field(fields[1], path, line_no, "item");
    r.rating = parse_int_field(fields[2], path, line_no, "rating");
    r.ts = parse_int_field(fields[3], path, line_no, "timestamp");
    if (r.rating < 1 || r.rating > 5) {
      throw DataError(path + ":" + std::to_string(line_no) + ": rating " +
                      std::to_string(r.rating) + " outside 1..5");
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError("interactions file is empty: " + path);

  // Dense re-indexing by ascending original id keeps the mapping reproducible.
  std::map<std::int64_t, std::int32_t> user_map, item_map;
  for (const auto& r : rows) {
    user_map.emplace(r.user, 0);
    item_map.emplace(r.item, 0);
  }
  LoadResult out;
  out.original_user_ids.reserve(user_map.size());
  for (auto& [orig, dense] : user_map) {
    dense = static_cast<std::int32_t>(out.original_user_ids.size());
    out.original_user_ids.push_back(orig);
  }
  out.original_item_ids.reserve(item_map.size());
  for (auto& [orig, dense] : item_map) {
    dense = static_cast<std::int32_t>(out.original_item_ids.size());
    out.original_item_ids.push_back(orig);
  }
  out.n_users = user_map.size();
  out.n_items = item_map.size();
  out.interactions.reserve(rows.size());
  for (const auto& r : rows) {
    Interaction it;
    it.user = user_map.at(r.user);
    it.item = item_map.at(r.item);
    it.rating = static_cast<int>(r.rating);
    it.timestamp = r.ts;
    out.interactions.push_back(it);
  }
  return out;
}

int binarize(int rating) {
  if (rating < 1 || rating > 5) {
    throw DataError("rating " + std::to_string(rating) + " outside 1..5");
  }
  return rating >= 4 ? 1 : 0;
}

std::vector<UserSequence> build_sequences(const std::vector<Interaction>& interactions,
                                          std::size_t n_users) {
  std::vector<UserSequence> seqs(n_users);
  for (std::size_t u = 0; u < n_users; ++u) seqs[u].user = static_cast<std::int32_t>(u);

  std::vector<std::vector<Interaction>> per_user(n_users);
  for (const auto& it : interactions) {
    if (it.user < 0 || static_cast<std::size_t>(it.user) >= n_users) {
      throw DataError("interaction user id " + std::to_string(it.user) + " out of range");
    }
    per_user[static_cast<std::size_t>(it.user)].push_back(it);
  }
  for (std::size_t u = 0; u < n_users; ++u) {
    auto& rows = per_user[u];
    std::stable_sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.item < b.item;
    });
    auto& s = seqs[u];
    s.items.reserve(rows.size());
    s.feedback.reserve(rows.size());
    s.timestamps.reserve(rows.size());
    for (const auto& r : rows) {
      s.items.push_back(r.item);
      s.feedback.push_back(static_cast<std::uint8_t>(binarize(r.rating)));
      s.timestamps.push_back(r.timestamp);
    }
  }
  return seqs;
}

DatasetSplit split_leave_one_out(const std::vector<UserSequence>& sequences) {
  DatasetSplit split;
  for (const auto& seq : sequences) {
    const std::size_t n = seq.size();
    std::vector<std::size_t> positives;
    for (std::size_t i = 0; i < n; ++i) {
      if (seq.feedback[i]) positives.push_back(i);
    }
    if (n < 5 || positives.empty()) {
      split.train.push_back(seq);
      continue;
    }

    const std::size_t test_pos = positives.back();
    const bool has_val = positives.size() >= 2;
    const std::size_t val_pos = has_val ? positives[positives.size() - 2] : 0;
    const std::size_t train_end = has_val ? val_pos : test_pos;

    UserSequence train_part;
    train_part.user = seq.user;
    train_part.items.assign(seq.items.begin(), seq.items.begin() + static_cast<long>(train_end));
    train_part.feedback.assign(seq.feedback.begin(),
                               seq.feedback.begin() + static_cast<long>(train_end));
    train_part.timestamps.assign(seq.timestamps.begin(),
                                 seq.timestamps.begin() + static_cast<long>(train_end));
    split.train.push_back(std::move(train_part));

    auto make_entry = [&](std::size_t target_pos) {
      EvalEntry e;
      e.user = seq.user;
      e.history.assign(seq.items.begin(), seq.items.begin() + static_cast<long>(target_pos));
      e.feedback.assign(seq.feedback.begin(), seq.feedback.begin() + static_cast<long>(target_pos));
      e.target = seq.items[target_pos];
      return e;
    };
    if (has_val) split.validation.push_back(make_entry(val_pos));
    split.test.push_back(make_entry(test_pos));
  }
  return split;
}

std::vector<TrainingExample> windowize(const std::vector<UserSequence>& sequences,
                                       std::size_t window) {
  if (window < 1) throw ContractError("windowize: window must be >= 1");
  std::vector<TrainingExample> out;
  for (const auto& seq : sequences) {
    const std::size_t n = seq.size();
    for (std::size_t t = window; t < n; ++t) {
      TrainingExample ex;
      ex.user = seq.user;
      ex.history.assign(seq.items.begin() + static_cast<long>(t - window),
                        seq.items.begin() + static_cast<long>(t));
      ex.feedback.assign(seq.feedback.begin() + static_cast<long>(t - window),
                         seq.feedback.begin() + static_cast<long>(t));
      ex.target = seq.items[t];
      ex.source = Source::kOriginal;
      ex.confidence = 1.0;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::vector<std::vector<std::int32_t>> user_item_sets(const std::vector<UserSequence>& sequences,
                                                      std::size_t n_users) {
  std::vector<std::vector<std::int32_t>> sets(n_users);
  for (const auto& seq : sequences) {
    auto& s = sets[static_cast<std::size_t>(seq.user)];
    s.insert(s.end(), seq.items.begin(), seq.items.end());
  }
  for (auto& s : sets) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return sets;
}

}  // namespace ccr::data
