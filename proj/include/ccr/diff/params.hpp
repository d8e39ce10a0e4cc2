#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccr/diff/tensor.hpp"

namespace ccr::diff {

// Named parameter tensors with their gradient and Adam moment buffers.
// Insertion order is the canonical order for checkpoints and updates.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> m;
    std::vector<double> v;
    bool trainable = true;
  };

  void add(const std::string& name, Shape shape, std::vector<double> values,
           bool trainable = true);

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  void zero_grad();

  std::int64_t adam_step_count() const { return adam_steps_; }
  void set_adam_step_count(std::int64_t t) { adam_steps_ = t; }

 private:
  friend struct Adam;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t adam_steps_ = 0;
};

// Standard Adam with the usual bias correction. Throws ContractError naming
// the parameter when a gradient is non-finite.
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(ParamStore& store, double lr) const;
};

}  // namespace ccr::diff
