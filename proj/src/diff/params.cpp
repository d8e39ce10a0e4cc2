#include "ccr/diff/params.hpp"

#include <cmath>

#include "ccr/common.hpp"
#include "ccr/kernels/kernels.hpp"

namespace ccr::diff {

void ParamStore::add(const std::string& name, Shape shape, std::vector<double> values,
                     bool trainable) {
  if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
  if (values.size() != shape.numel()) {
    throw ShapeError("parameter " + name + ": " + std::to_string(values.size()) +
                     " values for shape " + shape.str());
  }
  Entry e;
  e.name = name;
  e.shape = shape;
  e.value = std::move(values);
  e.grad.assign(e.value.size(), 0.0);
  e.m.assign(e.value.size(), 0.0);
  e.v.assign(e.value.size(), 0.0);
  e.trainable = trainable;
  index_.emplace(name, entries_.size());
  entries_.push_back(std::move(e));
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second];
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second];
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) std::fill(e.grad.begin(), e.grad.end(), 0.0);
}

void Adam::step(ParamStore& store, double lr) const {
  const auto& K = kernels::active();
  for (auto& e : store.entries_) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.grad.size(); ++i) {
      if (!std::isfinite(e.grad[i])) {
        throw ContractError("non-finite gradient in parameter " + e.name);
      }
    }
  }
  store.adam_steps_ += 1;
  const double t = static_cast<double>(store.adam_steps_);
  const double bias1 = 1.0 - std::pow(beta1, t);
  const double bias2 = 1.0 - std::pow(beta2, t);
  for (auto& e : store.entries_) {
    if (!e.trainable) continue;
    K.adam_update(e.value.data(), e.grad.data(), e.m.data(), e.v.data(), e.value.size(),
                  lr, beta1, beta2, eps, bias1, bias2);
  }
}

}  // namespace ccr::diff
