#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ccr/diff/params.hpp"
#include "ccr/diff/tensor.hpp"

namespace ccr::diff {

using ValueId = std::int32_t;

// Dynamic tape: ops evaluate eagerly as nodes are appended, backward walks the
// node list in reverse. A tape is confined to one thread. clear() and
// rollback() reuse node storage so per-example graphs do not churn the
// allocator; rollback also enables shared-prefix candidate scoring.
class Tape {
 public:
  // Leaves.
  ValueId input(Shape shape, const double* data);
  ValueId input(const std::vector<double>& v) { return input(Shape::vec(v.size()), v.data()); }
  ValueId scalar_input(double v) { return input(Shape::vec(1), &v); }
  // Gradient-tracked leaf not bound to a ParamStore (e.g. the intervention
  // vector); read its gradient with grad_of after backward().
  ValueId var(Shape shape, const double* data);
  ValueId var(const std::vector<double>& v) { return var(Shape::vec(v.size()), v.data()); }
  // Parameter leaves: gradients accumulate into the store.
  ValueId param(ParamStore& store, const std::string& name);
  ValueId param_row(ParamStore& store, const std::string& name, std::size_t row);

  // Elementwise; shapes must match exactly (no broadcasting).
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  // (m x k)·(k) -> (m); (m x k)·(k x n) -> (m x n)
  ValueId matmul(ValueId a, ValueId b);
  // Rank-1 concatenation along the only axis.
  ValueId concat(ValueId a, ValueId b);
  ValueId relu(ValueId x);
  ValueId sigmoid(ValueId x);
  ValueId tanh(ValueId x);
  ValueId softplus(ValueId x);
  // Scalar result ops over rank-1 inputs.
  ValueId cosine(ValueId a, ValueId b);
  ValueId l1norm(ValueId x);
  ValueId sum(ValueId x);
  ValueId mean(ValueId x);
  ValueId dot(ValueId a, ValueId b);
  // out = c * x, out = x + c (elementwise constants).
  ValueId scale(ValueId x, double c);
  ValueId add_const(ValueId x, double c);
  // out = s * x where s is a scalar node.
  ValueId smul(ValueId x, ValueId s);
  ValueId slice(ValueId x, std::size_t offset, std::size_t len);

  const Shape& shape_of(ValueId id) const { return node(id).shape; }
  const std::vector<double>& value(ValueId id) const { return node(id).val; }
  double scalar_value(ValueId id) const;
  // Gradient of a var leaf (valid after backward).
  const std::vector<double>& grad_of(ValueId id) const;

  // Reverse pass from a scalar root; seeds dRoot/dRoot = seed. Gradients of
  // param leaves accumulate into their stores (on top of what is already
  // there), var leaves keep theirs on the tape.
  void backward(ValueId root, double seed = 1.0);

  std::size_t size() const { return used_; }
  void clear() { used_ = 0; }
  void rollback(std::size_t mark) { used_ = mark; }

 private:
  enum class Op : std::uint8_t {
    kInput, kVar, kParam, kParamRow,
    kAdd, kSub, kMul, kMatMul, kConcat,
    kRelu, kSigmoid, kTanh, kSoftplus,
    kCosine, kL1Norm, kSum, kMean, kDot,
    kScale, kAddConst, kSMul, kSlice,
  };

  struct Node {
    Op op;
    bool needs_grad = false;
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;
    ValueId a = -1, b = -1;
    double c0 = 0.0;            // scalar payload (scale factor, const, ...)
    std::array<double, 3> aux{};  // cached forward quantities (cosine norms)
    ParamStore* store = nullptr;
    std::uint32_t param_index = 0;
    std::size_t row = 0;        // kParamRow row / kSlice offset
  };

  Node& node(ValueId id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(ValueId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& fresh(Op op, Shape shape);
  ValueId id_of_last() const { return static_cast<ValueId>(used_) - 1; }
  void check_rank1(const char* op, ValueId x) const;
  void check_same_shape(const char* op, ValueId a, ValueId b) const;
  void backprop_node(std::size_t i);

  std::vector<Node> nodes_;
  std::size_t used_ = 0;
  std::vector<double> scratch_;
};

}  // namespace ccr::diff
