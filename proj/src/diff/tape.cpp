#include "ccr/diff/tape.hpp"

#include <cmath>
#include <cstring>

#include "ccr/common.hpp"
#include "ccr/kernels/kernels.hpp"

namespace ccr::diff {

namespace {
const kernels::Kernels& K() { return kernels::active(); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  // log(1 + e^x) without overflow on either tail.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}
}  // namespace

Tape::Node& Tape::fresh(Op op, Shape shape) {
  if (used_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[used_++];
  n.op = op;
  n.needs_grad = false;
  n.shape = shape;
  n.val.resize(shape.numel());
  n.a = n.b = -1;
  n.c0 = 0.0;
  n.aux = {};
  n.store = nullptr;
  n.param_index = 0;
  n.row = 0;
  return n;
}

void Tape::check_rank1(const char* op, ValueId x) const {
  if (node(x).shape.rank != 1) {
    throw ShapeError(std::string(op) + ": expected rank-1 operand, got " + node(x).shape.str());
  }
}

void Tape::check_same_shape(const char* op, ValueId a, ValueId b) const {
  if (!(node(a).shape == node(b).shape)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + node(a).shape.str() + " vs " +
                     node(b).shape.str());
  }
}

ValueId Tape::input(Shape shape, const double* data) {
  Node& n = fresh(Op::kInput, shape);
  std::memcpy(n.val.data(), data, shape.numel() * sizeof(double));
  return id_of_last();
}

ValueId Tape::var(Shape shape, const double* data) {
  Node& n = fresh(Op::kVar, shape);
  std::memcpy(n.val.data(), data, shape.numel() * sizeof(double));
  n.needs_grad = true;
  return id_of_last();
}

ValueId Tape::param(ParamStore& store, const std::string& name) {
  const auto& e = store.at(name);
  Node& n = fresh(Op::kParam, e.shape);
  std::memcpy(n.val.data(), e.value.data(), e.value.size() * sizeof(double));
  n.needs_grad = e.trainable;
  n.store = &store;
  n.param_index = static_cast<std::uint32_t>(&e - &store.entry(0));
  return id_of_last();
}

ValueId Tape::param_row(ParamStore& store, const std::string& name, std::size_t row) {
  const auto& e = store.at(name);
  if (e.shape.rank != 2) throw ShapeError("param_row: " + name + " is not rank-2");
  if (row >= e.shape.rows) {
    throw ContractError("param_row: row " + std::to_string(row) + " out of range for " + name +
                        " " + e.shape.str());
  }
  Node& n = fresh(Op::kParamRow, Shape::vec(e.shape.cols));
  std::memcpy(n.val.data(), e.value.data() + row * e.shape.cols, e.shape.cols * sizeof(double));
  n.needs_grad = e.trainable;
  n.store = &store;
  n.param_index = static_cast<std::uint32_t>(&e - &store.entry(0));
  n.row = row;
  return id_of_last();
}

ValueId Tape::add(ValueId a, ValueId b) {
  check_same_shape("add", a, b);
  Node& n = fresh(Op::kAdd, node(a).shape);
  K().add(node(a).val.data(), node(b).val.data(), n.val.data(), n.val.size());
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return id_of_last();
}

ValueId Tape::sub(ValueId a, ValueId b) {
  check_same_shape("sub", a, b);
  Node& n = fresh(Op::kSub, node(a).shape);
  K().sub(node(a).val.data(), node(b).val.data(), n.val.data(), n.val.size());
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return id_of_last();
}

ValueId Tape::mul(ValueId a, ValueId b) {
  check_same_shape("mul", a, b);
  Node& n = fresh(Op::kMul, node(a).shape);
  K().mul(node(a).val.data(), node(b).val.data(), n.val.data(), n.val.size());
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return id_of_last();
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  const Shape sa = node(a).shape;  // by value: fresh() may reallocate nodes_
  const Shape sb = node(b).shape;
  if (sa.rank != 2) throw ShapeError("matmul: left operand must be rank-2, got " + sa.str());
  const std::size_t m = sa.rows, k = sa.cols;
  Shape out;
  if (sb.rank == 1) {
    if (sb.rows != k) throw ShapeError("matmul: shape mismatch " + sa.str() + " vs " + sb.str());
    out = Shape::vec(m);
  } else {
    if (sb.rows != k) throw ShapeError("matmul: shape mismatch " + sa.str() + " vs " + sb.str());
    out = Shape::mat(m, sb.cols);
  }
  Node& n = fresh(Op::kMatMul, out);
  const double* A = node(a).val.data();
  const double* B = node(b).val.data();
  if (sb.rank == 1) {
    for (std::size_t i = 0; i < m; ++i) n.val[i] = K().dot(A + i * k, B, k);
  } else {
    const std::size_t c = sb.cols;
    std::fill(n.val.begin(), n.val.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        K().axpy(A[i * k + p], B + p * c, n.val.data() + i * c, c);
      }
    }
  }
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return id_of_last();
}

ValueId Tape::concat(ValueId a, ValueId b) {
  check_rank1("concat", a);
  check_rank1("concat", b);
  const std::size_t na = node(a).shape.rows, nb = node(b).shape.rows;
  Node& n = fresh(Op::kConcat, Shape::vec(na + nb));
  std::memcpy(n.val.data(), node(a).val.data(), na * sizeof(double));
  std::memcpy(n.val.data() + na, node(b).val.data(), nb * sizeof(double));
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return id_of_last();
}

ValueId Tape::relu(ValueId x) {
  Node& n = fresh(Op::kRelu, node(x).shape);
  K().relu(node(x).val.data(), n.val.data(), n.val.size());
  n.a = x;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::sigmoid(ValueId x) {
  Node& n = fresh(Op::kSigmoid, node(x).shape);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = stable_sigmoid(node(x).val[i]);
  n.a = x;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::tanh(ValueId x) {
  Node& n = fresh(Op::kTanh, node(x).shape);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::tanh(node(x).val[i]);
  n.a = x;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::softplus(ValueId x) {
  Node& n = fresh(Op::kSoftplus, node(x).shape);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = stable_softplus(node(x).val[i]);
  n.a = x;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::cosine(ValueId a, ValueId b) {
  check_rank1("cosine", a);
  check_rank1("cosine", b);
  check_same_shape("cosine", a, b);
  const std::size_t len = node(a).shape.rows;
  const double na = std::sqrt(K().sqnorm(node(a).val.data(), len));
  const double nb = std::sqrt(K().sqnorm(node(b).val.data(), len));
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine: zero vector operand");
  const double d = K().dot(node(a).val.data(), node(b).val.data(), len);
  Node& n = fresh(Op::kCosine, Shape::vec(1));
  n.val[0] = d / (na * nb);
  n.a = a;
  n.b = b;
  n.aux = {na, nb, d};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return id_of_last();
}

ValueId Tape::l1norm(ValueId x) {
  check_rank1("l1norm", x);
  Node& n = fresh(Op::kL1Norm, Shape::vec(1));
  n.val[0] = K().l1norm(node(x).val.data(), node(x).val.size());
  n.a = x;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::sum(ValueId x) {
  Node& n = fresh(Op::kSum, Shape::vec(1));
  n.val[0] = K().sum(node(x).val.data(), node(x).val.size());
  n.a = x;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::mean(ValueId x) {
  if (node(x).val.empty()) throw ContractError("mean of empty tensor");
  Node& n = fresh(Op::kMean, Shape::vec(1));
  n.val[0] = K().sum(node(x).val.data(), node(x).val.size()) /
             static_cast<double>(node(x).val.size());
  n.a = x;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::dot(ValueId a, ValueId b) {
  check_rank1("dot", a);
  check_rank1("dot", b);
  check_same_shape("dot", a, b);
  Node& n = fresh(Op::kDot, Shape::vec(1));
  n.val[0] = K().dot(node(a).val.data(), node(b).val.data(), node(a).val.size());
  n.a = a;
  n.b = b;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return id_of_last();
}

ValueId Tape::scale(ValueId x, double c) {
  Node& n = fresh(Op::kScale, node(x).shape);
  K().scale(c, node(x).val.data(), n.val.data(), n.val.size());
  n.a = x;
  n.c0 = c;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::add_const(ValueId x, double c) {
  Node& n = fresh(Op::kAddConst, node(x).shape);
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = node(x).val[i] + c;
  n.a = x;
  n.c0 = c;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

ValueId Tape::smul(ValueId x, ValueId s) {
  if (!node(s).shape.is_scalar()) {
    throw ShapeError("smul: scalar operand has shape " + node(s).shape.str());
  }
  Node& n = fresh(Op::kSMul, node(x).shape);
  K().scale(node(s).val[0], node(x).val.data(), n.val.data(), n.val.size());
  n.a = x;
  n.b = s;
  n.needs_grad = node(x).needs_grad || node(s).needs_grad;
  return id_of_last();
}

ValueId Tape::slice(ValueId x, std::size_t offset, std::size_t len) {
  check_rank1("slice", x);
  if (offset + len > node(x).shape.rows) {
    throw ShapeError("slice: [" + std::to_string(offset) + "," + std::to_string(offset + len) +
                     ") out of range for " + node(x).shape.str());
  }
  Node& n = fresh(Op::kSlice, Shape::vec(len));
  std::memcpy(n.val.data(), node(x).val.data() + offset, len * sizeof(double));
  n.a = x;
  n.row = offset;
  n.needs_grad = node(x).needs_grad;
  return id_of_last();
}

double Tape::scalar_value(ValueId id) const {
  if (!node(id).shape.is_scalar()) {
    throw ContractError("scalar_value: node has shape " + node(id).shape.str());
  }
  return node(id).val[0];
}

const std::vector<double>& Tape::grad_of(ValueId id) const {
  const Node& n = node(id);
  if (n.op != Op::kVar) throw ContractError("grad_of: node is not a var leaf");
  return n.grad;
}

void Tape::backward(ValueId root, double seed) {
  Node& r = node(root);
  if (!r.shape.is_scalar()) {
    throw ContractError("backward: root must be scalar, has shape " + r.shape.str());
  }
  for (std::size_t i = 0; i < used_; ++i) {
    Node& n = nodes_[i];
    if (n.needs_grad) {
      n.grad.assign(n.val.size(), 0.0);
    }
  }
  if (!r.needs_grad) return;  // root does not depend on any tracked leaf
  r.grad[0] = seed;
  for (std::size_t i = static_cast<std::size_t>(root) + 1; i-- > 0;) {
    if (nodes_[i].needs_grad) backprop_node(i);
  }
}

void Tape::backprop_node(std::size_t i) {
  Node& n = nodes_[i];
  const std::size_t len = n.val.size();
  auto ga = [&]() -> Node& { return node(n.a); };
  auto gb = [&]() -> Node& { return node(n.b); };

  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kVar:
      break;
    case Op::kParam: {
      auto& entry = n.store->entry(n.param_index);
      K().axpy(1.0, n.grad.data(), entry.grad.data(), len);
      break;
    }
    case Op::kParamRow: {
      auto& entry = n.store->entry(n.param_index);
      K().axpy(1.0, n.grad.data(), entry.grad.data() + n.row * entry.shape.cols, len);
      break;
    }
    case Op::kAdd:
      if (ga().needs_grad) K().axpy(1.0, n.grad.data(), ga().grad.data(), len);
      if (gb().needs_grad) K().axpy(1.0, n.grad.data(), gb().grad.data(), len);
      break;
    case Op::kSub:
      if (ga().needs_grad) K().axpy(1.0, n.grad.data(), ga().grad.data(), len);
      if (gb().needs_grad) K().axpy(-1.0, n.grad.data(), gb().grad.data(), len);
      break;
    case Op::kMul:
      scratch_.resize(len);
      if (ga().needs_grad) {
        K().mul(n.grad.data(), gb().val.data(), scratch_.data(), len);
        K().axpy(1.0, scratch_.data(), ga().grad.data(), len);
      }
      if (gb().needs_grad) {
        K().mul(n.grad.data(), ga().val.data(), scratch_.data(), len);
        K().axpy(1.0, scratch_.data(), gb().grad.data(), len);
      }
      break;
    case Op::kMatMul: {
      const Shape& sa = ga().shape;
      const std::size_t m = sa.rows, k = sa.cols;
      const double* A = ga().val.data();
      const double* B = gb().val.data();
      if (gb().shape.rank == 1) {
        // y = A·x: dA[i,:] += g[i]·x, dx += Aᵀ·g
        for (std::size_t r = 0; r < m; ++r) {
          if (ga().needs_grad) K().axpy(n.grad[r], B, ga().grad.data() + r * k, k);
          if (gb().needs_grad) K().axpy(n.grad[r], A + r * k, gb().grad.data(), k);
        }
      } else {
        const std::size_t c = gb().shape.cols;
        if (ga().needs_grad) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t p = 0; p < k; ++p) {
              ga().grad[r * k + p] += K().dot(n.grad.data() + r * c, B + p * c, c);
            }
          }
        }
        if (gb().needs_grad) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t p = 0; p < k; ++p) {
              K().axpy(A[r * k + p], n.grad.data() + r * c, gb().grad.data() + p * c, c);
            }
          }
        }
      }
      break;
    }
    case Op::kConcat: {
      const std::size_t na = ga().shape.rows;
      if (ga().needs_grad) K().axpy(1.0, n.grad.data(), ga().grad.data(), na);
      if (gb().needs_grad) K().axpy(1.0, n.grad.data() + na, gb().grad.data(), len - na);
      break;
    }
    case Op::kRelu:
      if (ga().needs_grad) {
        K().relu_bwd(ga().val.data(), n.grad.data(), ga().grad.data(), len);
      }
      break;
    case Op::kSigmoid:
      if (ga().needs_grad) {
        for (std::size_t j = 0; j < len; ++j) {
          ga().grad[j] += n.grad[j] * n.val[j] * (1.0 - n.val[j]);
        }
      }
      break;
    case Op::kTanh:
      if (ga().needs_grad) {
        for (std::size_t j = 0; j < len; ++j) {
          ga().grad[j] += n.grad[j] * (1.0 - n.val[j] * n.val[j]);
        }
      }
      break;
    case Op::kSoftplus:
      if (ga().needs_grad) {
        for (std::size_t j = 0; j < len; ++j) {
          ga().grad[j] += n.grad[j] * stable_sigmoid(ga().val[j]);
        }
      }
      break;
    case Op::kCosine: {
      const double na = n.aux[0], nb = n.aux[1], d = n.aux[2];
      const double g = n.grad[0];
      const double inv = 1.0 / (na * nb);
      const std::size_t vlen = ga().val.size();
      if (ga().needs_grad) {
        K().axpy(g * inv, gb().val.data(), ga().grad.data(), vlen);
        K().axpy(-g * d * inv / (na * na), ga().val.data(), ga().grad.data(), vlen);
      }
      if (gb().needs_grad) {
        K().axpy(g * inv, ga().val.data(), gb().grad.data(), vlen);
        K().axpy(-g * d * inv / (nb * nb), gb().val.data(), gb().grad.data(), vlen);
      }
      break;
    }
    case Op::kL1Norm:
      if (ga().needs_grad) {
        // sign(0) = 0 subgradient
        const double g = n.grad[0];
        for (std::size_t j = 0; j < ga().val.size(); ++j) {
          const double x = ga().val[j];
          if (x > 0.0) {
            ga().grad[j] += g;
          } else if (x < 0.0) {
            ga().grad[j] -= g;
          }
        }
      }
      break;
    case Op::kSum:
      if (ga().needs_grad) {
        const double g = n.grad[0];
        for (std::size_t j = 0; j < ga().val.size(); ++j) ga().grad[j] += g;
      }
      break;
    case Op::kMean:
      if (ga().needs_grad) {
        const double g = n.grad[0] / static_cast<double>(ga().val.size());
        for (std::size_t j = 0; j < ga().val.size(); ++j) ga().grad[j] += g;
      }
      break;
    case Op::kDot:
      if (ga().needs_grad) K().axpy(n.grad[0], gb().val.data(), ga().grad.data(), ga().val.size());
      if (gb().needs_grad) K().axpy(n.grad[0], ga().val.data(), gb().grad.data(), gb().val.size());
      break;
    case Op::kScale:
      if (ga().needs_grad) K().axpy(n.c0, n.grad.data(), ga().grad.data(), len);
      break;
    case Op::kAddConst:
      if (ga().needs_grad) K().axpy(1.0, n.grad.data(), ga().grad.data(), len);
      break;
    case Op::kSMul:
      if (ga().needs_grad) K().axpy(gb().val[0], n.grad.data(), ga().grad.data(), len);
      if (gb().needs_grad) {
        gb().grad[0] += K().dot(n.grad.data(), ga().val.data(), len);
      }
      break;
    case Op::kSlice:
      if (ga().needs_grad) K().axpy(1.0, n.grad.data(), ga().grad.data() + n.row, len);
      break;
  }
}

}  // namespace ccr::diff
