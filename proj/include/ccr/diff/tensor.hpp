#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ccr::diff {

// Rank-1 or rank-2 row-major shape. Scalars are rank-1 tensors of length 1.
struct Shape {
  int rank = 1;
  std::size_t rows = 0;
  std::size_t cols = 1;

  static Shape vec(std::size_t n) { return Shape{1, n, 1}; }
  static Shape mat(std::size_t r, std::size_t c) { return Shape{2, r, c}; }

  std::size_t numel() const { return rows * cols; }
  bool is_scalar() const { return rank == 1 && rows == 1; }
  bool operator==(const Shape& o) const {
    return rank == o.rank && rows == o.rows && cols == o.cols;
  }
  std::string str() const {
    if (rank == 1) return "[" + std::to_string(rows) + "]";
    return "[" + std::to_string(rows) + "," + std::to_string(cols) + "]";
  }
};

struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v) : shape(s), values(std::move(v)) {}
  static Tensor zeros(Shape s) { return Tensor(s, std::vector<double>(s.numel(), 0.0)); }
};

}  // namespace ccr::diff
