// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace melstream {

/// Dense row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Matrix&) const = default;
};

/// Dense row-major rank-3 tensor, indexed (i, j, k).
struct Tensor3 {
  std::size_t d0 = 0;
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t a, std::size_t b, std::size_t c, double fill = 0.0)
      : d0(a), d1(b), d2(c), data(a * b * c, fill) {}

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * d1 + j) * d2 + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * d1 + j) * d2 + k];
  }
  std::span<const double> fiber(std::size_t i, std::size_t j) const {
    return {data.data() + (i * d1 + j) * d2, d2};
  }

  bool operator==(const Tensor3&) const = default;
};

}  // namespace melstream
