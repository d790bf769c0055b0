#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ssd {

// Dense row-major float32 matrix; rows are batch items.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  float& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  float operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

}  // namespace ssd
