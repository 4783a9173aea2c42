#pragma once

#include <cassert>
#include <cstddef>
#include <span>

namespace depthkv {

// Non-owning row-major view of a rows x cols float matrix.
struct MatrixView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const float> row(std::size_t r) const {
    assert(r < rows);
    return {data + r * cols, cols};
  }

  float at(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
};

}  // namespace depthkv
