#pragma once

#include <cmath>
#include <span>

namespace depthkv::detail {

// Dot product of two float rows, accumulated in double in index order.
// Importance scoring and the prefill simulator share this (and
// softmax_inplace) so that single-chunk prefill reproduces full-sequence
// scoring bit-for-bit.
inline double dot_f(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

// In-place softmax with row-max subtraction; sums run in index order.
inline void softmax_inplace(std::span<double> logits) {
  double max_logit = logits[0];
  for (double v : logits) {
    if (v > max_logit) max_logit = v;
  }
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - max_logit);
    sum += v;
  }
  for (double& v : logits) {
    v /= sum;
  }
}

}  // namespace depthkv::detail
