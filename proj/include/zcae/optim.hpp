#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "zcae/tensor.hpp"

namespace zcae {

struct SgdHyper {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-5;

  friend bool operator==(const SgdHyper&, const SgdHyper&) = default;
};

// Velocity buffers mirror the parameter tensors, in parameter order.
struct OptimizerState {
  SgdHyper hyper;
  std::vector<AlignedVector<float>> velocities;

  // Allocates zero velocities on first use; throws ShapeError if the sizes
  // no longer match.
  void bind(const std::vector<std::size_t>& sizes);
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

// Classical momentum with weight decay folded into the gradient:
//   v <- momentum * v - lr * (g + decay * w);  w <- w + v.
// Returns false (and leaves w, v untouched) if any gradient is non-finite,
// or false after the update if any resulting weight is non-finite.
template <typename T>
bool sgd_step(std::span<T> weights, std::span<const T> grads, std::span<T> velocity,
              const SgdHyper& hyper);

bool sgd_step(const std::vector<std::span<float>>& params,
              const std::vector<std::span<const float>>& grads, OptimizerState& state);

}  // namespace zcae
