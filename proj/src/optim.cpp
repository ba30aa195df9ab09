#include "zcae/optim.hpp"

#include <cmath>

#include "zcae/error.hpp"

namespace zcae {

void OptimizerState::bind(const std::vector<std::size_t>& sizes) {
  if (velocities.empty()) {
    for (std::size_t s : sizes) velocities.emplace_back(s, 0.0f);
    return;
  }
  if (velocities.size() != sizes.size()) {
    throw ShapeError("optimizer has " + std::to_string(velocities.size()) +
                     " velocity buffers for " + std::to_string(sizes.size()) + " parameters");
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (velocities[i].size() != sizes[i]) {
      throw ShapeError("velocity buffer " + std::to_string(i) + " has size " +
                       std::to_string(velocities[i].size()) + ", parameter has " +
                       std::to_string(sizes[i]));
    }
  }
}

template <typename T>
bool sgd_step(std::span<T> weights, std::span<const T> grads, std::span<T> velocity,
              const SgdHyper& hyper) {
  if (weights.size() != grads.size() || weights.size() != velocity.size()) {
    throw ShapeError("sgd_step: parameter, gradient and velocity sizes differ");
  }
  for (T g : grads)
    if (!std::isfinite(g)) return false;
  bool finite = true;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    const double v = hyper.momentum * velocity[i] -
                     hyper.learning_rate * (static_cast<double>(grads[i]) + hyper.weight_decay * w);
    velocity[i] = static_cast<T>(v);
    weights[i] = static_cast<T>(w + static_cast<double>(velocity[i]));
    finite = finite && std::isfinite(weights[i]);
  }
  return finite;
}

bool sgd_step(const std::vector<std::span<float>>& params,
              const std::vector<std::span<const float>>& grads, OptimizerState& state) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: parameter/gradient count mismatch");
  std::vector<std::size_t> sizes;
  for (const auto& p : params) sizes.push_back(p.size());
  state.bind(sizes);
  for (const auto& g : grads)
    for (float x : g)
      if (!std::isfinite(x)) return false;
  bool ok = true;
  for (std::size_t i = 0; i < params.size(); ++i)
    ok = sgd_step<float>(params[i], grads[i], state.velocities[i], state.hyper) && ok;
  return ok;
}

template bool sgd_step<float>(std::span<float>, std::span<const float>, std::span<float>,
                              const SgdHyper&);
template bool sgd_step<double>(std::span<double>, std::span<const double>, std::span<double>,
                               const SgdHyper&);

}  // namespace zcae
