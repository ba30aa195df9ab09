#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "zcae/layers.hpp"
#include "zcae/network_spec.hpp"

namespace zcae {

struct GradcheckOptions {
  double tolerance = 1e-5;
  std::size_t max_params = 200;  // sampled per parameter tensor
  double step = 1e-4;            // central-difference step (relative to max(1, |w|))
  std::size_t step_retries = 1;  // tenfold smaller steps tried when a kink is crossed
  // Components smaller than floor_fraction * max|analytic| of their tensor are
  // compared against that floor instead of their own magnitude.
  double floor_fraction = 1e-3;
  std::uint64_t seed = 0;
};

struct TensorCheck {
  std::string name;
  std::size_t size = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // every step tried crossed a ReLU/pooling kink
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  bool passed() const;
  double max_error() const;
  std::string to_text() const;
};

// Loss value plus the piecewise-linear region it was evaluated in.
struct Evaluation {
  double loss = 0.0;
  std::uint64_t region = 0;
};

// Compare `analytic` against central differences of `evaluate` for a random
// subsample of entries of `param` (perturbed in place and restored).
template <typename T>
TensorCheck check_tensor(const std::string& name, std::span<T> param, std::span<const T> analytic,
                         const std::function<Evaluation()>& evaluate, const GradcheckOptions& options,
                         std::uint64_t stream);

// Layer-`depth` filter gradient of C_depth.
template <typename T>
GradcheckReport gradcheck_cae(CAEStack<T>& stack, const Tensor4<T>& x, std::size_t depth,
                              const GradcheckOptions& options);

// Every classifier parameter under cross entropy, with a fixed dropout mask.
template <typename T>
GradcheckReport gradcheck_classifier(Classifier<T>& clf, const Tensor4<T>& x,
                                     std::span<const int> labels, const GradcheckOptions& options,
                                     std::uint64_t dropout_seed);

// Builds a randomly initialized network for `spec` and a random batch, then
// checks every CAE depth and the classifier.
template <typename T>
GradcheckReport gradcheck_network(const NetworkSpec& spec, std::uint64_t seed, std::size_t batch,
                                  const GradcheckOptions& options, double dropout = 0.5);

}  // namespace zcae
