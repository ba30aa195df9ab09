#pragma once

#include <cstddef>

#include "zcae/tensor.hpp"

// Convolution, pooling and activation kernels with their hand-derived
// gradients. Everything is a pure function of its arguments. Kernels compute
// in T; reductions that produce a scalar accumulate in double.
namespace zcae {

// Cross-correlation without padding:
// out[n,k,i,j] = sum_{c,u,v} in[n,c,i+u,j+v] * f[k,c,u,v].
template <typename T>
Tensor4<T> conv_valid(const Tensor4<T>& input, const FilterBank<T>& filters);

// Exact adjoint of conv_valid for the same filters (full zero padding).
// Output is (n, filters.c, h+kh-1, w+kw-1).
template <typename T>
Tensor4<T> conv_full_transpose(const Tensor4<T>& input, const FilterBank<T>& filters);

// Gradient of sum(conv_valid(input, F) * grad_out) with respect to F.
template <typename T>
FilterBank<T> conv_grad_filters(const Tensor4<T>& input, const Tensor4<T>& grad_out,
                                const FilterShape& filter_dims);

template <typename T>
struct Pooled {
  Tensor4<T> values;
  SwitchMap switches;
};

// Non-overlapping p×p max pooling. Trailing rows/cols that do not fill a
// window are dropped. Ties resolve to the first row-major index.
template <typename T>
Pooled<T> maxpool(const Tensor4<T>& input, std::size_t p);

// Place every value at its recorded switch; all other positions are zero.
// Output has the shape of the tensor that was pooled.
template <typename T>
Tensor4<T> unpool(const Tensor4<T>& input, const SwitchMap& switches);

// Adjoint of unpool: read the value at each switch position.
template <typename T>
Tensor4<T> gather_switches(const Tensor4<T>& full, const SwitchMap& switches);

template <typename T>
struct QuadPooled {
  Tensor4<T> values;  // (n, c, 2, 2)
  QuadrantSwitches switches;
};

// Max over each quadrant; rows split at ceil(h/2), cols at ceil(w/2).
template <typename T>
QuadPooled<T> quadrant_pool(const Tensor4<T>& input);

template <typename T>
Tensor4<T> quadrant_unpool(const Tensor4<T>& input, const QuadrantSwitches& switches);

template <typename T>
Tensor4<T> quadrant_gather(const Tensor4<T>& full, const QuadrantSwitches& switches);

template <typename T>
Tensor4<T> relu(const Tensor4<T>& input);

// Passes grad_out where input > 0.
template <typename T>
Tensor4<T> relu_grad(const Tensor4<T>& input, const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> tanh_act(const Tensor4<T>& input);

// Takes the tanh output, not its input.
template <typename T>
Tensor4<T> tanh_grad(const Tensor4<T>& output, const Tensor4<T>& grad_out);

// Mean of squared differences, accumulated in double.
template <typename T>
double mse(const Tensor4<T>& x, const Tensor4<T>& r);

// d mse / d r.
template <typename T>
Tensor4<T> mse_grad(const Tensor4<T>& x, const Tensor4<T>& r);

template <typename T>
double dot(const Tensor4<T>& a, const Tensor4<T>& b);

}  // namespace zcae
