#pragma once

#include <cstddef>
#include <vector>

#include "zcae/layers.hpp"
#include "zcae/rng.hpp"
#include "zcae/tensor.hpp"

namespace zcae {

// Each filter is a crop of a uniformly drawn image at a uniformly drawn
// position. Draw order per filter: image index, row, col. The images are used
// as given; pass the standardized set so filters match the network inputs.
FilterBank<float> patch_init(const Tensor4<float>& images, const FilterShape& dims, Rng& rng);

// Gaussian k × fan_in matrix G = U S V^T replaced by U V^T (all singular
// values set to one), one row per filter. Requires k <= fan_in.
FilterBank<float> svd_orthogonal_init(const FilterShape& dims, Rng& rng);

// Outer product of 1-D Hamming windows 0.54 - 0.46 cos(2 pi i / (n - 1)),
// row-major kh × kw. A length-1 window is [1].
std::vector<double> hamming_window_2d(std::size_t kh, std::size_t kw);

FilterBank<float> apply_hamming(const FilterBank<float>& filters);

struct HeadLayerInit {
  DenseLayer<float> layer;
  double k = 0.0;  // weights ~ N(0, (k / sqrt(fan_in))^2)
};

// One k ~ U[0.2, 1.2] per layer; zero bias.
HeadLayerInit gaussian_head_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Weights ~ N(0, (k / sqrt(fan_in))^2) drawn in row-major order; zero bias.
DenseLayer<float> gaussian_dense(std::size_t fan_in, std::size_t fan_out, double k, Rng& rng);

// Layer 1 from patches, later layers SVD-orthogonal with Hamming weighting.
void initialize_stack(CAEStack<float>& stack, const Tensor4<float>& standardized, Rng& rng);

// Random-init encoders: Gaussian k / sqrt(fan_in) per layer, no data needed.
void initialize_stack_random(CAEStack<float>& stack, Rng& rng);

ClassifierHead<float> initialize_head(std::size_t fan_in, std::size_t hidden, std::size_t classes,
                                      double dropout, Rng& rng);

}  // namespace zcae
