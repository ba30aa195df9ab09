#pragma once

#include <filesystem>

#include "zcae/tensor.hpp"

namespace zcae {

// Binary P6 (maxval 255) for 3-channel images in [0,1]; values are clamped
// and rounded.
void write_ppm(const std::filesystem::path& path, ImageSpan<const float> image);
Tensor4<float> read_ppm(const std::filesystem::path& path);

// Tiles first-layer-style filters (k, 3, kh, kw) into one grid image with a
// one-pixel gap, each filter min-max normalized to [0,255] on its own.
void write_filter_grid(const std::filesystem::path& path, const FilterBank<float>& filters,
                       std::size_t columns = 0);

}  // namespace zcae
