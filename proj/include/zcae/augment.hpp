#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "zcae/rng.hpp"
#include "zcae/tensor.hpp"

namespace zcae {

struct Rgb {
  double r = 0, g = 0, b = 0;
};

// h in [0,1) cyclic, s and v in [0,1].
struct Hsv {
  double h = 0, s = 0, v = 0;
};

// Hexcone conversion; inputs are clamped to [0,1]. Gray maps to h = 0.
Hsv rgb_to_hsv(Rgb rgb);
Rgb hsv_to_rgb(Hsv hsv);

struct HsvImage {
  std::size_t h = 0, w = 0;
  std::vector<Hsv> px;  // row-major
};

HsvImage to_hsv(ImageSpan<const float> image);
void from_hsv(const HsvImage& hsv, ImageSpan<float> image);

// Hue shift a ~ U(-0.1, 0.1), one per image.
struct ColorParams {
  double hue_shift = 0.0;
};

// s' = a s^b + c, v' = d s^e + f with a,d ~ U(0.7,1.4), b,e ~ U(0.25,4),
// c,f ~ U(-0.1,0.1).
struct ContrastParams {
  double a = 1, b = 1, c = 0, d = 1, e = 1, f = 0;
};

// `literal` evaluates the value update on the saturation exactly as the
// two-equation form is written; `value` uses v' = d v^e + f instead.
enum class ContrastMode { literal, value };

ColorParams sample_color(Rng& rng);
ContrastParams sample_contrast(Rng& rng);

void color_augment(ImageSpan<float> image, const ColorParams& params);
void contrast_augment(ImageSpan<float> image, const ContrastParams& params,
                      ContrastMode mode = ContrastMode::literal);

// Pixel (i, j) moves to (i + dy, j + dx); vacated pixels become zero.
void translate(ImageSpan<float> image, int dx, int dy);
// Integer shifts uniform in [-floor(max_frac*w), floor(max_frac*w)] per axis
// (h for dy). Returns the shift drawn as {dx, dy}.
std::pair<int, int> random_translate(ImageSpan<float> image, double max_frac, Rng& rng);
int max_shift(std::size_t extent, double max_frac);

void hflip(ImageSpan<float> image);

// Subtract the image's own mean and divide by its own std (population);
// images with std < 1e-8 become all zeros.
void standardize(ImageSpan<float> image);
void standardize_all(Tensor4<float>& images);

struct AugmentToggles {
  bool translate_flip = false;  // A
  bool color_contrast = false;  // C
  double max_shift_fraction = 0.05;
  double flip_probability = 0.5;
  ContrastMode contrast_mode = ContrastMode::literal;
};

// flip -> translate -> color -> contrast, in place, on one image.
void augment_image(ImageSpan<float> image, const AugmentToggles& toggles, Rng& rng);

// Augments every image of a batch (per-image stream keyed by
// (seed, epoch, batch, image)) and standardizes it.
void prepare_batch(Tensor4<float>& batch, const AugmentToggles& toggles, std::uint64_t seed,
                   std::uint64_t epoch, std::uint64_t batch_index);

}  // namespace zcae
