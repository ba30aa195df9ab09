#include "zcae/augment.hpp"

#include <algorithm>
#include <cmath>

#include "zcae/error.hpp"

namespace zcae {
namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

void require_rgb(const ImageSpan<const float>& image, const char* op) {
  if (image.c != 3) {
    throw ShapeError(std::string(op) + " needs 3 channels, got " + std::to_string(image.c));
  }
}

ImageSpan<const float> as_const(ImageSpan<float> image) {
  return {image.px, image.c, image.h, image.w};
}

}  // namespace

Hsv rgb_to_hsv(Rgb rgb) {
  const double r = clamp01(rgb.r), g = clamp01(rgb.g), b = clamp01(rgb.b);
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double delta = hi - lo;
  Hsv out{0.0, hi > 0.0 ? delta / hi : 0.0, hi};
  if (delta > 0.0) {
    double h;
    if (hi == r) {
      h = (g - b) / delta;
      if (h < 0.0) h += 6.0;
    } else if (hi == g) {
      h = (b - r) / delta + 2.0;
    } else {
      h = (r - g) / delta + 4.0;
    }
    h /= 6.0;
    out.h = h >= 1.0 ? h - 1.0 : h;
  }
  return out;
}

Rgb hsv_to_rgb(Hsv hsv) {
  const double s = clamp01(hsv.s), v = clamp01(hsv.v);
  double h = hsv.h - std::floor(hsv.h);
  const double h6 = h * 6.0;
  const double sector = std::floor(h6);
  const double f = h6 - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (static_cast<int>(sector) % 6) {
    case 0:
      return {v, t, p};
    case 1:
      return {q, v, p};
    case 2:
      return {p, v, t};
    case 3:
      return {p, q, v};
    case 4:
      return {t, p, v};
    default:
      return {v, p, q};
  }
}

HsvImage to_hsv(ImageSpan<const float> image) {
  require_rgb(image, "to_hsv");
  HsvImage out{image.h, image.w, std::vector<Hsv>(image.h * image.w)};
  const std::size_t plane = image.h * image.w;
  for (std::size_t i = 0; i < plane; ++i)
    out.px[i] = rgb_to_hsv({image.px[i], image.px[plane + i], image.px[2 * plane + i]});
  return out;
}

void from_hsv(const HsvImage& hsv, ImageSpan<float> image) {
  require_rgb(as_const(image), "from_hsv");
  if (hsv.h != image.h || hsv.w != image.w) throw ShapeError("from_hsv: size mismatch");
  const std::size_t plane = image.h * image.w;
  for (std::size_t i = 0; i < plane; ++i) {
    const Rgb rgb = hsv_to_rgb(hsv.px[i]);
    image.px[i] = static_cast<float>(rgb.r);
    image.px[plane + i] = static_cast<float>(rgb.g);
    image.px[2 * plane + i] = static_cast<float>(rgb.b);
  }
}

ColorParams sample_color(Rng& rng) { return {uniform_open(rng, -0.1, 0.1)}; }

ContrastParams sample_contrast(Rng& rng) {
  ContrastParams p;
  p.a = uniform_open(rng, 0.7, 1.4);
  p.b = uniform_open(rng, 0.25, 4.0);
  p.c = uniform_open(rng, -0.1, 0.1);
  p.d = uniform_open(rng, 0.7, 1.4);
  p.e = uniform_open(rng, 0.25, 4.0);
  p.f = uniform_open(rng, -0.1, 0.1);
  return p;
}

void color_augment(ImageSpan<float> image, const ColorParams& params) {
  HsvImage hsv = to_hsv(as_const(image));
  for (Hsv& p : hsv.px) {
    const double h = p.h + params.hue_shift;
    p.h = h - std::floor(h);
  }
  from_hsv(hsv, image);
}

void contrast_augment(ImageSpan<float> image, const ContrastParams& k, ContrastMode mode) {
  HsvImage hsv = to_hsv(as_const(image));
  for (Hsv& p : hsv.px) {
    const double s = p.s;
    const double base = mode == ContrastMode::literal ? s : p.v;
    p.s = clamp01(k.a * std::pow(s, k.b) + k.c);
    p.v = clamp01(k.d * std::pow(base, k.e) + k.f);
  }
  from_hsv(hsv, image);
}

int max_shift(std::size_t extent, double max_frac) {
  return static_cast<int>(std::floor(max_frac * static_cast<double>(extent)));
}

void translate(ImageSpan<float> image, int dx, int dy) {
  const long h = static_cast<long>(image.h), w = static_cast<long>(image.w);
  if (std::abs(dx) > w || std::abs(dy) > h) {
    throw InputError("shift-too-large", "translation larger than the image");
  }
  if (dx == 0 && dy == 0) return;
  std::vector<float> src(image.px.begin(), image.px.end());
  for (std::size_t c = 0; c < image.c; ++c) {
    for (long i = 0; i < h; ++i) {
      for (long j = 0; j < w; ++j) {
        const long si = i - dy, sj = j - dx;
        const bool inside = si >= 0 && si < h && sj >= 0 && sj < w;
        image.at(c, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
            inside ? src[(c * image.h + static_cast<std::size_t>(si)) * image.w +
                         static_cast<std::size_t>(sj)]
                   : 0.0f;
      }
    }
  }
}

std::pair<int, int> random_translate(ImageSpan<float> image, double max_frac, Rng& rng) {
  const int mx = max_shift(image.w, max_frac);
  const int my = max_shift(image.h, max_frac);
  std::uniform_int_distribution<int> pick_x(-mx, mx);
  std::uniform_int_distribution<int> pick_y(-my, my);
  const int dx = pick_x(rng);
  const int dy = pick_y(rng);
  translate(image, dx, dy);
  return {dx, dy};
}

void hflip(ImageSpan<float> image) {
  for (std::size_t c = 0; c < image.c; ++c)
    for (std::size_t i = 0; i < image.h; ++i) {
      float* row = image.px.data() + (c * image.h + i) * image.w;
      std::reverse(row, row + image.w);
    }
}

void standardize(ImageSpan<float> image) {
  const std::size_t n = image.px.size();
  if (n == 0) return;
  double mean = 0.0;
  for (float x : image.px) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float x : image.px) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (sd < 1e-8) {
    std::fill(image.px.begin(), image.px.end(), 0.0f);
    return;
  }
  for (float& x : image.px) x = static_cast<float>((x - mean) / sd);
}

void standardize_all(Tensor4<float>& images) {
  for (std::size_t i = 0; i < images.shape().n; ++i) standardize(image_of(images, i));
}

void augment_image(ImageSpan<float> image, const AugmentToggles& t, Rng& rng) {
  if (t.translate_flip) {
    std::bernoulli_distribution flip(t.flip_probability);
    if (flip(rng)) hflip(image);
    random_translate(image, t.max_shift_fraction, rng);
  }
  if (t.color_contrast) {
    color_augment(image, sample_color(rng));
    contrast_augment(image, sample_contrast(rng), t.contrast_mode);
  }
}

void prepare_batch(Tensor4<float>& batch, const AugmentToggles& toggles, std::uint64_t seed,
                   std::uint64_t epoch, std::uint64_t batch_index) {
  const bool any = toggles.translate_flip || toggles.color_contrast;
  for (std::size_t i = 0; i < batch.shape().n; ++i) {
    ImageSpan<float> img = image_of(batch, i);
    if (any) {
      Rng rng = make_rng(seed, {key(Stream::augment), epoch, batch_index, i});
      augment_image(img, toggles, rng);
    }
    standardize(img);
  }
}

}  // namespace zcae
