#include "zcae/ppm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

namespace zcae {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_p6(const std::filesystem::path& path, std::size_t w, std::size_t h,
              const std::vector<std::uint8_t>& rgb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output-not-writable", "cannot write " + path.string());
  out << "P6\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

// Header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

std::size_t header_number(std::istream& in) {
  const std::string tok = next_token(in);
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) return 0;
  return std::stoul(tok);
}

}  // namespace

void write_ppm(const std::filesystem::path& path, ImageSpan<const float> image) {
  if (image.c != 3) throw ShapeError("ppm output needs 3 channels, got " + std::to_string(image.c));
  std::vector<std::uint8_t> rgb(image.h * image.w * 3);
  for (std::size_t i = 0; i < image.h; ++i)
    for (std::size_t j = 0; j < image.w; ++j)
      for (std::size_t c = 0; c < 3; ++c) rgb[(i * image.w + j) * 3 + c] = to_byte(image.at(c, i, j));
  write_p6(path, image.w, image.h, rgb);
}

Tensor4<float> read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("dataset-not-found", "cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  magic = next_token(in);
  w = header_number(in);
  h = header_number(in);
  maxval = header_number(in);
  if (magic != "P6" || w == 0 || h == 0 || maxval != 255) {
    throw FormatError("unsupported ppm header in " + path.string(), 0);
  }
  const std::size_t header = static_cast<std::size_t>(in.tellg());
  std::vector<std::uint8_t> rgb(w * h * 3);
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (static_cast<std::size_t>(in.gcount()) != rgb.size()) {
    throw FormatError("truncated ppm pixel data", header + static_cast<std::size_t>(in.gcount()));
  }
  Tensor4<float> t(Shape4{1, 3, h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t c = 0; c < 3; ++c) t(0, c, i, j) = rgb[(i * w + j) * 3 + c] / 255.0f;
  return t;
}

void write_filter_grid(const std::filesystem::path& path, const FilterBank<float>& filters,
                       std::size_t columns) {
  const FilterShape& s = filters.shape();
  if (s.c != 3 && s.c != 1) throw ShapeError("filter grid needs 1 or 3 input channels, got " + s.str());
  if (columns == 0) columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(s.k))));
  const std::size_t rows = (s.k + columns - 1) / columns;
  const std::size_t W = columns * (s.kw + 1) + 1, H = rows * (s.kh + 1) + 1;
  std::vector<std::uint8_t> rgb(W * H * 3, 0);
  const std::size_t per = s.fan_in();
  for (std::size_t k = 0; k < s.k; ++k) {
    const auto first = filters.data().begin() + static_cast<std::ptrdiff_t>(k * per);
    const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(per));
    const double range = *hi - *lo;
    const std::size_t y0 = (k / columns) * (s.kh + 1) + 1, x0 = (k % columns) * (s.kw + 1) + 1;
    for (std::size_t u = 0; u < s.kh; ++u)
      for (std::size_t v = 0; v < s.kw; ++v)
        for (std::size_t c = 0; c < 3; ++c) {
          const float w = filters(k, s.c == 3 ? c : 0, u, v);
          const double unit = range > 0 ? (w - *lo) / range : 0.5;
          rgb[((y0 + u) * W + x0 + v) * 3 + c] = to_byte(unit);
        }
  }
  write_p6(path, W, H, rgb);
}

}  // namespace zcae
