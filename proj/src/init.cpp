#include "zcae/init.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "zcae/error.hpp"

namespace zcae {

FilterBank<float> patch_init(const Tensor4<float>& images, const FilterShape& dims, Rng& rng) {
  const Shape4& s = images.shape();
  if (s.n == 0) throw InputError("empty-dataset", "patch_init needs at least one image");
  if (s.c != dims.c) {
    throw ShapeError("patch_init: dataset has " + std::to_string(s.c) + " channels, filters " +
                     dims.str());
  }
  if (dims.kh > s.h || dims.kw > s.w) {
    throw ShapeError("patch_init: filters " + dims.str() + " larger than images " + s.str());
  }
  FilterBank<float> out(dims);
  std::uniform_int_distribution<std::size_t> pick_image(0, s.n - 1);
  std::uniform_int_distribution<std::size_t> pick_row(0, s.h - dims.kh);
  std::uniform_int_distribution<std::size_t> pick_col(0, s.w - dims.kw);
  for (std::size_t k = 0; k < dims.k; ++k) {
    const std::size_t n = pick_image(rng);
    const std::size_t r = pick_row(rng);
    const std::size_t c0 = pick_col(rng);
    for (std::size_t c = 0; c < dims.c; ++c)
      for (std::size_t u = 0; u < dims.kh; ++u)
        for (std::size_t v = 0; v < dims.kw; ++v) out(k, c, u, v) = images(n, c, r + u, c0 + v);
  }
  return out;
}

FilterBank<float> svd_orthogonal_init(const FilterShape& dims, Rng& rng) {
  if (!dims.valid()) throw ShapeError("svd_orthogonal_init: invalid dims " + dims.str());
  const std::size_t rows = dims.k;
  const std::size_t cols = dims.fan_in();
  if (rows > cols) {
    throw InputError("degenerate-orthogonality",
                     "cannot build " + std::to_string(rows) + " orthonormal rows of length " +
                         std::to_string(cols));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = normal(rng);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd w = svd.matrixU() * svd.matrixV().transpose();
  FilterBank<float> out(dims);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out[i * cols + j] = static_cast<float>(w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  return out;
}

std::vector<double> hamming_window_2d(std::size_t kh, std::size_t kw) {
  auto window = [](std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n > 1) {
      for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(n - 1));
    }
    return w;
  };
  const std::vector<double> row = window(kh);
  const std::vector<double> col = window(kw);
  std::vector<double> out(kh * kw);
  for (std::size_t u = 0; u < kh; ++u)
    for (std::size_t v = 0; v < kw; ++v) out[u * kw + v] = row[u] * col[v];
  return out;
}

FilterBank<float> apply_hamming(const FilterBank<float>& filters) {
  const FilterShape& d = filters.shape();
  const std::vector<double> win = hamming_window_2d(d.kh, d.kw);
  FilterBank<float> out = filters;
  const std::size_t spatial = d.kh * d.kw;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(static_cast<double>(out[i]) * win[i % spatial]);
  return out;
}

DenseLayer<float> gaussian_dense(std::size_t fan_in, std::size_t fan_out, double k, Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw ShapeError("dense layer dims must be >= 1");
  std::normal_distribution<double> normal(0.0, k / std::sqrt(static_cast<double>(fan_in)));
  DenseLayer<float> l{fan_in, fan_out, AlignedVector<float>(fan_in * fan_out),
                      AlignedVector<float>(fan_out, 0.0f)};
  for (float& w : l.weights) w = static_cast<float>(normal(rng));
  return l;
}

HeadLayerInit gaussian_head_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  std::uniform_real_distribution<double> pick_k(0.2, 1.2);
  const double k = pick_k(rng);
  return {gaussian_dense(fan_in, fan_out, k, rng), k};
}

void initialize_stack(CAEStack<float>& stack, const Tensor4<float>& standardized, Rng& rng) {
  for (std::size_t l = 0; l < stack.size(); ++l) {
    auto& f = stack.encoders[l].filters();
    f = l == 0 ? patch_init(standardized, f.shape(), rng)
               : apply_hamming(svd_orthogonal_init(f.shape(), rng));
  }
  stack.trained_depth = 0;
}

void initialize_stack_random(CAEStack<float>& stack, Rng& rng) {
  for (auto& enc : stack.encoders) {
    const FilterShape d = enc.filters().shape();
    HeadLayerInit init = gaussian_head_init(d.fan_in(), d.k, rng);
    enc.filters() = FilterBank<float>(d, std::move(init.layer.weights));
  }
  stack.trained_depth = 0;
}

ClassifierHead<float> initialize_head(std::size_t fan_in, std::size_t hidden, std::size_t classes,
                                      double dropout, Rng& rng) {
  ClassifierHead<float> head;
  head.hidden = gaussian_head_init(fan_in, hidden, rng).layer;
  head.output = gaussian_head_init(hidden, classes, rng).layer;
  head.dropout = dropout;
  return head;
}

}  // namespace zcae
