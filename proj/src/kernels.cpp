#include "zcae/kernels.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Core>

namespace zcae {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// Rows of `cols` are (c,u,v) filter taps, columns are output positions (i,j).
template <typename T>
void im2col(const T* image, std::size_t c, std::size_t h, std::size_t w, const FilterShape& f,
            RowMat<T>& cols) {
  const std::size_t oh = h - f.kh + 1;
  const std::size_t ow = w - f.kw + 1;
  cols.resize(static_cast<Eigen::Index>(f.fan_in()), static_cast<Eigen::Index>(oh * ow));
  std::size_t row = 0;
  for (std::size_t ic = 0; ic < c; ++ic) {
    const T* plane = image + ic * h * w;
    for (std::size_t u = 0; u < f.kh; ++u) {
      for (std::size_t v = 0; v < f.kw; ++v, ++row) {
        T* dst = cols.data() + row * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          const T* src = plane + (i + u) * w + v;
          for (std::size_t j = 0; j < ow; ++j) dst[i * ow + j] = src[j];
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into an image.
template <typename T>
void col2im(const RowMat<T>& cols, std::size_t c, std::size_t h, std::size_t w,
            const FilterShape& f, T* image) {
  const std::size_t oh = h - f.kh + 1;
  const std::size_t ow = w - f.kw + 1;
  std::size_t row = 0;
  for (std::size_t ic = 0; ic < c; ++ic) {
    T* plane = image + ic * h * w;
    for (std::size_t u = 0; u < f.kh; ++u) {
      for (std::size_t v = 0; v < f.kw; ++v, ++row) {
        const T* src = cols.data() + row * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          T* dst = plane + (i + u) * w + v;
          for (std::size_t j = 0; j < ow; ++j) dst[j] += src[i * ow + j];
        }
      }
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

template <typename T>
Tensor4<T> conv_valid(const Tensor4<T>& input, const FilterBank<T>& filters) {
  const Shape4& s = input.shape();
  const FilterShape& f = filters.shape();
  require(s.c == f.c, "conv_valid: input has " + std::to_string(s.c) + " channels, filters expect " +
                          std::to_string(f.c));
  require(f.kh <= s.h && f.kw <= s.w,
          "conv_valid: filters " + f.str() + " do not fit input " + s.str());
  const Shape4 out_shape{s.n, f.k, s.h - f.kh + 1, s.w - f.kw + 1};
  Tensor4<T> out(out_shape);
  const std::size_t positions = out_shape.h * out_shape.w;
  ConstMapMat<T> weights(filters.data().data(), static_cast<Eigen::Index>(f.k),
                         static_cast<Eigen::Index>(f.fan_in()));
  RowMat<T> cols;
  for (std::size_t n = 0; n < s.n; ++n) {
    im2col(input.data().data() + n * s.image_size(), s.c, s.h, s.w, f, cols);
    MapMat<T> dst(out.data().data() + n * out_shape.image_size(), static_cast<Eigen::Index>(f.k),
                  static_cast<Eigen::Index>(positions));
    dst.noalias() = weights * cols;
  }
  return out;
}

template <typename T>
Tensor4<T> conv_full_transpose(const Tensor4<T>& input, const FilterBank<T>& filters) {
  const Shape4& s = input.shape();
  const FilterShape& f = filters.shape();
  require(s.c == f.k, "conv_full_transpose: input has " + std::to_string(s.c) +
                          " channels, filters produce " + std::to_string(f.k));
  const Shape4 out_shape{s.n, f.c, s.h + f.kh - 1, s.w + f.kw - 1};
  Tensor4<T> out(out_shape);
  const std::size_t positions = s.h * s.w;
  ConstMapMat<T> weights(filters.data().data(), static_cast<Eigen::Index>(f.k),
                         static_cast<Eigen::Index>(f.fan_in()));
  RowMat<T> cols;
  for (std::size_t n = 0; n < s.n; ++n) {
    ConstMapMat<T> src(input.data().data() + n * s.image_size(), static_cast<Eigen::Index>(f.k),
                       static_cast<Eigen::Index>(positions));
    cols.noalias() = weights.transpose() * src;
    col2im(cols, out_shape.c, out_shape.h, out_shape.w, f,
           out.data().data() + n * out_shape.image_size());
  }
  return out;
}

template <typename T>
FilterBank<T> conv_grad_filters(const Tensor4<T>& input, const Tensor4<T>& grad_out,
                                const FilterShape& f) {
  const Shape4& s = input.shape();
  const Shape4& g = grad_out.shape();
  require(s.c == f.c && f.kh <= s.h && f.kw <= s.w,
          "conv_grad_filters: filters " + f.str() + " incompatible with input " + s.str());
  const Shape4 expected{s.n, f.k, s.h - f.kh + 1, s.w - f.kw + 1};
  require(g == expected, "conv_grad_filters: grad_out " + g.str() + " expected " + expected.str());
  FilterBank<T> grad(f);
  MapMat<T> dst(grad.data().data(), static_cast<Eigen::Index>(f.k),
                static_cast<Eigen::Index>(f.fan_in()));
  const std::size_t positions = g.h * g.w;
  RowMat<T> cols;
  for (std::size_t n = 0; n < s.n; ++n) {
    im2col(input.data().data() + n * s.image_size(), s.c, s.h, s.w, f, cols);
    ConstMapMat<T> go(grad_out.data().data() + n * g.image_size(), static_cast<Eigen::Index>(f.k),
                      static_cast<Eigen::Index>(positions));
    dst.noalias() += go * cols.transpose();
  }
  return grad;
}

template <typename T>
Pooled<T> maxpool(const Tensor4<T>& input, std::size_t p) {
  const Shape4& s = input.shape();
  require(p >= 1 && p * p <= 65535, "maxpool: invalid window " + std::to_string(p));
  require(s.h >= p && s.w >= p, "maxpool: window " + std::to_string(p) + " larger than " + s.str());
  const Shape4 out_shape{s.n, s.c, s.h / p, s.w / p};
  Pooled<T> result{Tensor4<T>(out_shape), SwitchMap{out_shape, s, p, {}}};
  result.switches.index.resize(out_shape.size());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < out_shape.h; ++i) {
        for (std::size_t j = 0; j < out_shape.w; ++j) {
          T best = input(n, c, i * p, j * p);
          std::uint16_t arg = 0;
          for (std::size_t u = 0; u < p; ++u) {
            for (std::size_t v = 0; v < p; ++v) {
              const T x = input(n, c, i * p + u, j * p + v);
              if (x > best) {
                best = x;
                arg = static_cast<std::uint16_t>(u * p + v);
              }
            }
          }
          const std::size_t o = out_shape.offset(n, c, i, j);
          result.values[o] = best;
          result.switches.index[o] = arg;
        }
      }
    }
  }
  return result;
}

namespace {

void check_switches(const Shape4& input, const SwitchMap& sw) {
  require(input == sw.shape, "unpool: input " + input.str() + " does not match switches " +
                                 sw.shape.str());
  if (sw.index.size() != input.size()) {
    throw InputError("corrupt-switch", "switch map holds " + std::to_string(sw.index.size()) +
                                           " entries for " + std::to_string(input.size()) + " outputs");
  }
  const std::size_t limit = sw.window * sw.window;
  for (std::uint16_t idx : sw.index) {
    if (idx >= limit) {
      throw InputError("corrupt-switch", "switch entry " + std::to_string(idx) +
                                             " outside window of " + std::to_string(limit));
    }
  }
}

}  // namespace

template <typename T>
Tensor4<T> unpool(const Tensor4<T>& input, const SwitchMap& sw) {
  check_switches(input.shape(), sw);
  const Shape4& s = sw.shape;
  const std::size_t p = sw.window;
  Tensor4<T> out(Shape4{s.n, s.c, sw.source.h, sw.source.w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) {
          const std::size_t o = s.offset(n, c, i, j);
          const std::size_t idx = sw.index[o];
          out(n, c, i * p + idx / p, j * p + idx % p) = input[o];
        }
  return out;
}

template <typename T>
Tensor4<T> gather_switches(const Tensor4<T>& full, const SwitchMap& sw) {
  const Shape4 expected{sw.shape.n, sw.shape.c, sw.source.h, sw.source.w};
  require(full.shape() == expected,
          "gather_switches: input " + full.shape().str() + " expected " + expected.str());
  const Shape4& s = sw.shape;
  const std::size_t p = sw.window;
  Tensor4<T> out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) {
          const std::size_t o = s.offset(n, c, i, j);
          const std::size_t idx = sw.index[o];
          out[o] = full(n, c, i * p + idx / p, j * p + idx % p);
        }
  return out;
}

template <typename T>
QuadPooled<T> quadrant_pool(const Tensor4<T>& input) {
  const Shape4& s = input.shape();
  require(s.h >= 2 && s.w >= 2, "quadrant_pool: needs at least 2x2 maps, got " + s.str());
  const std::size_t hs = (s.h + 1) / 2;
  const std::size_t ws = (s.w + 1) / 2;
  const Shape4 out_shape{s.n, s.c, 2, 2};
  QuadPooled<T> result{Tensor4<T>(out_shape), QuadrantSwitches{s, {}}};
  result.switches.index.resize(out_shape.size());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t qi = 0; qi < 2; ++qi) {
        for (std::size_t qj = 0; qj < 2; ++qj) {
          const std::size_t r0 = qi == 0 ? 0 : hs, r1 = qi == 0 ? hs : s.h;
          const std::size_t c0 = qj == 0 ? 0 : ws, c1 = qj == 0 ? ws : s.w;
          T best = input(n, c, r0, c0);
          std::uint32_t arg = static_cast<std::uint32_t>(r0 * s.w + c0);
          for (std::size_t i = r0; i < r1; ++i) {
            for (std::size_t j = c0; j < c1; ++j) {
              const T x = input(n, c, i, j);
              if (x > best) {
                best = x;
                arg = static_cast<std::uint32_t>(i * s.w + j);
              }
            }
          }
          const std::size_t o = out_shape.offset(n, c, qi, qj);
          result.values[o] = best;
          result.switches.index[o] = arg;
        }
      }
    }
  }
  return result;
}

template <typename T>
Tensor4<T> quadrant_unpool(const Tensor4<T>& input, const QuadrantSwitches& sw) {
  const Shape4& src = sw.source;
  require(input.shape() == (Shape4{src.n, src.c, 2, 2}),
          "quadrant_unpool: input " + input.shape().str() + " does not match source " + src.str());
  Tensor4<T> out(src);
  const std::size_t plane = src.h * src.w;
  for (std::size_t nc = 0; nc < src.n * src.c; ++nc) {
    for (std::size_t q = 0; q < 4; ++q) {
      const std::uint32_t idx = sw.index[nc * 4 + q];
      if (idx >= plane) throw InputError("corrupt-switch", "quadrant switch outside map");
      out[nc * plane + idx] = input[nc * 4 + q];
    }
  }
  return out;
}

template <typename T>
Tensor4<T> quadrant_gather(const Tensor4<T>& full, const QuadrantSwitches& sw) {
  const Shape4& src = sw.source;
  require(full.shape() == src,
          "quadrant_gather: input " + full.shape().str() + " expected " + src.str());
  Tensor4<T> out(Shape4{src.n, src.c, 2, 2});
  const std::size_t plane = src.h * src.w;
  for (std::size_t nc = 0; nc < src.n * src.c; ++nc)
    for (std::size_t q = 0; q < 4; ++q) out[nc * 4 + q] = full[nc * plane + sw.index[nc * 4 + q]];
  return out;
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& input) {
  Tensor4<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

template <typename T>
Tensor4<T> relu_grad(const Tensor4<T>& input, const Tensor4<T>& grad_out) {
  require(input.shape() == grad_out.shape(), "relu_grad: shape mismatch");
  Tensor4<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? grad_out[i] : T(0);
  return out;
}

template <typename T>
Tensor4<T> tanh_act(const Tensor4<T>& input) {
  Tensor4<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::tanh(input[i]);
  return out;
}

template <typename T>
Tensor4<T> tanh_grad(const Tensor4<T>& output, const Tensor4<T>& grad_out) {
  require(output.shape() == grad_out.shape(), "tanh_grad: shape mismatch");
  Tensor4<T> out(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i)
    out[i] = (T(1) - output[i] * output[i]) * grad_out[i];
  return out;
}

template <typename T>
double mse(const Tensor4<T>& x, const Tensor4<T>& r) {
  require(x.shape() == r.shape(), "mse: " + x.shape().str() + " vs " + r.shape().str());
  if (x.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(r[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

template <typename T>
Tensor4<T> mse_grad(const Tensor4<T>& x, const Tensor4<T>& r) {
  require(x.shape() == r.shape(), "mse_grad: " + x.shape().str() + " vs " + r.shape().str());
  Tensor4<T> out(x.shape());
  const T scale = T(2) / static_cast<T>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * (r[i] - x[i]);
  return out;
}

template <typename T>
double dot(const Tensor4<T>& a, const Tensor4<T>& b) {
  require(a.shape() == b.shape(), "dot: " + a.shape().str() + " vs " + b.shape().str());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

#define ZCAE_INSTANTIATE(T)                                                                    \
  template Tensor4<T> conv_valid(const Tensor4<T>&, const FilterBank<T>&);                     \
  template Tensor4<T> conv_full_transpose(const Tensor4<T>&, const FilterBank<T>&);            \
  template FilterBank<T> conv_grad_filters(const Tensor4<T>&, const Tensor4<T>&,               \
                                           const FilterShape&);                                \
  template Pooled<T> maxpool(const Tensor4<T>&, std::size_t);                                  \
  template Tensor4<T> unpool(const Tensor4<T>&, const SwitchMap&);                             \
  template Tensor4<T> gather_switches(const Tensor4<T>&, const SwitchMap&);                    \
  template QuadPooled<T> quadrant_pool(const Tensor4<T>&);                                     \
  template Tensor4<T> quadrant_unpool(const Tensor4<T>&, const QuadrantSwitches&);             \
  template Tensor4<T> quadrant_gather(const Tensor4<T>&, const QuadrantSwitches&);             \
  template Tensor4<T> relu(const Tensor4<T>&);                                                 \
  template Tensor4<T> relu_grad(const Tensor4<T>&, const Tensor4<T>&);                         \
  template Tensor4<T> tanh_act(const Tensor4<T>&);                                             \
  template Tensor4<T> tanh_grad(const Tensor4<T>&, const Tensor4<T>&);                         \
  template double mse(const Tensor4<T>&, const Tensor4<T>&);                                   \
  template Tensor4<T> mse_grad(const Tensor4<T>&, const Tensor4<T>&);                          \
  template double dot(const Tensor4<T>&, const Tensor4<T>&);

ZCAE_INSTANTIATE(float)
ZCAE_INSTANTIATE(double)

#undef ZCAE_INSTANTIATE

}  // namespace zcae
