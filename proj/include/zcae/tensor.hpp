#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "zcae/error.hpp"

namespace zcae {

// Storage for anything handed to vectorized kernels. A fixed base alignment
// keeps their summation order, and so their results, independent of where the
// allocator happened to place the buffer.
inline constexpr std::size_t kStorageAlignment = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kStorageAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kStorageAlignment}); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Activation layout (batch, channels, rows, cols).
struct Shape4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  std::size_t size() const { return n * c * h * w; }
  std::size_t image_size() const { return c * h * w; }
  std::size_t offset(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const {
    return ((in * c + ic) * h + ih) * w + iw;
  }
  // Batch count may be zero (an empty dataset); the per-image extents may not.
  bool valid() const { return c >= 1 && h >= 1 && w >= 1; }
  std::string str() const;
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

// Filter layout (out-channels, in-channels, kernel rows, kernel cols).
struct FilterShape {
  std::size_t k = 0, c = 0, kh = 0, kw = 0;

  std::size_t size() const { return k * c * kh * kw; }
  std::size_t fan_in() const { return c * kh * kw; }
  std::size_t offset(std::size_t ik, std::size_t ic, std::size_t iu, std::size_t iv) const {
    return ((ik * c + ic) * kh + iu) * kw + iv;
  }
  bool valid() const { return k >= 1 && c >= 1 && kh >= 1 && kw >= 1; }
  std::string str() const;
  friend bool operator==(const FilterShape&, const FilterShape&) = default;
};

// Mutable view of one image (c, h, w) inside a batch.
template <typename T>
struct ImageSpan {
  std::span<T> px;
  std::size_t c = 0, h = 0, w = 0;

  T& at(std::size_t ic, std::size_t ih, std::size_t iw) const { return px[(ic * h + ih) * w + iw]; }
  std::span<T> plane(std::size_t ic) const { return px.subspan(ic * h * w, h * w); }
};

// Dense row-major rank-4 array. Tensor4 and FilterBank are distinct
// instantiations so activations and weights cannot be swapped silently.
template <typename T, typename Dims>
class Dense4 {
 public:
  using value_type = T;
  using dims_type = Dims;

  Dense4() = default;
  explicit Dense4(const Dims& dims, T fill = T(0)) : dims_(checked(dims)), data_(dims.size(), fill) {}
  Dense4(const Dims& dims, AlignedVector<T> data) : dims_(checked(dims)), data_(std::move(data)) {
    check_length();
  }
  Dense4(const Dims& dims, const std::vector<T>& data)
      : dims_(checked(dims)), data_(data.begin(), data.end()) {
    check_length();
  }
  Dense4(const Dims& dims, std::initializer_list<T> data) : dims_(checked(dims)), data_(data) {
    check_length();
  }

  const Dims& shape() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const AlignedVector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data_[dims_.offset(a, b, c, d)];
  }
  const T& operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data_[dims_.offset(a, b, c, d)];
  }

  template <typename U>
  Dense4<U, Dims> cast() const {
    AlignedVector<U> out(data_.begin(), data_.end());
    return Dense4<U, Dims>(dims_, std::move(out));
  }

  friend bool operator==(const Dense4&, const Dense4&) = default;

 private:
  void check_length() const {
    if (data_.size() != dims_.size()) {
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match dims " +
                       dims_.str());
    }
  }

  static const Dims& checked(const Dims& dims) {
    if (!dims.valid()) throw ShapeError("invalid dims " + dims.str());
    return dims;
  }

  Dims dims_{};
  AlignedVector<T> data_;
};

template <typename T>
using Tensor4 = Dense4<T, Shape4>;

template <typename T>
using FilterBank = Dense4<T, FilterShape>;

template <typename T>
ImageSpan<T> image_of(Tensor4<T>& t, std::size_t index) {
  const Shape4& s = t.shape();
  return {t.data().subspan(index * s.image_size(), s.image_size()), s.c, s.h, s.w};
}

template <typename T>
ImageSpan<const T> image_of(const Tensor4<T>& t, std::size_t index) {
  const Shape4& s = t.shape();
  return {t.data().subspan(index * s.image_size(), s.image_size()), s.c, s.h, s.w};
}

// Reinterpret a tensor with a new shape of the same element count.
template <typename T>
Tensor4<T> reshaped(Tensor4<T> t, const Shape4& shape) {
  if (shape.size() != t.size()) {
    throw ShapeError("cannot reshape " + t.shape().str() + " to " + shape.str());
  }
  AlignedVector<T> v(t.data().begin(), t.data().end());
  return Tensor4<T>(shape, std::move(v));
}

// Per-window argmax record of a p×p max-pooling. `index` holds the row-major
// position inside each window (0..p²-1); `source` is the pooled input shape so
// unpooling restores truncated remainders as zeros.
struct SwitchMap {
  Shape4 shape;
  Shape4 source;
  std::size_t window = 0;
  std::vector<std::uint16_t> index;

  friend bool operator==(const SwitchMap&, const SwitchMap&) = default;
};

// Argmax record of quadrant pooling: for each (n, c, quadrant) the flat
// spatial index row*w+col inside the source map.
struct QuadrantSwitches {
  Shape4 source;
  std::vector<std::uint32_t> index;

  friend bool operator==(const QuadrantSwitches&, const QuadrantSwitches&) = default;
};

}  // namespace zcae
