#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "zcae/tensor.hpp"

namespace zcae {

enum class Activation { relu, tanh, linear };

enum class PoolKind { none, window, quadrant };

struct PoolSpec {
  PoolKind kind = PoolKind::none;
  std::size_t window = 0;  // only for PoolKind::window

  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct ConvLayerSpec {
  std::size_t filters = 0;
  std::size_t kh = 0, kw = 0;
  Activation activation = Activation::relu;
  PoolSpec pool;

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

// Declarative architecture: zero-bias conv encoders, then FC(ReLU, bias) and
// a softmax layer.
struct NetworkSpec {
  std::size_t in_c = 0, in_h = 0, in_w = 0;
  std::vector<ConvLayerSpec> conv;
  std::size_t hidden = 0;
  std::size_t classes = 0;

  // Throws ShapeError if the layers do not fit the input geometry.
  void validate() const;

  FilterShape filter_shape(std::size_t layer) const;
  // Activation shape after encoder `depth` (1-based; 0 is the input).
  Shape4 feature_shape(std::size_t depth, std::size_t batch = 1) const;
  std::size_t head_fan_in() const;

  std::string to_text() const;
  static NetworkSpec from_text(const std::string& text);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// "cifar10" and "stl10" presets. Throws ConfigError for unknown names.
NetworkSpec network_preset(const std::string& name);

}  // namespace zcae
