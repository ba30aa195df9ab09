#include "zcae/network_spec.hpp"

#include <sstream>

namespace zcae {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::linear:
      return "linear";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "linear") return Activation::linear;
  throw ConfigError("unknown activation '" + s + "'");
}

FilterShape NetworkSpec::filter_shape(std::size_t layer) const {
  const std::size_t in_channels = layer == 0 ? in_c : conv.at(layer - 1).filters;
  const ConvLayerSpec& l = conv.at(layer);
  return {l.filters, in_channels, l.kh, l.kw};
}

Shape4 NetworkSpec::feature_shape(std::size_t depth, std::size_t batch) const {
  Shape4 s{batch, in_c, in_h, in_w};
  for (std::size_t i = 0; i < depth; ++i) {
    const ConvLayerSpec& l = conv.at(i);
    if (l.kh > s.h || l.kw > s.w) {
      throw ShapeError("layer " + std::to_string(i + 1) + " kernel " + std::to_string(l.kh) + "x" +
                       std::to_string(l.kw) + " does not fit " + std::to_string(s.h) + "x" +
                       std::to_string(s.w));
    }
    s = {batch, l.filters, s.h - l.kh + 1, s.w - l.kw + 1};
    switch (l.pool.kind) {
      case PoolKind::none:
        break;
      case PoolKind::window:
        if (l.pool.window < 1 || l.pool.window > s.h || l.pool.window > s.w) {
          throw ShapeError("layer " + std::to_string(i + 1) + " pool window does not fit");
        }
        s.h /= l.pool.window;
        s.w /= l.pool.window;
        break;
      case PoolKind::quadrant:
        if (s.h < 2 || s.w < 2) {
          throw ShapeError("layer " + std::to_string(i + 1) + " quadrant pool needs 2x2 maps");
        }
        s.h = 2;
        s.w = 2;
        break;
    }
  }
  return s;
}

std::size_t NetworkSpec::head_fan_in() const { return feature_shape(conv.size()).image_size(); }

void NetworkSpec::validate() const {
  if (in_c < 1 || in_h < 1 || in_w < 1) throw ShapeError("network input dims must be >= 1");
  if (conv.empty()) throw ShapeError("network needs at least one conv layer");
  for (std::size_t i = 0; i < conv.size(); ++i) {
    if (!filter_shape(i).valid()) throw ShapeError("layer " + std::to_string(i + 1) + " has zero dims");
  }
  feature_shape(conv.size());
  if (hidden < 1 || classes < 1) throw ShapeError("head sizes must be >= 1");
}

std::string NetworkSpec::to_text() const {
  std::ostringstream out;
  out << "zcae-network 1\n";
  out << "input " << in_c << ' ' << in_h << ' ' << in_w << '\n';
  for (const ConvLayerSpec& l : conv) {
    out << "conv " << l.filters << ' ' << l.kh << ' ' << l.kw << ' ' << to_string(l.activation);
    switch (l.pool.kind) {
      case PoolKind::none:
        out << " none";
        break;
      case PoolKind::window:
        out << " pool " << l.pool.window;
        break;
      case PoolKind::quadrant:
        out << " quadrant";
        break;
    }
    out << '\n';
  }
  out << "fc " << hidden << '\n';
  out << "softmax " << classes << '\n';
  return out.str();
}

NetworkSpec NetworkSpec::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  NetworkSpec spec;
  bool header = false;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) -> ConfigError {
    return ConfigError("network-spec", "network spec line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (!header) {
      int version = 0;
      if (word != "zcae-network" || !(ls >> version) || version != 1) throw fail("bad header");
      header = true;
      continue;
    }
    if (word == "input") {
      if (!(ls >> spec.in_c >> spec.in_h >> spec.in_w)) throw fail("bad input line");
    } else if (word == "conv") {
      ConvLayerSpec l;
      std::string act, pool;
      if (!(ls >> l.filters >> l.kh >> l.kw >> act >> pool)) throw fail("bad conv line");
      l.activation = activation_from_string(act);
      if (pool == "none") {
        l.pool = {PoolKind::none, 0};
      } else if (pool == "quadrant") {
        l.pool = {PoolKind::quadrant, 0};
      } else if (pool == "pool") {
        l.pool.kind = PoolKind::window;
        if (!(ls >> l.pool.window)) throw fail("missing pool window");
      } else {
        throw fail("unknown pooling '" + pool + "'");
      }
      spec.conv.push_back(l);
    } else if (word == "fc") {
      if (!(ls >> spec.hidden)) throw fail("bad fc line");
    } else if (word == "softmax") {
      if (!(ls >> spec.classes)) throw fail("bad softmax line");
    } else {
      throw fail("unknown directive '" + word + "'");
    }
  }
  if (!header) throw ConfigError("network-spec", "network spec is empty");
  spec.validate();
  return spec;
}

NetworkSpec network_preset(const std::string& name) {
  const PoolSpec pool2{PoolKind::window, 2};
  NetworkSpec spec;
  if (name == "cifar10") {
    spec.in_c = 3;
    spec.in_h = spec.in_w = 32;
    spec.conv = {{96, 5, 5, Activation::relu, pool2},
                 {144, 5, 5, Activation::relu, pool2},
                 {192, 3, 3, Activation::relu, {PoolKind::none, 0}}};
    spec.hidden = 300;
    spec.classes = 10;
  } else if (name == "stl10") {
    spec.in_c = 3;
    spec.in_h = spec.in_w = 96;
    spec.conv = {{64, 5, 5, Activation::relu, pool2},
                 {128, 5, 5, Activation::relu, pool2},
                 {256, 3, 3, Activation::relu, {PoolKind::quadrant, 0}}};
    spec.hidden = 512;
    spec.classes = 10;
  } else {
    throw ConfigError("unknown-preset", "unknown network preset '" + name + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace zcae
