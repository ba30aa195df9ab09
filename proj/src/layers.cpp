#include "zcae/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace zcae {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
ConstMapMat<T> as_matrix(const Tensor4<T>& t) {
  return ConstMapMat<T>(t.data().data(), static_cast<Eigen::Index>(t.shape().n),
                        static_cast<Eigen::Index>(t.shape().image_size()));
}

template <typename T>
MapMat<T> as_matrix(Tensor4<T>& t) {
  return MapMat<T>(t.data().data(), static_cast<Eigen::Index>(t.shape().n),
                   static_cast<Eigen::Index>(t.shape().image_size()));
}

template <typename T>
ConstMapMat<T> weight_matrix(const DenseLayer<T>& l) {
  return ConstMapMat<T>(l.weights.data(), static_cast<Eigen::Index>(l.out),
                        static_cast<Eigen::Index>(l.in));
}

template <typename T>
Tensor4<T> dense_forward(const DenseLayer<T>& layer, const Tensor4<T>& in) {
  if (in.shape().image_size() != layer.in) {
    throw ShapeError("dense layer expects fan-in " + std::to_string(layer.in) + ", got features " +
                     in.shape().str());
  }
  Tensor4<T> out(Shape4{in.shape().n, layer.out, 1, 1});
  auto dst = as_matrix(out);
  dst.noalias() = as_matrix(in) * weight_matrix(layer).transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(layer.bias.data(),
                                                          static_cast<Eigen::Index>(layer.out));
  dst.rowwise() += b;
  return out;
}

bool pool_matches(const PoolSpec& pool, const PoolRecord& rec) {
  switch (pool.kind) {
    case PoolKind::none:
      return std::holds_alternative<std::monostate>(rec);
    case PoolKind::window:
      return std::holds_alternative<SwitchMap>(rec);
    case PoolKind::quadrant:
      return std::holds_alternative<QuadrantSwitches>(rec);
  }
  return false;
}

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
};

template <typename T>
void add_signs(Fnv& f, const Tensor4<T>& t) {
  std::uint64_t word = 0;
  std::size_t bits = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    word = (word << 1) | (t[i] > T(0) ? 1U : 0U);
    if (++bits == 64) {
      f.add(word);
      word = 0;
      bits = 0;
    }
  }
  f.add(word);
}

}  // namespace

template <typename T>
EncoderModule<T>::EncoderModule(FilterBank<T> filters, Activation activation, PoolSpec pool)
    : filters_(std::move(filters)), activation_(activation), pool_(pool) {
  if (pool_.kind == PoolKind::window && pool_.window < 1) {
    throw ShapeError("pool window must be >= 1");
  }
}

template <typename T>
EncodeResult<T> EncoderModule<T>::encode(const Tensor4<T>& x) const {
  EncodeResult<T> r;
  r.pre_activation = conv_valid(x, filters_);
  switch (activation_) {
    case Activation::relu:
      r.activated = relu(r.pre_activation);
      break;
    case Activation::tanh:
      r.activated = tanh_act(r.pre_activation);
      break;
    case Activation::linear:
      r.activated = r.pre_activation;
      break;
  }
  switch (pool_.kind) {
    case PoolKind::none:
      r.output = r.activated;
      break;
    case PoolKind::window: {
      Pooled<T> p = maxpool(r.activated, pool_.window);
      r.output = std::move(p.values);
      r.switches = std::move(p.switches);
      break;
    }
    case PoolKind::quadrant: {
      QuadPooled<T> p = quadrant_pool(r.activated);
      r.output = std::move(p.values);
      r.switches = std::move(p.switches);
      break;
    }
  }
  return r;
}

template <typename T>
Tensor4<T> pool_scatter(const Tensor4<T>& pooled, const PoolRecord& record) {
  if (const auto* sw = std::get_if<SwitchMap>(&record)) return unpool(pooled, *sw);
  if (const auto* q = std::get_if<QuadrantSwitches>(&record)) return quadrant_unpool(pooled, *q);
  return pooled;
}

template <typename T>
Tensor4<T> pool_gather(const Tensor4<T>& full, const PoolRecord& record) {
  if (const auto* sw = std::get_if<SwitchMap>(&record)) return gather_switches(full, *sw);
  if (const auto* q = std::get_if<QuadrantSwitches>(&record)) return quadrant_gather(full, *q);
  return full;
}

template <typename T>
EncoderGrad<T> encoder_backward(const EncoderModule<T>& module, const Tensor4<T>& input,
                                const EncodeResult<T>& cache, const Tensor4<T>& grad_output,
                                bool want_input_grad) {
  const Tensor4<T> grad_act = pool_scatter(grad_output, cache.switches);
  Tensor4<T> grad_pre;
  switch (module.activation()) {
    case Activation::relu:
      grad_pre = relu_grad(cache.pre_activation, grad_act);
      break;
    case Activation::tanh:
      grad_pre = tanh_grad(cache.activated, grad_act);
      break;
    case Activation::linear:
      grad_pre = grad_act;
      break;
  }
  EncoderGrad<T> g;
  g.filters = conv_grad_filters(input, grad_pre, module.filters().shape());
  if (want_input_grad) g.input = conv_full_transpose(grad_pre, module.filters());
  return g;
}

template <typename T>
Tensor4<T> DecoderModule<T>::decode(const Tensor4<T>& y, const PoolRecord& switches) const {
  if (!pool_matches(encoder_->pool(), switches)) {
    throw InputError("missing-switches", "decoder switches do not match the encoder's pooling");
  }
  return conv_full_transpose(pool_scatter(y, switches), encoder_->filters());
}

template <typename T>
CAEStack<T> make_stack(const NetworkSpec& spec) {
  spec.validate();
  CAEStack<T> stack;
  for (std::size_t l = 0; l < spec.conv.size(); ++l) {
    stack.encoders.emplace_back(FilterBank<T>(spec.filter_shape(l)), spec.conv[l].activation,
                                spec.conv[l].pool);
  }
  return stack;
}

template <typename T>
CaeTrace<T> cae_forward(const CAEStack<T>& stack, const Tensor4<T>& x, std::size_t depth) {
  if (depth < 1 || depth > stack.size()) {
    throw ShapeError("cae depth " + std::to_string(depth) + " outside 1.." +
                     std::to_string(stack.size()));
  }
  CaeTrace<T> trace;
  trace.inputs.reserve(depth);
  trace.encoded.reserve(depth);
  const Tensor4<T>* a = &x;
  for (std::size_t l = 0; l < depth; ++l) {
    trace.inputs.push_back(*a);
    trace.encoded.push_back(stack.encoders[l].encode(*a));
    a = &trace.encoded.back().output;
  }
  trace.unpooled.resize(depth);
  Tensor4<T> d = trace.encoded.back().output;
  for (std::size_t l = depth; l-- > 0;) {
    trace.unpooled[l] = pool_scatter(d, trace.encoded[l].switches);
    d = conv_full_transpose(trace.unpooled[l], stack.encoders[l].filters());
  }
  trace.reconstruction = std::move(d);
  return trace;
}

template <typename T>
double cae_cost(const CAEStack<T>& stack, const Tensor4<T>& x, std::size_t depth) {
  return mse(x, cae_forward(stack, x, depth).reconstruction);
}

template <typename T>
CaeGradient<T> cae_cost_and_grads(const CAEStack<T>& stack, const Tensor4<T>& x,
                                  std::size_t depth) {
  const CaeTrace<T> trace = cae_forward(stack, x, depth);
  CaeGradient<T> out;
  out.cost = mse(x, trace.reconstruction);
  out.layer = depth;
  const EncoderModule<T>& top = stack.encoders[depth - 1];

  // g: gradient w.r.t. the output of decoder l (d_{l-1} in forward order).
  Tensor4<T> g = mse_grad(x, trace.reconstruction);
  for (std::size_t l = 0; l < depth; ++l) {
    const FilterBank<T>& f = stack.encoders[l].filters();
    if (l + 1 == depth) out.filters = conv_grad_filters(g, trace.unpooled[l], f.shape());
    g = pool_gather(conv_valid(g, f), trace.encoded[l].switches);
  }
  // g now is the gradient w.r.t. E_depth's output.
  EncoderGrad<T> enc = encoder_backward(top, trace.inputs[depth - 1], trace.encoded[depth - 1], g,
                                        /*want_input_grad=*/false);
  for (std::size_t i = 0; i < out.filters.size(); ++i) out.filters[i] += enc.filters[i];
  return out;
}

template <typename T>
template <typename U>
Classifier<U> Classifier<T>::cast() const {
  Classifier<U> out;
  for (const auto& e : encoders) out.encoders.push_back(e.template cast<U>());
  auto cast_layer = [](const DenseLayer<T>& l) {
    return DenseLayer<U>{l.in, l.out, AlignedVector<U>(l.weights.begin(), l.weights.end()),
                         AlignedVector<U>(l.bias.begin(), l.bias.end())};
  };
  out.head.hidden = cast_layer(head.hidden);
  out.head.output = cast_layer(head.output);
  out.head.dropout = head.dropout;
  return out;
}

template <typename T>
Dropped<T> apply_dropout(const Tensor4<T>& x, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw InputError("dropout-range", "dropout probability must be in [0,1)");
  Dropped<T> out{x, DropoutMask{std::vector<std::uint8_t>(x.size(), 1), 1.0 - p}};
  if (p == 0.0) return out;
  std::bernoulli_distribution keep(1.0 - p);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool k = keep(rng);
    out.mask.keep[i] = k ? 1 : 0;
    out.values[i] = k ? x[i] * scale : T(0);
  }
  return out;
}

template <typename T>
Tensor4<T> softmax(const Tensor4<T>& logits) {
  const Shape4& s = logits.shape();
  Tensor4<T> probs(s);
  const std::size_t k = s.image_size();
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* z = logits.data().data() + n * k;
    T* p = probs.data().data() + n * k;
    const T zmax = *std::max_element(z, z + k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = std::exp(z[i] - zmax);
      total += p[i];
    }
    for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<T>(p[i] / total);
  }
  return probs;
}

template <typename T>
CrossEntropy<T> cross_entropy_and_grads(const Tensor4<T>& probs, std::span<const int> labels) {
  const Shape4& s = probs.shape();
  const std::size_t k = s.image_size();
  if (labels.size() != s.n) {
    throw ShapeError("cross entropy: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(s.n));
  }
  CrossEntropy<T> out{0.0, probs};
  if (s.n == 0) return out;
  const T inv_batch = T(1) / static_cast<T>(s.n);
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw InputError("label-range", "label " + std::to_string(label) + " outside 0.." +
                                          std::to_string(k - 1));
    }
    total -= std::log(static_cast<double>(probs(n, static_cast<std::size_t>(label), 0, 0)));
    for (std::size_t i = 0; i < k; ++i) {
      const T onehot = static_cast<int>(i) == label ? T(1) : T(0);
      out.grad_logits(n, i, 0, 0) = (probs(n, i, 0, 0) - onehot) * inv_batch;
    }
  }
  out.loss = total / static_cast<double>(s.n);
  return out;
}

template <typename T>
ClassifierTrace<T> classifier_forward(const Classifier<T>& clf, const Tensor4<T>& x,
                                      bool train_mode, Rng* dropout_rng) {
  return classifier_forward_from(clf, 0, x, train_mode, dropout_rng);
}

template <typename T>
ClassifierTrace<T> classifier_forward_from(const Classifier<T>& clf, std::size_t first_layer,
                                           const Tensor4<T>& x, bool train_mode, Rng* dropout_rng) {
  if (first_layer > clf.encoders.size()) throw ShapeError("first layer beyond the encoder stack");
  ClassifierTrace<T> t;
  const Tensor4<T>* a = &x;
  for (std::size_t l = first_layer; l < clf.encoders.size(); ++l) {
    t.inputs.push_back(*a);
    t.encoded.push_back(clf.encoders[l].encode(*a));
    a = &t.encoded.back().output;
  }
  t.features = reshaped(*a, Shape4{a->shape().n, a->shape().image_size(), 1, 1});
  t.hidden_pre = dense_forward(clf.head.hidden, t.features);
  Tensor4<T> hidden = relu(t.hidden_pre);
  if (train_mode && clf.head.dropout > 0.0) {
    if (dropout_rng == nullptr) throw InputError("missing-rng", "dropout needs an rng in train mode");
    Dropped<T> d = apply_dropout(hidden, clf.head.dropout, *dropout_rng);
    t.hidden_out = std::move(d.values);
    t.mask = std::move(d.mask);
  } else {
    t.hidden_out = std::move(hidden);
  }
  t.logits = dense_forward(clf.head.output, t.hidden_out);
  t.probs = softmax(t.logits);
  return t;
}

template <typename T>
ClassifierGrads<T> classifier_backward(const Classifier<T>& clf, const ClassifierTrace<T>& t,
                                       const Tensor4<T>& grad_logits) {
  ClassifierGrads<T> g;
  const auto& out_l = clf.head.output;
  const auto& hid_l = clf.head.hidden;
  const auto gl = as_matrix(grad_logits);

  g.output_weights.resize(out_l.weights.size());
  MapMat<T>(g.output_weights.data(), static_cast<Eigen::Index>(out_l.out),
            static_cast<Eigen::Index>(out_l.in))
      .noalias() = gl.transpose() * as_matrix(t.hidden_out);
  g.output_bias.resize(out_l.out);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.output_bias.data(),
                                                  static_cast<Eigen::Index>(out_l.out)) =
      gl.colwise().sum();

  Tensor4<T> grad_hidden(t.hidden_out.shape());
  as_matrix(grad_hidden).noalias() = gl * weight_matrix(out_l);
  if (!t.mask.keep.empty()) {
    const T scale = static_cast<T>(1.0 / t.mask.keep_probability);
    for (std::size_t i = 0; i < grad_hidden.size(); ++i)
      grad_hidden[i] = t.mask.keep[i] ? grad_hidden[i] * scale : T(0);
  }
  const Tensor4<T> grad_pre = relu_grad(t.hidden_pre, grad_hidden);
  const auto gp = as_matrix(grad_pre);

  g.hidden_weights.resize(hid_l.weights.size());
  MapMat<T>(g.hidden_weights.data(), static_cast<Eigen::Index>(hid_l.out),
            static_cast<Eigen::Index>(hid_l.in))
      .noalias() = gp.transpose() * as_matrix(t.features);
  g.hidden_bias.resize(hid_l.out);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.hidden_bias.data(),
                                                  static_cast<Eigen::Index>(hid_l.out)) =
      gp.colwise().sum();

  Tensor4<T> grad_features(t.features.shape());
  as_matrix(grad_features).noalias() = gp * weight_matrix(hid_l);
  Tensor4<T> grad = reshaped(std::move(grad_features), t.encoded.back().output.shape());

  g.filters.resize(clf.encoders.size());
  for (std::size_t l = clf.encoders.size(); l-- > 0;) {
    EncoderGrad<T> eg = encoder_backward(clf.encoders[l], t.inputs[l], t.encoded[l], grad, l > 0);
    g.filters[l] = std::move(eg.filters);
    grad = std::move(eg.input);
  }
  return g;
}

template <typename T>
std::vector<std::span<T>> parameter_spans(Classifier<T>& clf) {
  std::vector<std::span<T>> out;
  for (auto& e : clf.encoders) out.push_back(e.filters().data());
  out.push_back(clf.head.hidden.weights);
  out.push_back(clf.head.hidden.bias);
  out.push_back(clf.head.output.weights);
  out.push_back(clf.head.output.bias);
  return out;
}

template <typename T>
std::vector<std::span<const T>> gradient_spans(const ClassifierGrads<T>& g) {
  std::vector<std::span<const T>> out;
  for (const auto& f : g.filters) out.push_back(f.data());
  out.push_back(g.hidden_weights);
  out.push_back(g.hidden_bias);
  out.push_back(g.output_weights);
  out.push_back(g.output_bias);
  return out;
}

std::vector<std::string> classifier_parameter_names(std::size_t conv_layers) {
  std::vector<std::string> names;
  for (std::size_t l = 1; l <= conv_layers; ++l) names.push_back("conv" + std::to_string(l));
  names.insert(names.end(), {"fc.weight", "fc.bias", "softmax.weight", "softmax.bias"});
  return names;
}

std::vector<int> argmax_rows(const Tensor4<float>& probs) {
  const std::size_t k = probs.shape().image_size();
  std::vector<int> out(probs.shape().n);
  for (std::size_t n = 0; n < out.size(); ++n) {
    const float* p = probs.data().data() + n * k;
    out[n] = static_cast<int>(std::max_element(p, p + k) - p);
  }
  return out;
}

template <typename T>
std::uint64_t region_signature(const std::vector<EncodeResult<T>>& encoded) {
  Fnv f;
  for (const auto& e : encoded) {
    add_signs(f, e.pre_activation);
    if (const auto* sw = std::get_if<SwitchMap>(&e.switches)) {
      for (auto v : sw->index) f.add(v);
    } else if (const auto* q = std::get_if<QuadrantSwitches>(&e.switches)) {
      for (auto v : q->index) f.add(v);
    }
  }
  return f.h;
}

template <typename T>
std::uint64_t region_signature(const ClassifierTrace<T>& trace) {
  Fnv f;
  f.add(region_signature(trace.encoded));
  add_signs(f, trace.hidden_pre);
  return f.h;
}

#define ZCAE_INSTANTIATE(T)                                                                     \
  template class EncoderModule<T>;                                                              \
  template class DecoderModule<T>;                                                              \
  template EncoderGrad<T> encoder_backward(const EncoderModule<T>&, const Tensor4<T>&,          \
                                           const EncodeResult<T>&, const Tensor4<T>&, bool);    \
  template Tensor4<T> pool_scatter(const Tensor4<T>&, const PoolRecord&);                       \
  template Tensor4<T> pool_gather(const Tensor4<T>&, const PoolRecord&);                        \
  template CAEStack<T> make_stack(const NetworkSpec&);                                          \
  template CaeTrace<T> cae_forward(const CAEStack<T>&, const Tensor4<T>&, std::size_t);          \
  template double cae_cost(const CAEStack<T>&, const Tensor4<T>&, std::size_t);                 \
  template CaeGradient<T> cae_cost_and_grads(const CAEStack<T>&, const Tensor4<T>&, std::size_t); \
  template Dropped<T> apply_dropout(const Tensor4<T>&, double, Rng&);                           \
  template Tensor4<T> softmax(const Tensor4<T>&);                                               \
  template CrossEntropy<T> cross_entropy_and_grads(const Tensor4<T>&, std::span<const int>);    \
  template ClassifierTrace<T> classifier_forward(const Classifier<T>&, const Tensor4<T>&, bool, \
                                                 Rng*);                                         \
  template ClassifierTrace<T> classifier_forward_from(const Classifier<T>&, std::size_t,        \
                                                      const Tensor4<T>&, bool, Rng*);           \
  template ClassifierGrads<T> classifier_backward(const Classifier<T>&,                         \
                                                  const ClassifierTrace<T>&, const Tensor4<T>&); \
  template std::vector<std::span<T>> parameter_spans(Classifier<T>&);                           \
  template std::vector<std::span<const T>> gradient_spans(const ClassifierGrads<T>&);           \
  template std::uint64_t region_signature(const std::vector<EncodeResult<T>>&);                 \
  template std::uint64_t region_signature(const ClassifierTrace<T>&);

ZCAE_INSTANTIATE(float)
ZCAE_INSTANTIATE(double)

template Classifier<double> Classifier<float>::cast<double>() const;
template Classifier<float> Classifier<double>::cast<float>() const;
template Classifier<float> Classifier<float>::cast<float>() const;

#undef ZCAE_INSTANTIATE

}  // namespace zcae
