#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "zcae/kernels.hpp"
#include "zcae/network_spec.hpp"
#include "zcae/rng.hpp"
#include "zcae/tensor.hpp"

namespace zcae {

// Switches recorded by an encoder's pooling stage (none, p×p window, quadrant).
using PoolRecord = std::variant<std::monostate, SwitchMap, QuadrantSwitches>;

template <typename T>
struct EncodeResult {
  Tensor4<T> output;          // pooled activation
  PoolRecord switches;
  Tensor4<T> pre_activation;  // conv output
  Tensor4<T> activated;       // f(conv output), before pooling
};

// E(x) = P_s f(F x). Zero-bias: the module has no bias member at all.
template <typename T>
class EncoderModule {
 public:
  EncoderModule(FilterBank<T> filters, Activation activation, PoolSpec pool);

  const FilterBank<T>& filters() const { return filters_; }
  FilterBank<T>& filters() { return filters_; }
  Activation activation() const { return activation_; }
  const PoolSpec& pool() const { return pool_; }

  EncodeResult<T> encode(const Tensor4<T>& x) const;

  template <typename U>
  EncoderModule<U> cast() const {
    return EncoderModule<U>(filters_.template cast<U>(), activation_, pool_);
  }

  friend bool operator==(const EncoderModule&, const EncoderModule&) = default;

 private:
  FilterBank<T> filters_;
  Activation activation_;
  PoolSpec pool_;
};

template <typename T>
struct EncoderGrad {
  FilterBank<T> filters;
  Tensor4<T> input;  // empty unless requested
};

// Backward through one encoder given d loss / d output.
template <typename T>
EncoderGrad<T> encoder_backward(const EncoderModule<T>& module, const Tensor4<T>& input,
                                const EncodeResult<T>& cache, const Tensor4<T>& grad_output,
                                bool want_input_grad);

// D(y) = F^T U_s y, linear. Holds a reference to its encoder: the weights are
// tied, never copied.
template <typename T>
class DecoderModule {
 public:
  explicit DecoderModule(const EncoderModule<T>& encoder) : encoder_(&encoder) {}
  const FilterBank<T>& filters() const { return encoder_->filters(); }
  Tensor4<T> decode(const Tensor4<T>& y, const PoolRecord& switches) const;

 private:
  const EncoderModule<T>* encoder_;
};

// Pooling-kind dispatch used by encoders, decoders and their gradients.
template <typename T>
Tensor4<T> pool_scatter(const Tensor4<T>& pooled, const PoolRecord& record);
template <typename T>
Tensor4<T> pool_gather(const Tensor4<T>& full, const PoolRecord& record);

template <typename T>
struct CAEStack {
  std::vector<EncoderModule<T>> encoders;
  std::size_t trained_depth = 0;

  std::size_t size() const { return encoders.size(); }
  DecoderModule<T> decoder(std::size_t layer) const { return DecoderModule<T>(encoders.at(layer)); }

  template <typename U>
  CAEStack<U> cast() const {
    CAEStack<U> out;
    for (const auto& e : encoders) out.encoders.push_back(e.template cast<U>());
    out.trained_depth = trained_depth;
    return out;
  }

  friend bool operator==(const CAEStack&, const CAEStack&) = default;
};

// Zero-initialized stack with the spec's conv layers.
template <typename T>
CAEStack<T> make_stack(const NetworkSpec& spec);

template <typename T>
struct CaeTrace {
  Tensor4<T> reconstruction;
  std::vector<Tensor4<T>> inputs;    // encoder inputs a_0 .. a_{L-1}
  std::vector<EncodeResult<T>> encoded;
  std::vector<Tensor4<T>> unpooled;  // decoder intermediates U_s(.) per layer
};

// r(x) = D_1(...D_L(E_L(...E_1(x)))).
template <typename T>
CaeTrace<T> cae_forward(const CAEStack<T>& stack, const Tensor4<T>& x, std::size_t depth);

template <typename T>
struct CaeGradient {
  double cost = 0.0;
  std::size_t layer = 0;  // 1-based; the only layer that receives a gradient
  FilterBank<T> filters;
};

// Reconstruction cost of the original image through `depth` layers and
// the gradient for layer `depth` alone (earlier layers are frozen).
template <typename T>
CaeGradient<T> cae_cost_and_grads(const CAEStack<T>& stack, const Tensor4<T>& x, std::size_t depth);

template <typename T>
double cae_cost(const CAEStack<T>& stack, const Tensor4<T>& x, std::size_t depth);

// Fully connected layer, weights (out × in) row-major, with bias.
template <typename T>
struct DenseLayer {
  std::size_t in = 0, out = 0;
  AlignedVector<T> weights;
  AlignedVector<T> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

template <typename T>
struct ClassifierHead {
  DenseLayer<T> hidden;  // ReLU
  DenseLayer<T> output;  // softmax
  double dropout = 0.0;  // on the hidden layer, training only

  friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;
};

template <typename T>
struct Classifier {
  std::vector<EncoderModule<T>> encoders;
  ClassifierHead<T> head;

  template <typename U>
  Classifier<U> cast() const;

  friend bool operator==(const Classifier&, const Classifier&) = default;
};

struct DropoutMask {
  std::vector<std::uint8_t> keep;
  double keep_probability = 1.0;
};

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
template <typename T>
struct Dropped {
  Tensor4<T> values;
  DropoutMask mask;
};

template <typename T>
Dropped<T> apply_dropout(const Tensor4<T>& x, double p, Rng& rng);

template <typename T>
struct ClassifierTrace {
  std::vector<Tensor4<T>> inputs;
  std::vector<EncodeResult<T>> encoded;
  Tensor4<T> features;     // (n, D, 1, 1)
  Tensor4<T> hidden_pre;   // (n, H, 1, 1)
  Tensor4<T> hidden_out;   // after ReLU and dropout
  DropoutMask mask;
  Tensor4<T> logits;       // (n, K, 1, 1)
  Tensor4<T> probs;
};

// Encode through all layers, FC+ReLU, dropout (train mode only), softmax.
// `dropout_rng` is required whenever train_mode and head.dropout > 0.
template <typename T>
ClassifierTrace<T> classifier_forward(const Classifier<T>& clf, const Tensor4<T>& x,
                                      bool train_mode, Rng* dropout_rng = nullptr);

// Same, starting at encoder `first_layer` with `x` as its input; the trace
// only covers layers from there on. first_layer == L runs the head alone.
template <typename T>
ClassifierTrace<T> classifier_forward_from(const Classifier<T>& clf, std::size_t first_layer,
                                           const Tensor4<T>& x, bool train_mode,
                                           Rng* dropout_rng = nullptr);

template <typename T>
Tensor4<T> softmax(const Tensor4<T>& logits);

template <typename T>
struct CrossEntropy {
  double loss = 0.0;
  Tensor4<T> grad_logits;
};

// Mean negative log-likelihood; gradient (probs - onehot) / batch.
template <typename T>
CrossEntropy<T> cross_entropy_and_grads(const Tensor4<T>& probs, std::span<const int> labels);

template <typename T>
struct ClassifierGrads {
  std::vector<FilterBank<T>> filters;
  AlignedVector<T> hidden_weights, hidden_bias, output_weights, output_bias;
};

template <typename T>
ClassifierGrads<T> classifier_backward(const Classifier<T>& clf, const ClassifierTrace<T>& trace,
                                       const Tensor4<T>& grad_logits);

// Parameters/gradients flattened in a fixed order: conv filters 1..L,
// hidden W, hidden b, output W, output b.
template <typename T>
std::vector<std::span<T>> parameter_spans(Classifier<T>& clf);
template <typename T>
std::vector<std::span<const T>> gradient_spans(const ClassifierGrads<T>& grads);
std::vector<std::string> classifier_parameter_names(std::size_t conv_layers);

std::vector<int> argmax_rows(const Tensor4<float>& probs);

// Hash of the piecewise-linear region a forward pass landed in (ReLU signs
// and pooling switches). Equal hashes for x±h mean no kink was crossed.
template <typename T>
std::uint64_t region_signature(const std::vector<EncodeResult<T>>& encoded);
template <typename T>
std::uint64_t region_signature(const ClassifierTrace<T>& trace);

}  // namespace zcae
