#include "zcae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "zcae/augment.hpp"
#include "zcae/init.hpp"

namespace zcae {

bool GradcheckReport::passed() const {
  return !tensors.empty() &&
         std::all_of(tensors.begin(), tensors.end(), [](const TensorCheck& t) { return t.passed; });
}

double GradcheckReport::max_error() const {
  double m = 0.0;
  for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
  return m;
}

std::string GradcheckReport::to_text() const {
  std::ostringstream out;
  for (const auto& t : tensors) {
    out << (t.passed ? "PASS " : "FAIL ") << t.name << " max_rel_error=" << t.max_rel_error
        << " checked=" << t.checked << " skipped=" << t.skipped << " size=" << t.size << '\n';
  }
  out << "gradcheck " << (passed() ? "passed" : "failed") << " max_rel_error=" << max_error() << '\n';
  return out.str();
}

template <typename T>
TensorCheck check_tensor(const std::string& name, std::span<T> param, std::span<const T> analytic,
                         const std::function<Evaluation()>& evaluate, const GradcheckOptions& options,
                         std::uint64_t stream) {
  if (param.size() != analytic.size()) throw ShapeError("gradcheck: " + name + " size mismatch");
  TensorCheck report{name, param.size(), 0, 0, 0.0, false};
  double max_abs = 0.0;
  for (T g : analytic) max_abs = std::max(max_abs, std::abs(static_cast<double>(g)));
  const double floor = options.floor_fraction * max_abs;

  std::vector<std::size_t> order(param.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(options.seed, {key(Stream::gradcheck), stream});
  std::shuffle(order.begin(), order.end(), rng);

  const std::uint64_t base_region = evaluate().region;
  const std::size_t wanted = std::min(options.max_params, param.size());
  for (std::size_t i : order) {
    if (report.checked == wanted) break;
    const T original = param[i];
    // A step that crosses a kink is retried at smaller sizes before the entry is skipped.
    std::optional<double> numeric;
    double h = options.step * std::max(1.0, std::abs(static_cast<double>(original)));
    for (std::size_t attempt = 0; attempt <= options.step_retries && !numeric; ++attempt, h *= 0.1) {
      const T up = static_cast<T>(static_cast<double>(original) + h);
      const T down = static_cast<T>(static_cast<double>(original) - h);
      param[i] = up;
      const Evaluation plus = evaluate();
      param[i] = down;
      const Evaluation minus = evaluate();
      param[i] = original;
      if (plus.region == base_region && minus.region == base_region) {
        numeric = (plus.loss - minus.loss) / (static_cast<double>(up) - static_cast<double>(down));
      }
    }
    if (!numeric) {
      ++report.skipped;
      continue;
    }
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(*numeric), floor});
    const double err = denom > 0.0 ? std::abs(a - *numeric) / denom : 0.0;
    report.max_rel_error = std::max(report.max_rel_error, err);
    ++report.checked;
  }
  report.passed = report.checked > 0 && report.max_rel_error <= options.tolerance;
  return report;
}

template <typename T>
GradcheckReport gradcheck_cae(CAEStack<T>& stack, const Tensor4<T>& x, std::size_t depth,
                              const GradcheckOptions& options) {
  const CaeGradient<T> g = cae_cost_and_grads(stack, x, depth);
  auto evaluate = [&]() {
    const CaeTrace<T> t = cae_forward(stack, x, depth);
    return Evaluation{mse(x, t.reconstruction), region_signature(t.encoded)};
  };
  GradcheckReport report;
  report.tensors.push_back(check_tensor<T>("cae-depth" + std::to_string(depth) + "/conv" +
                                               std::to_string(depth),
                                           stack.encoders[depth - 1].filters().data(),
                                           g.filters.data(), evaluate, options, depth));
  return report;
}

template <typename T>
GradcheckReport gradcheck_classifier(Classifier<T>& clf, const Tensor4<T>& x,
                                     std::span<const int> labels, const GradcheckOptions& options,
                                     std::uint64_t dropout_seed) {
  auto run = [&]() {
    Rng rng = make_rng(dropout_seed, {key(Stream::dropout)});
    return classifier_forward(clf, x, /*train_mode=*/true, &rng);
  };
  const ClassifierTrace<T> trace = run();
  const CrossEntropy<T> ce = cross_entropy_and_grads(trace.probs, labels);
  const ClassifierGrads<T> grads = classifier_backward(clf, trace, ce.grad_logits);
  const std::size_t layers = clf.encoders.size();
  const auto params = parameter_spans(clf);
  const auto analytic = gradient_spans(grads);
  const auto names = classifier_parameter_names(layers);
  GradcheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    // Layers below the perturbed one are unchanged: start from their cached output.
    const std::size_t first = std::min(i, layers);
    const Tensor4<T>& input = first < layers ? trace.inputs[first] : trace.encoded.back().output;
    auto evaluate = [&]() {
      Rng rng = make_rng(dropout_seed, {key(Stream::dropout)});
      const ClassifierTrace<T> t = classifier_forward_from(clf, first, input, /*train_mode=*/true, &rng);
      return Evaluation{cross_entropy_and_grads(t.probs, labels).loss, region_signature(t)};
    };
    report.tensors.push_back(check_tensor<T>("classifier/" + names[i], params[i], analytic[i],
                                             evaluate, options, 1000 + i));
  }
  return report;
}

template <typename T>
GradcheckReport gradcheck_network(const NetworkSpec& spec, std::uint64_t seed, std::size_t batch,
                                  const GradcheckOptions& options, double dropout) {
  spec.validate();
  Rng rng = make_rng(seed, {key(Stream::gradcheck)});
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  Tensor4<float> images(Shape4{batch, spec.in_c, spec.in_h, spec.in_w});
  for (float& v : images.data()) v = unit(rng);
  standardize_all(images);

  CAEStack<float> stack = make_stack<float>(spec);
  initialize_stack(stack, images, rng);
  std::vector<int> labels(batch);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(spec.classes) - 1);
  for (int& l : labels) l = pick(rng);
  Classifier<float> clf{stack.encoders, initialize_head(spec.head_fan_in(), spec.hidden, spec.classes,
                                                        dropout, rng)};

  CAEStack<T> stack_t = stack.template cast<T>();
  const Tensor4<T> x = images.template cast<T>();
  GradcheckReport report;
  for (std::size_t depth = 1; depth <= stack_t.size(); ++depth) {
    GradcheckReport r = gradcheck_cae(stack_t, x, depth, options);
    report.tensors.insert(report.tensors.end(), r.tensors.begin(), r.tensors.end());
  }
  Classifier<T> clf_t = clf.template cast<T>();
  GradcheckReport r = gradcheck_classifier(clf_t, x, labels, options, derive_seed(seed, {1}));
  report.tensors.insert(report.tensors.end(), r.tensors.begin(), r.tensors.end());
  return report;
}

#define ZCAE_INSTANTIATE(T)                                                                      \
  template TensorCheck check_tensor<T>(const std::string&, std::span<T>, std::span<const T>,     \
                                       const std::function<Evaluation()>&,                       \
                                       const GradcheckOptions&, std::uint64_t);                  \
  template GradcheckReport gradcheck_cae(CAEStack<T>&, const Tensor4<T>&, std::size_t,           \
                                         const GradcheckOptions&);                               \
  template GradcheckReport gradcheck_classifier(Classifier<T>&, const Tensor4<T>&,               \
                                                std::span<const int>, const GradcheckOptions&,   \
                                                std::uint64_t);                                  \
  template GradcheckReport gradcheck_network<T>(const NetworkSpec&, std::uint64_t, std::size_t,  \
                                                const GradcheckOptions&, double);

ZCAE_INSTANTIATE(float)
ZCAE_INSTANTIATE(double)

#undef ZCAE_INSTANTIATE

}  // namespace zcae
