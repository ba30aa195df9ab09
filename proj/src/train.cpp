#include "zcae/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "zcae/error.hpp"

namespace zcae {
namespace {

constexpr std::uint64_t kFinetuneShuffleKey = 100;
constexpr std::uint64_t kFinetuneAugmentKey = 101;

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

void log(const RunControl& control, const std::string& line) {
  if (control.log) control.log(line);
}

std::string pretrain_phase_name(std::size_t depth) { return "pretrain-" + std::to_string(depth); }

std::uint64_t depth_seed(std::uint64_t seed, std::size_t depth) { return derive_seed(seed, {depth}); }

Tensor4<float> probe_slice(const Tensor4<float>& images, std::size_t limit) {
  if (limit == 0 || limit >= images.shape().n) return images;
  std::vector<std::size_t> idx(limit);
  for (std::size_t i = 0; i < limit; ++i) idx[i] = i;
  return gather_images(images, idx);
}

SgdHyper hyper_for(const PhaseConfig& config, double lr) {
  return {lr, config.momentum, config.weight_decay};
}

// One pretraining epoch; returns the mean minibatch cost or nullopt on divergence.
template <typename OnStep>
std::optional<double> pretrain_epoch(CAEStack<float>& stack, const Tensor4<float>& data,
                                     std::size_t depth, std::size_t batch_size, std::uint64_t seed,
                                     std::size_t epoch, OptimizerState& opt, OnStep&& on_step) {
  const auto batches = make_batches(data.shape().n, batch_size, depth_seed(seed, depth), epoch);
  double total = 0.0;
  std::size_t seen = 0;
  for (const auto& idx : batches) {
    const Tensor4<float> x = gather_images(data, idx);
    CaeGradient<float> g = cae_cost_and_grads(stack, x, depth);
    if (!std::isfinite(g.cost)) return std::nullopt;
    if (!on_step(g.cost)) return std::nullopt;
    std::vector<std::span<float>> params{stack.encoders[depth - 1].filters().data()};
    std::vector<std::span<const float>> grads{std::span<const float>(g.filters.data())};
    if (!sgd_step(params, grads, opt)) return std::nullopt;
    total += g.cost * static_cast<double>(idx.size());
    seen += idx.size();
  }
  return seen == 0 ? 0.0 : total / static_cast<double>(seen);
}

struct FinetuneBatchResult {
  double loss = 0.0;
  bool ok = true;
};

FinetuneBatchResult finetune_step(Classifier<float>& clf, const LabeledDataset& train,
                                  const std::vector<std::size_t>& idx, const FinetuneOptions& options,
                                  std::uint64_t seed, std::size_t epoch, std::size_t batch_index,
                                  OptimizerState& opt) {
  Tensor4<float> x = gather_images(train.images, idx);
  const std::vector<int> labels = gather_labels(train.labels, idx);
  prepare_batch(x, options.augment, derive_seed(seed, {kFinetuneAugmentKey}), epoch, batch_index);
  Rng dropout_rng = make_rng(seed, {key(Stream::dropout), epoch, batch_index});
  const ClassifierTrace<float> trace = classifier_forward(clf, x, /*train_mode=*/true, &dropout_rng);
  const CrossEntropy<float> ce = cross_entropy_and_grads(trace.probs, labels);
  if (!std::isfinite(ce.loss)) return {ce.loss, false};
  const ClassifierGrads<float> grads = classifier_backward(clf, trace, ce.grad_logits);
  const bool ok = sgd_step(parameter_spans(clf), gradient_spans(grads), opt);
  return {ce.loss, ok};
}

void check_labels(const Classifier<float>& clf, const LabeledDataset& ds) {
  ds.validate();
  if (ds.num_classes != clf.head.output.out) {
    throw InputError("class-count-mismatch", "dataset has " + std::to_string(ds.num_classes) +
                                                 " classes, classifier outputs " +
                                                 std::to_string(clf.head.output.out));
  }
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream s;
  s << std::setprecision(9) << x;
  return s.str();
}

}  // namespace

std::vector<double> default_probe_grid() { return {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5}; }

std::string RunMetrics::to_csv() const {
  std::ostringstream out;
  out << "phase,epoch,loss,accuracy,seconds,diverged\n";
  for (const auto& r : rows_) {
    out << r.phase << ',' << r.epoch << ',' << fmt(r.loss) << ',' << fmt(r.accuracy) << ','
        << std::fixed << std::setprecision(3) << r.seconds << std::defaultfloat << ','
        << (r.diverged ? 1 : 0) << '\n';
  }
  return out.str();
}

void RunMetrics::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output-not-writable", "cannot write " + path.string());
  out << to_csv();
}

double dataset_cost(const CAEStack<float>& stack, const Tensor4<float>& data, std::size_t depth,
                    std::size_t batch_size) {
  const std::size_t n = data.shape().n;
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
    total += cae_cost(stack, gather_images(data, idx), depth) * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(n);
}

double probe_learning_rate(const std::vector<double>& candidates,
                           const std::function<ProbeTrace(double)>& trial) {
  if (!std::is_sorted(candidates.begin(), candidates.end(), std::greater<>())) {
    throw InputError("probe-grid", "learning-rate candidates must be sorted descending");
  }
  for (double lr : candidates) {
    const ProbeTrace t = trial(lr);
    if (t.diverged || t.losses.empty()) continue;
    const double initial = t.losses.front();
    const bool stable = std::all_of(t.losses.begin(), t.losses.end(), [&](double l) {
      return std::isfinite(l) && l < kProbeExplosionFactor * initial;
    });
    if (stable) return lr;
  }
  throw InputError("no-viable-rate", "every learning-rate candidate diverged during the probe");
}

double probe_cae_learning_rate(const CAEStack<float>& stack, const Tensor4<float>& data,
                               std::size_t depth, const PhaseConfig& config, std::uint64_t seed) {
  const Tensor4<float> subset = probe_slice(data, config.probe_examples);
  return probe_learning_rate(config.probe_candidates, [&](double lr) {
    CAEStack<float> trial = stack;
    OptimizerState opt{hyper_for(config, lr), {}};
    ProbeTrace trace;
    for (std::size_t e = 0; e < config.probe_epochs && !trace.diverged; ++e) {
      auto step = [&](double cost) {
        trace.losses.push_back(cost);
        return cost < kProbeExplosionFactor * trace.losses.front();
      };
      if (!pretrain_epoch(trial, subset, depth, config.batch_size, seed, e, opt, step)) {
        trace.diverged = true;
      }
    }
    return trace;
  });
}

double probe_classifier_learning_rate(const Classifier<float>& clf, const LabeledDataset& train,
                                      const PhaseConfig& config, const FinetuneOptions& options,
                                      std::uint64_t seed) {
  check_labels(clf, train);
  const LabeledDataset subset =
      config.probe_examples == 0 ? train : take_first(train, config.probe_examples);
  return probe_learning_rate(config.probe_candidates, [&](double lr) {
    Classifier<float> trial = clf;
    OptimizerState opt{hyper_for(config, lr), {}};
    ProbeTrace trace;
    for (std::size_t e = 0; e < config.probe_epochs && !trace.diverged; ++e) {
      const auto batches = make_batches(subset.size(), config.batch_size,
                                        derive_seed(seed, {kFinetuneShuffleKey}), e);
      for (std::size_t b = 0; b < batches.size(); ++b) {
        const FinetuneBatchResult r = finetune_step(trial, subset, batches[b], options, seed, e, b, opt);
        trace.losses.push_back(r.loss);
        if (!r.ok || !(r.loss < kProbeExplosionFactor * trace.losses.front())) {
          trace.diverged = true;
          break;
        }
      }
    }
    return trace;
  });
}

void greedy_pretrain(CAEStack<float>& stack, const Tensor4<float>& data, const PhaseConfig& config,
                     TrainState& state, RunMetrics& metrics, const RunControl& control) {
  if (state.phase != Phase::pretrain) return;
  std::size_t budget = control.epoch_budget;
  while (state.depth <= stack.size()) {
    if (budget == 0 && state.next_epoch < config.epochs) return;
    const std::size_t depth = state.depth;
    const std::string phase = pretrain_phase_name(depth);
    if (state.next_epoch == 0) {
      double lr = config.learning_rate.value_or(0.0);
      if (!config.learning_rate && config.epochs > 0) {
        lr = probe_cae_learning_rate(stack, data, depth, config, state.seed);
        log(control, phase + ": probed learning rate " + fmt(lr));
      }
      state.optimizer = OptimizerState{hyper_for(config, lr), {}};
      metrics.append({phase, 0, dataset_cost(stack, data, depth), std::nan(""), 0.0, false});
    }
    while (state.next_epoch < config.epochs) {
      if (budget == 0) return;
      const std::size_t epoch = state.next_epoch;
      Stopwatch clock(control.record_wall_time);
      const auto loss = pretrain_epoch(stack, data, depth, config.batch_size, state.seed, epoch,
                                       state.optimizer, [](double) { return true; });
      if (!loss) {
        metrics.append({phase, epoch + 1, std::nan(""), std::nan(""), clock.seconds(), true});
        throw DivergenceError(phase, epoch + 1, state.optimizer.hyper.learning_rate);
      }
      metrics.append({phase, epoch + 1, *loss, std::nan(""), clock.seconds(), false});
      log(control, phase + " epoch " + std::to_string(epoch + 1) + " loss " + fmt(*loss));
      state.next_epoch = epoch + 1;
      --budget;
    }
    stack.trained_depth = depth;
    state.depth = depth + 1;
    state.next_epoch = 0;
    state.optimizer = {};
  }
  state.phase = Phase::finetune;
  state.depth = stack.size();
}

EvalReport evaluate_predictions(const std::vector<int>& predictions, const std::vector<int>& labels,
                                std::size_t num_classes) {
  if (predictions.size() != labels.size()) throw ShapeError("prediction/label count mismatch");
  EvalReport r;
  r.predictions = predictions;
  std::vector<std::size_t> correct(num_classes, 0), count(num_classes, 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    ++count.at(l);
    if (predictions[i] == labels[i]) {
      ++correct[l];
      ++hits;
    }
  }
  r.overall = labels.empty() ? std::nan("") : static_cast<double>(hits) / static_cast<double>(labels.size());
  for (std::size_t k = 0; k < num_classes; ++k) {
    r.per_class.push_back(count[k] == 0 ? std::nan("")
                                        : static_cast<double>(correct[k]) / static_cast<double>(count[k]));
  }
  return r;
}

EvalReport evaluate(const Classifier<float>& clf, const LabeledDataset& ds, std::size_t batch_size) {
  check_labels(clf, ds);
  std::vector<int> predictions;
  predictions.reserve(ds.size());
  double loss = 0.0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) idx.push_back(i);
    Tensor4<float> x = gather_images(ds.images, idx);
    standardize_all(x);
    const ClassifierTrace<float> t = classifier_forward(clf, x, /*train_mode=*/false);
    const std::vector<int> labels = gather_labels(ds.labels, idx);
    loss += cross_entropy_and_grads(t.probs, labels).loss * static_cast<double>(idx.size());
    const std::vector<int> p = argmax_rows(t.probs);
    predictions.insert(predictions.end(), p.begin(), p.end());
  }
  EvalReport r = evaluate_predictions(predictions, ds.labels, ds.num_classes);
  r.loss = ds.size() == 0 ? 0.0 : loss / static_cast<double>(ds.size());
  return r;
}

void finetune(Classifier<float>& clf, const LabeledDataset& train, const LabeledDataset* validation,
              const PhaseConfig& config, const FinetuneOptions& options, TrainState& state,
              RunMetrics& metrics, const RunControl& control) {
  check_labels(clf, train);
  if (validation) check_labels(clf, *validation);
  if (state.phase == Phase::done) return;
  state.phase = Phase::finetune;
  clf.head.dropout = options.dropout;
  const LabeledDataset& scored = validation ? *validation : train;
  std::size_t budget = control.epoch_budget;
  if (budget == 0 && state.next_epoch < config.epochs) return;
  if (state.next_epoch == 0) {
    double lr = config.learning_rate.value_or(0.0);
    if (!config.learning_rate && config.epochs > 0) {
      lr = probe_classifier_learning_rate(clf, train, config, options, state.seed);
      log(control, "finetune: probed learning rate " + fmt(lr));
    }
    state.optimizer = OptimizerState{hyper_for(config, lr), {}};
    const EvalReport initial = evaluate(clf, train);
    const double acc = validation ? evaluate(clf, *validation).overall : initial.overall;
    metrics.append({"finetune", 0, initial.loss, acc, 0.0, false});
  }
  while (state.next_epoch < config.epochs) {
    if (budget == 0) return;
    const std::size_t epoch = state.next_epoch;
    Stopwatch clock(control.record_wall_time);
    const auto batches =
        make_batches(train.size(), config.batch_size, derive_seed(state.seed, {kFinetuneShuffleKey}), epoch);
    double total = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const FinetuneBatchResult r =
          finetune_step(clf, train, batches[b], options, state.seed, epoch, b, state.optimizer);
      if (!r.ok) {
        metrics.append({"finetune", epoch + 1, std::nan(""), std::nan(""), clock.seconds(), true});
        throw DivergenceError("finetune", epoch + 1, state.optimizer.hyper.learning_rate);
      }
      total += r.loss * static_cast<double>(batches[b].size());
    }
    const double loss = train.size() == 0 ? 0.0 : total / static_cast<double>(train.size());
    const double acc = evaluate(clf, scored).overall;
    metrics.append({"finetune", epoch + 1, loss, acc, clock.seconds(), false});
    log(control, "finetune epoch " + std::to_string(epoch + 1) + " loss " + fmt(loss) +
                     " accuracy " + fmt(acc));
    state.next_epoch = epoch + 1;
    --budget;
  }
  state.phase = Phase::done;
}

}  // namespace zcae
