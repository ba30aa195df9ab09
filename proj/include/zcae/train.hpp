#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "zcae/augment.hpp"
#include "zcae/data.hpp"
#include "zcae/layers.hpp"
#include "zcae/optim.hpp"

namespace zcae {

// Default probe grid: 1, 0.1, ..., 1e-5 (descending decades).
std::vector<double> default_probe_grid();

struct PhaseConfig {
  std::size_t epochs = 0;
  std::size_t batch_size = 128;
  std::optional<double> learning_rate{};  // unset: probe
  std::size_t probe_epochs = 2;
  std::size_t probe_examples = 0;       // 0: probe on the whole set
  std::vector<double> probe_candidates = default_probe_grid();
  double momentum = 0.9;
  double weight_decay = 1e-5;
};

struct FinetuneOptions {
  AugmentToggles augment;  // A and C
  double dropout = 0.0;    // D: effective hidden-layer dropout
};

struct EpochMetrics {
  std::string phase;
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  bool diverged = false;
};

// Append-only per-epoch history; rows with epoch 0 describe the state
// before the first update of a phase.
class RunMetrics {
 public:
  void append(EpochMetrics row) { rows_.push_back(std::move(row)); }
  const std::vector<EpochMetrics>& rows() const { return rows_; }
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<EpochMetrics> rows_;
};

enum class Phase : std::uint32_t { pretrain = 0, finetune = 1, done = 2 };

// Everything besides weights needed to resume a run bit-exactly.
struct TrainState {
  Phase phase = Phase::pretrain;
  std::size_t depth = 1;       // current pretraining depth (1-based)
  std::size_t next_epoch = 0;  // 0: phase/depth not started yet
  std::uint64_t seed = 0;
  OptimizerState optimizer;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct RunControl {
  std::size_t epoch_budget = std::numeric_limits<std::size_t>::max();  // epochs this call
  bool record_wall_time = false;
  std::function<void(const std::string&)> log;
};

// Greedy layer-wise pretraining on standardized images: for each depth,
// only that layer's filters are optimized against C_depth while all
// shallower layers stay fixed. Resumes from `state`.
void greedy_pretrain(CAEStack<float>& stack, const Tensor4<float>& standardized,
                     const PhaseConfig& config, TrainState& state, RunMetrics& metrics,
                     const RunControl& control = {});

// Supervised training of all encoder and head parameters on cross entropy.
// `train` holds raw [0,1] images; batches are augmented then standardized.
void finetune(Classifier<float>& clf, const LabeledDataset& train,
              const LabeledDataset* validation, const PhaseConfig& config,
              const FinetuneOptions& options, TrainState& state, RunMetrics& metrics,
              const RunControl& control = {});

struct EvalReport {
  double overall = 0.0;
  std::vector<double> per_class;  // NaN for classes without examples
  std::vector<int> predictions;
  double loss = 0.0;
};

EvalReport evaluate_predictions(const std::vector<int>& predictions, const std::vector<int>& labels,
                                std::size_t num_classes);

// Inference-mode accuracy on raw [0,1] images (standardized internally).
EvalReport evaluate(const Classifier<float>& clf, const LabeledDataset& ds,
                    std::size_t batch_size = 256);

// Mean C_depth over a standardized set.
double dataset_cost(const CAEStack<float>& stack, const Tensor4<float>& standardized,
                    std::size_t depth, std::size_t batch_size = 256);

// Outcome of one short probe run; `losses` are per-step values, the first of
// which is taken before any update.
struct ProbeTrace {
  std::vector<double> losses;
  bool diverged = false;
};

inline constexpr double kProbeExplosionFactor = 10.0;

// Largest candidate whose probe stays finite and below 10x its initial loss.
// Candidates must be sorted descending. Throws InputError("no-viable-rate").
double probe_learning_rate(const std::vector<double>& candidates,
                           const std::function<ProbeTrace(double)>& trial);

double probe_cae_learning_rate(const CAEStack<float>& stack, const Tensor4<float>& standardized,
                               std::size_t depth, const PhaseConfig& config, std::uint64_t seed);

double probe_classifier_learning_rate(const Classifier<float>& clf, const LabeledDataset& train,
                                      const PhaseConfig& config, const FinetuneOptions& options,
                                      std::uint64_t seed);

}  // namespace zcae
