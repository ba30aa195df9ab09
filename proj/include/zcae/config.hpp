#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zcae/augment.hpp"
#include "zcae/data.hpp"
#include "zcae/network_spec.hpp"
#include "zcae/train.hpp"

namespace zcae {

struct SyntheticConfig {
  SyntheticKind kind = SyntheticKind::oriented_bars;
  std::size_t train = 0, test = 0, unlabeled = 0;
  std::size_t classes = 2;
};

struct DataConfig {
  std::string format = "synthetic";  // cifar10 | stl10 | synthetic
  // cifar10: batch files. stl10: {images, labels} for train/test, {images}
  // for unlabeled.
  std::vector<std::filesystem::path> train, test, unlabeled;
  std::vector<int> classes;           // empty: all
  std::size_t samples_per_class = 0;  // 0: the whole labeled set
  std::size_t unlabeled_count = 0;    // 0: every unlabeled image
  SyntheticConfig synthetic;
};

// Experiment file (JSON). Sections: network, data, pretrain, finetune,
// augment, seeds, plus an optional output directory. Unknown keys are errors.
struct ExperimentConfig {
  std::string network_name;  // preset name or "inline"
  NetworkSpec network;
  DataConfig data;
  PhaseConfig pretrain{.epochs = 50};
  PhaseConfig finetune{.epochs = 100};
  AugmentToggles augment;    // A and C
  bool dropout_on = false;   // D
  double dropout = 0.5;
  bool unsupervised = true;  // U
  std::optional<std::filesystem::path> init;  // finetune init checkpoint
  std::uint64_t seed = 0;
  std::uint64_t subset_seed = 0;
  std::optional<std::filesystem::path> output;

  FinetuneOptions finetune_options() const { return {augment, dropout_on ? dropout : 0.0}; }
  // Throws InputError("dataset-not-found") for any missing referenced file.
  void validate_paths() const;
};

// Relative paths are resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct ExperimentData {
  Tensor4<float> unlabeled;  // raw [0,1]
  LabeledDataset train;
  std::optional<LabeledDataset> test;
};

// Loads, filters and subsamples the configured data. The unlabeled pool is
// the configured unlabeled files, or the train images when none are given.
ExperimentData load_experiment_data(const ExperimentConfig& config, bool want_unlabeled,
                                    bool want_labeled);

}  // namespace zcae
