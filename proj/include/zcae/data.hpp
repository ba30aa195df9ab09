#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zcae/tensor.hpp"

namespace zcae {

// Images are (n, 3, h, w) in [0,1]; standardization happens later.
struct LabeledDataset {
  Tensor4<float> images;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  // Throws InputError when labels and images disagree or a label is >= K.
  void validate() const;
};

struct UnlabeledDataset {
  Tensor4<float> images;
  std::size_t size() const { return images.shape().n; }
};

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kStlImageBytes = 96 * 96 * 3;

// Concatenates CIFAR-10 binary batch files in the given order.
LabeledDataset read_cifar10(const std::vector<std::filesystem::path>& paths);
void write_cifar10(const std::filesystem::path& path, const LabeledDataset& ds);

// STL-10 planes are column-major on disk; loaded row-major.
UnlabeledDataset read_stl10(const std::filesystem::path& images);
LabeledDataset read_stl10(const std::filesystem::path& images, const std::filesystem::path& labels);
void write_stl10(const std::filesystem::path& images, const Tensor4<float>& data,
                 const std::optional<std::filesystem::path>& labels = std::nullopt,
                 const std::vector<int>& label_values = {});

struct SubsetSpec {
  std::size_t samples_per_class = 0;
  std::uint64_t seed = 0;
};

// Exactly samples_per_class examples of every class, without replacement,
// in shuffled order.
LabeledDataset sample_subset(const LabeledDataset& ds, const SubsetSpec& spec);

// Keep only the listed classes, relabeled 0..m-1 in list order.
LabeledDataset select_classes(const LabeledDataset& ds, const std::vector<int>& classes);

LabeledDataset take_first(const LabeledDataset& ds, std::size_t count);

// Index batches of an epoch-seeded permutation; the short final batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::uint64_t epoch);

Tensor4<float> gather_images(const Tensor4<float>& images, const std::vector<std::size_t>& indices);
std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& indices);

enum class SyntheticKind { oriented_bars, gaussian_blobs, constant };

SyntheticKind synthetic_kind_from_string(const std::string& s);

// Deterministic toy images. Labels cycle 0..classes-1. For oriented bars,
// class 0 is row-constant (horizontal bars) and class 1 column-constant.
LabeledDataset make_synthetic(SyntheticKind kind, std::size_t n, const Shape4& image_dims,
                              std::uint64_t seed, std::size_t classes = 2);

}  // namespace zcae
