#include "zcae/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>

#include "zcae/error.hpp"
#include "zcae/rng.hpp"

namespace zcae {
namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("dataset-not-found", "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output-not-writable", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

unsigned char to_byte(float x) {
  return static_cast<unsigned char>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void LabeledDataset::validate() const {
  if (images.shape().n != labels.size()) {
    throw InputError("dataset-invalid", std::to_string(labels.size()) + " labels for " +
                                            std::to_string(images.shape().n) + " images");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw InputError("dataset-invalid", "label " + std::to_string(l) + " outside 0.." +
                                              std::to_string(num_classes - 1));
    }
  }
}

LabeledDataset read_cifar10(const std::vector<std::filesystem::path>& paths) {
  std::vector<unsigned char> all;
  for (const auto& p : paths) {
    std::vector<unsigned char> bytes = read_file(p);
    if (bytes.size() % kCifarRecordBytes != 0) {
      throw FormatError(p.string() + ": size " + std::to_string(bytes.size()) +
                            " is not a multiple of " + std::to_string(kCifarRecordBytes),
                        bytes.size() - bytes.size() % kCifarRecordBytes);
    }
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  const std::size_t n = all.size() / kCifarRecordBytes;
  LabeledDataset ds{Tensor4<float>(Shape4{n, 3, 32, 32}), std::vector<int>(n), 10};
  float* dst = ds.images.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = all.data() + i * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw FormatError("CIFAR-10 label byte " + std::to_string(rec[0]) + " > 9",
                        i * kCifarRecordBytes);
    }
    ds.labels[i] = rec[0];
    for (std::size_t j = 0; j < kCifarRecordBytes - 1; ++j)
      dst[i * 3072 + j] = static_cast<float>(rec[1 + j]) / 255.0f;
  }
  return ds;
}

void write_cifar10(const std::filesystem::path& path, const LabeledDataset& ds) {
  const Shape4& s = ds.images.shape();
  if (s.c != 3 || s.h != 32 || s.w != 32) throw ShapeError("CIFAR-10 records are 3x32x32");
  ds.validate();
  std::vector<unsigned char> bytes;
  bytes.reserve(s.n * kCifarRecordBytes);
  for (std::size_t i = 0; i < s.n; ++i) {
    bytes.push_back(static_cast<unsigned char>(ds.labels[i]));
    for (std::size_t j = 0; j < 3072; ++j) bytes.push_back(to_byte(ds.images[i * 3072 + j]));
  }
  write_file(path, bytes);
}

UnlabeledDataset read_stl10(const std::filesystem::path& images) {
  const std::vector<unsigned char> bytes = read_file(images);
  if (bytes.size() % kStlImageBytes != 0) {
    throw FormatError(images.string() + ": size " + std::to_string(bytes.size()) +
                          " is not a multiple of " + std::to_string(kStlImageBytes),
                      bytes.size() - bytes.size() % kStlImageBytes);
  }
  const std::size_t n = bytes.size() / kStlImageBytes;
  UnlabeledDataset ds{Tensor4<float>(Shape4{n, 3, 96, 96})};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const unsigned char* plane = bytes.data() + i * kStlImageBytes + c * 96 * 96;
      for (std::size_t col = 0; col < 96; ++col)
        for (std::size_t row = 0; row < 96; ++row)
          ds.images(i, c, row, col) = static_cast<float>(plane[col * 96 + row]) / 255.0f;
    }
  return ds;
}

LabeledDataset read_stl10(const std::filesystem::path& images, const std::filesystem::path& labels) {
  UnlabeledDataset raw = read_stl10(images);
  const std::vector<unsigned char> lb = read_file(labels);
  if (lb.size() != raw.size()) {
    throw FormatError(labels.string() + ": " + std::to_string(lb.size()) + " labels for " +
                          std::to_string(raw.size()) + " images",
                      std::min(lb.size(), raw.size()));
  }
  LabeledDataset ds{std::move(raw.images), std::vector<int>(lb.size()), 10};
  for (std::size_t i = 0; i < lb.size(); ++i) {
    if (lb[i] < 1 || lb[i] > 10) {
      throw FormatError("STL-10 label " + std::to_string(lb[i]) + " outside 1..10", i);
    }
    ds.labels[i] = lb[i] - 1;
  }
  return ds;
}

void write_stl10(const std::filesystem::path& images, const Tensor4<float>& data,
                 const std::optional<std::filesystem::path>& labels,
                 const std::vector<int>& label_values) {
  const Shape4& s = data.shape();
  if (s.c != 3 || s.h != 96 || s.w != 96) throw ShapeError("STL-10 images are 3x96x96");
  std::vector<unsigned char> bytes(s.n * kStlImageBytes);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t col = 0; col < 96; ++col)
        for (std::size_t row = 0; row < 96; ++row)
          bytes[i * kStlImageBytes + c * 9216 + col * 96 + row] = to_byte(data(i, c, row, col));
  write_file(images, bytes);
  if (labels) {
    if (label_values.size() != s.n) throw ShapeError("write_stl10: label count mismatch");
    std::vector<unsigned char> lb;
    for (int l : label_values) lb.push_back(static_cast<unsigned char>(l + 1));
    write_file(*labels, lb);
  }
}

LabeledDataset sample_subset(const LabeledDataset& ds, const SubsetSpec& spec) {
  ds.validate();
  if (spec.samples_per_class < 1) throw InputError("subset-invalid", "samples_per_class must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  Rng rng = make_rng(spec.seed, {key(Stream::subset)});
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < ds.num_classes; ++k) {
    auto& idx = by_class[k];
    if (idx.size() < spec.samples_per_class) {
      throw InputError("subset-insufficient", "class " + std::to_string(k) + " has " +
                                                  std::to_string(idx.size()) + " examples, need " +
                                                  std::to_string(spec.samples_per_class));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    chosen.insert(chosen.end(), idx.begin(),
                  idx.begin() + static_cast<std::ptrdiff_t>(spec.samples_per_class));
  }
  std::shuffle(chosen.begin(), chosen.end(), rng);
  return {gather_images(ds.images, chosen), gather_labels(ds.labels, chosen), ds.num_classes};
}

LabeledDataset select_classes(const LabeledDataset& ds, const std::vector<int>& classes) {
  std::map<int, int> remap;
  for (std::size_t i = 0; i < classes.size(); ++i) remap[classes[i]] = static_cast<int>(i);
  std::vector<std::size_t> keep;
  std::vector<int> labels;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto it = remap.find(ds.labels[i]);
    if (it == remap.end()) continue;
    keep.push_back(i);
    labels.push_back(it->second);
  }
  return {gather_images(ds.images, keep), std::move(labels), classes.size()};
}

LabeledDataset take_first(const LabeledDataset& ds, std::size_t count) {
  std::vector<std::size_t> idx(std::min(count, ds.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return {gather_images(ds.images, idx), gather_labels(ds.labels, idx), ds.num_classes};
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw InputError("batch-size", "batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, {key(Stream::shuffle), epoch});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Tensor4<float> gather_images(const Tensor4<float>& images, const std::vector<std::size_t>& indices) {
  Shape4 s = images.shape();
  const std::size_t per = s.image_size();
  s.n = indices.size();
  Tensor4<float> out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= images.shape().n) throw ShapeError("gather_images: index out of range");
    std::copy_n(images.data().begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "oriented-bars") return SyntheticKind::oriented_bars;
  if (s == "gaussian-blobs") return SyntheticKind::gaussian_blobs;
  if (s == "constant") return SyntheticKind::constant;
  throw ConfigError("unknown synthetic kind '" + s + "'");
}

LabeledDataset make_synthetic(SyntheticKind kind, std::size_t n, const Shape4& dims,
                              std::uint64_t seed, std::size_t classes) {
  if (classes < 1) throw InputError("synthetic", "classes must be >= 1");
  if (kind == SyntheticKind::oriented_bars && classes != 2) {
    throw InputError("synthetic", "oriented-bars has exactly two classes");
  }
  const Shape4 shape{n, dims.c, dims.h, dims.w};
  LabeledDataset ds{Tensor4<float>(shape), std::vector<int>(n), classes};
  Rng rng = make_rng(seed, {key(Stream::synthetic)});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    ds.labels[i] = label;
    switch (kind) {
      case SyntheticKind::constant: {
        const float v = static_cast<float>(unit(rng));
        for (std::size_t j = 0; j < shape.image_size(); ++j) ds.images[i * shape.image_size() + j] = v;
        break;
      }
      case SyntheticKind::oriented_bars: {
        const double period = 3.0 + 3.0 * unit(rng);
        const double phase = two_pi * unit(rng);
        const double amp = 0.2 + 0.25 * unit(rng);
        for (std::size_t c = 0; c < shape.c; ++c)
          for (std::size_t y = 0; y < shape.h; ++y)
            for (std::size_t x = 0; x < shape.w; ++x) {
              const double t = static_cast<double>(label == 0 ? y : x);
              ds.images(i, c, y, x) = static_cast<float>(0.5 + amp * std::sin(two_pi * t / period + phase));
            }
        break;
      }
      case SyntheticKind::gaussian_blobs: {
        const double angle = two_pi * static_cast<double>(label) / static_cast<double>(classes);
        const double radius = 0.25 * static_cast<double>(std::min(shape.h, shape.w));
        const double cy = 0.5 * static_cast<double>(shape.h - 1) + radius * std::sin(angle) +
                          (unit(rng) - 0.5);
        const double cx = 0.5 * static_cast<double>(shape.w - 1) + radius * std::cos(angle) +
                          (unit(rng) - 0.5);
        const double sigma = static_cast<double>(std::min(shape.h, shape.w)) / 6.0;
        const double gain = 0.5 + 0.5 * unit(rng);
        for (std::size_t c = 0; c < shape.c; ++c)
          for (std::size_t y = 0; y < shape.h; ++y)
            for (std::size_t x = 0; x < shape.w; ++x) {
              const double d2 = (static_cast<double>(y) - cy) * (static_cast<double>(y) - cy) +
                                (static_cast<double>(x) - cx) * (static_cast<double>(x) - cx);
              ds.images(i, c, y, x) = static_cast<float>(gain * std::exp(-d2 / (2.0 * sigma * sigma)));
            }
        break;
      }
    }
  }
  return ds;
}

}  // namespace zcae
