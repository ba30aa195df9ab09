#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "zcae/data.hpp"
#include "zcae/error.hpp"

using namespace zcae;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "zcae_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

LabeledDataset balanced(std::size_t per_class, std::size_t classes) {
  LabeledDataset ds{Tensor4<float>(Shape4{per_class * classes, 1, 2, 2}), {}, classes};
  for (std::size_t i = 0; i < per_class * classes; ++i) {
    ds.labels.push_back(static_cast<int>(i % classes));
    for (std::size_t j = 0; j < 4; ++j) ds.images[i * 4 + j] = static_cast<float>(i);
  }
  return ds;
}

}  // namespace

TEST_CASE("cifar-10 records: label byte then 3072 channel-major pixels") {
  std::vector<unsigned char> bytes;
  for (unsigned char label : {3, 7}) {
    bytes.push_back(label);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < 1024; ++j) bytes.push_back(static_cast<unsigned char>(label * 10 + c));
  }
  bytes[1 + 1024 + 33] = 255;  // image 0, green, row 1, col 1
  const fs::path p = scratch("two.bin");
  write_bytes(p, bytes);
  const LabeledDataset ds = read_cifar10({p});
  CHECK(ds.size() == 2);
  CHECK(ds.labels == std::vector<int>{3, 7});
  CHECK(ds.images(0, 0, 5, 5) == 30.0f / 255.0f);
  CHECK(ds.images(1, 2, 31, 31) == 72.0f / 255.0f);
  CHECK(ds.images(0, 1, 1, 1) == 1.0f);

  const fs::path q = scratch("two_copy.bin");
  write_cifar10(q, ds);
  CHECK(read_bytes(q) == bytes);

  const LabeledDataset twice = read_cifar10({p, p});
  CHECK(twice.size() == 4);
  CHECK(twice.labels[2] == 3);
}

TEST_CASE("cifar-10 empty file is an empty dataset") {
  const fs::path p = scratch("empty.bin");
  write_bytes(p, {});
  CHECK(read_cifar10({p}).size() == 0);
}

TEST_CASE("cifar-10 format errors carry offsets") {
  const fs::path p = scratch("short.bin");
  write_bytes(p, std::vector<unsigned char>(kCifarRecordBytes + 10, 1));
  try {
    read_cifar10({p});
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == kCifarRecordBytes);
  }
  std::vector<unsigned char> bad(2 * kCifarRecordBytes, 0);
  bad[kCifarRecordBytes] = 10;
  write_bytes(p, bad);
  try {
    read_cifar10({p});
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == kCifarRecordBytes);
  }
  try {
    read_cifar10({scratch("does_not_exist.bin")});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.reason() == "dataset-not-found");
  }
}

TEST_CASE("stl-10 planes are column-major and labels are 1-based") {
  std::vector<unsigned char> img(kStlImageBytes, 0);
  img[0 * 9216 + 5 * 96 + 2] = 200;   // red, col 5, row 2
  img[2 * 9216 + 95 * 96 + 0] = 51;   // blue, col 95, row 0
  const fs::path p = scratch("stl_x.bin"), l = scratch("stl_y.bin");
  write_bytes(p, img);
  write_bytes(l, {10});
  const LabeledDataset ds = read_stl10(p, l);
  CHECK(ds.size() == 1);
  CHECK(ds.labels[0] == 9);
  CHECK(ds.images(0, 0, 2, 5) == 200.0f / 255.0f);
  CHECK(ds.images(0, 2, 0, 95) == 51.0f / 255.0f);
  CHECK(ds.images(0, 0, 5, 2) == 0.0f);

  const fs::path p2 = scratch("stl_x2.bin"), l2 = scratch("stl_y2.bin");
  write_stl10(p2, ds.images, l2, ds.labels);
  CHECK(read_bytes(p2) == img);
  CHECK(read_bytes(l2) == std::vector<unsigned char>{10});

  write_bytes(l, {0});
  CHECK_THROWS_AS(read_stl10(p, l), FormatError);
  write_bytes(l, {1, 2});
  CHECK_THROWS_AS(read_stl10(p, l), FormatError);
  CHECK(read_stl10(p).size() == 1);
}

TEST_CASE("subset sampling is balanced, without replacement, and seeded") {
  const LabeledDataset ds = balanced(20, 3);
  const LabeledDataset s = sample_subset(ds, {5, 1});
  CHECK(s.size() == 15);
  std::vector<int> count(3);
  std::set<float> seen;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ++count[static_cast<std::size_t>(s.labels[i])];
    CHECK(static_cast<int>(s.images[i * 4]) % 3 == s.labels[i]);
    seen.insert(s.images[i * 4]);
  }
  CHECK(count == std::vector<int>{5, 5, 5});
  CHECK(seen.size() == 15);
  CHECK(sample_subset(ds, {5, 1}).images == s.images);
  CHECK(!(sample_subset(ds, {5, 2}).images == s.images));
  try {
    sample_subset(ds, {21, 1});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.reason() == "subset-insufficient");
  }
}

TEST_CASE("select_classes relabels in list order") {
  const LabeledDataset ds = balanced(4, 5);
  const LabeledDataset two = select_classes(ds, {3, 1});
  CHECK(two.num_classes == 2);
  CHECK(two.size() == 8);
  for (std::size_t i = 0; i < two.size(); ++i) {
    const int original = static_cast<int>(two.images[i * 4]) % 5;
    CHECK(two.labels[i] == (original == 3 ? 0 : 1));
  }
}

TEST_CASE("batches cover a permutation and keep the short tail") {
  const auto b = make_batches(10, 4, 7, 0);
  REQUIRE(b.size() == 3);
  CHECK(b[2].size() == 2);
  std::set<std::size_t> all;
  for (const auto& x : b) all.insert(x.begin(), x.end());
  CHECK(all.size() == 10);
  CHECK(make_batches(10, 4, 7, 0) == b);
  CHECK(make_batches(10, 4, 7, 1) != b);
  CHECK(make_batches(0, 4, 7, 0).empty());
  CHECK_THROWS(make_batches(10, 0, 7, 0));
}

TEST_CASE("synthetic bars: class 0 row-constant, class 1 column-constant") {
  const LabeledDataset ds = make_synthetic(SyntheticKind::oriented_bars, 6, Shape4{1, 3, 12, 12}, 4);
  CHECK(ds.labels == std::vector<int>{0, 1, 0, 1, 0, 1});
  for (std::size_t i = 0; i < 6; ++i) {
    bool rows_const = true, cols_const = true, varies = false;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 12; ++y)
        for (std::size_t x = 0; x < 12; ++x) {
          rows_const = rows_const && ds.images(i, c, y, x) == ds.images(i, c, y, 0);
          cols_const = cols_const && ds.images(i, c, y, x) == ds.images(i, c, 0, x);
          varies = varies || ds.images(i, c, y, x) != ds.images(i, 0, 0, 0);
          CHECK(ds.images(i, c, y, x) >= 0.0f);
          CHECK(ds.images(i, c, y, x) <= 1.0f);
        }
    CHECK(varies);
    CHECK(rows_const == (ds.labels[i] == 0));
    CHECK(cols_const == (ds.labels[i] == 1));
  }
  CHECK(make_synthetic(SyntheticKind::oriented_bars, 6, Shape4{1, 3, 12, 12}, 4).images == ds.images);
  CHECK_THROWS(make_synthetic(SyntheticKind::oriented_bars, 6, Shape4{1, 3, 12, 12}, 4, 3));
}

TEST_CASE("synthetic constant and blobs") {
  const LabeledDataset c = make_synthetic(SyntheticKind::constant, 3, Shape4{1, 2, 4, 4}, 1, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 32; ++j) CHECK(c.images[i * 32 + j] == c.images[i * 32]);
  const LabeledDataset b = make_synthetic(SyntheticKind::gaussian_blobs, 4, Shape4{1, 1, 16, 16}, 1, 4);
  CHECK(b.labels == std::vector<int>{0, 1, 2, 3});
  CHECK(synthetic_kind_from_string("gaussian-blobs") == SyntheticKind::gaussian_blobs);
  CHECK_THROWS_AS(synthetic_kind_from_string("stripes"), ConfigError);
}

TEST_CASE("dataset validation") {
  LabeledDataset ds = balanced(2, 2);
  CHECK_NOTHROW(ds.validate());
  ds.labels[0] = 2;
  CHECK_THROWS_AS(ds.validate(), InputError);
  ds.labels.pop_back();
  CHECK_THROWS_AS(ds.validate(), InputError);
}
