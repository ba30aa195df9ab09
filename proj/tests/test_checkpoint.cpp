#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "zcae/checkpoint.hpp"
#include "zcae/error.hpp"
#include "zcae/init.hpp"

using namespace zcae;
namespace fs = std::filesystem;

namespace {

Checkpoint sample(bool with_head) {
  Checkpoint c;
  c.spec = network_preset("cifar10");
  c.spec.conv[0].filters = 8;
  c.spec.conv[1].filters = 12;
  c.spec.conv[2].filters = 16;
  c.spec.hidden = 20;
  c.stack = make_stack<float>(c.spec);
  Rng rng = make_rng(3);
  initialize_stack_random(c.stack, rng);
  c.stack.trained_depth = 2;
  if (with_head) c.head = initialize_head(c.spec.head_fan_in(), 20, 10, 0.5, rng);
  c.state.phase = Phase::finetune;
  c.state.depth = 3;
  c.state.next_epoch = 7;
  c.state.seed = 0xdeadbeefcafeULL;
  c.state.optimizer.hyper = {0.01, 0.9, 1e-5};
  c.state.optimizer.velocities = {{0.5f, -0.25f}, {}, {1e-30f}};
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip is lossless and byte-stable") {
  for (bool head : {false, true}) {
    const Checkpoint c = sample(head);
    const std::vector<std::uint8_t> bytes = serialize_checkpoint(c);
    CHECK(std::memcmp(bytes.data(), "ZCAE", 4) == 0);
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back == c);
    CHECK(serialize_checkpoint(back) == bytes);
  }
}

TEST_CASE("checkpoint files save and load") {
  const fs::path p = fs::temp_directory_path() / "zcae_ckpt_test.zcae";
  const Checkpoint c = sample(true);
  save_checkpoint(p, c);
  const Checkpoint back = load_checkpoint(p);
  CHECK(back == c);
  const fs::path q = fs::temp_directory_path() / "zcae_ckpt_test2.zcae";
  save_checkpoint(q, back);
  std::ifstream a(p, std::ios::binary), b(q, std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
  CHECK(back.classifier().encoders == c.stack.encoders);
  try {
    load_checkpoint(fs::temp_directory_path() / "no_such_checkpoint.zcae");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.reason() == "checkpoint-not-found");
  }
}

TEST_CASE("checkpoint format errors") {
  std::vector<std::uint8_t> bytes = serialize_checkpoint(sample(false));

  std::vector<std::uint8_t> magic = bytes;
  magic[0] = 'X';
  try {
    deserialize_checkpoint(magic);
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
    CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
  }

  std::vector<std::uint8_t> version = bytes;
  version[4] = 2;
  try {
    deserialize_checkpoint(version);
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 4);
    CHECK(std::string(e.what()).find("version 2") != std::string::npos);
  }

  for (std::size_t cut : {std::size_t{3}, std::size_t{6}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(deserialize_checkpoint(t), FormatError);
  }

  std::vector<std::uint8_t> junk = bytes;
  junk.insert(junk.end(), {'J', 'U', 'N', 'K', 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK_THROWS_AS(deserialize_checkpoint(junk), FormatError);
}

TEST_CASE("compatibility check names the first mismatching layer") {
  const NetworkSpec a = network_preset("cifar10");
  CHECK_NOTHROW(require_compatible(a, a));
  NetworkSpec b = a;
  b.conv[1].filters = 100;
  try {
    require_compatible(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.reason() == "checkpoint-incompatible");
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }
  NetworkSpec c = a;
  c.conv.pop_back();
  try {
    require_compatible(a, c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("layer 3") != std::string::npos);
  }
  CHECK_THROWS(require_compatible(a, network_preset("stl10")));
}
