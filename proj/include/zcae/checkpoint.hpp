#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "zcae/layers.hpp"
#include "zcae/network_spec.hpp"
#include "zcae/train.hpp"

namespace zcae {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout: "ZCAE", u32 LE version, then records of
// [4-byte tag][u64 LE length][payload]: SPEC (network text), DPTH (trained
// depth), FILT (one per layer: u32 layer, u32 k,c,kh,kw, f32 LE weights),
// HEAD (optional classifier head), OPTM (SGD hyper + velocities), STAT
// (phase, depth, next epoch, seed).
struct Checkpoint {
  NetworkSpec spec;
  CAEStack<float> stack;
  std::optional<ClassifierHead<float>> head;
  TrainState state;

  Classifier<float> classifier() const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws InputError("checkpoint-incompatible") naming the first mismatching
// layer between two specs.
void require_compatible(const NetworkSpec& checkpoint, const NetworkSpec& expected);

}  // namespace zcae
