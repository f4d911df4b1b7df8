#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "singlegan/regimes.hpp"

namespace singlegan {

// On-disk layout:
//   8-byte magic "SGANCKPT"
//   u32 format version (little-endian)
//   u64 manifest length, then the manifest as compact JSON
//   tensor blobs, f32 little-endian, in manifest order
// The manifest holds the regime config, step, rng state, optimizer step
// counts, and {name, dtype, shape, offset} for every tensor.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t version = kFormatVersion;
  RegimeConfig config;
  std::int64_t step = 0;
  std::string rng_state;
  // Optimizer step counters keyed by network ("G", "E", "D.<domain>").
  std::map<std::string, std::int64_t> optimizer_steps;
  // Parameters under their network names; Adam moments as
  // "adam.<net>.m.<param>" and "adam.<net>.v.<param>".
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

Checkpoint make_checkpoint(const TrainState& state);
TrainState restore_train_state(const Checkpoint& ckpt);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
// Throws DataError on bad magic, truncation, or an unsupported version.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace singlegan
