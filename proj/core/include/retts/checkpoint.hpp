#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "retts/config.hpp"
#include "retts/lamb.hpp"
#include "retts/layers.hpp"
#include "retts/model.hpp"

namespace retts {

struct RngRecord {
  std::string stream_id;
  std::uint64_t counter = 0;

  bool operator==(const RngRecord&) const = default;
};

/// Everything needed to resume training bit-exactly.
struct Checkpoint {
  RunConfig config;
  int stage = 1;
  std::uint64_t step = 0;  // completed steps of `stage`
  std::uint64_t seed = 0;
  std::vector<RngRecord> rng;
  ParamList model;
  LambState model_optimizer;
  ParamList discriminator;  // empty before stage 2
  LambState discriminator_optimizer;
};

/// Layout (little-endian):
///   "RTCK" | u16 version | str config | u8 stage | u64 step | u64 seed
///   | u32 n, n x (str id, u64 counter)
///   | params(model) | lamb(model) | u8 has_disc [params(disc) | lamb(disc)]
///   | u64 FNV-1a of everything before it
/// str is u32 length + bytes; params is u32 n, n x (str name, matrix);
/// lamb is u64 step, u32 n, n x (u64 len, len f64 m, len f64 v).
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Throws CompatibilityError if the stored model config differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);
void check_compatible(const ModelConfig& stored, const ModelConfig& expected);

/// Copies values of `source` into the same-named tensors of `target`. Every
/// name and shape is checked before anything is written.
void apply_parameters(const ParamList& source, const ParamList& target);

/// The model stored in a checkpoint.
Model model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace retts
