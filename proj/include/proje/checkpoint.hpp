#pragma once

#include "proje/model.hpp"
#include "proje/types.hpp"

#include <cstdint>
#include <filesystem>

namespace proje {

// Binary parameter file. Little-endian throughout:
//   "PROJE1" (6 bytes), format version u32, 10 reserved bytes,
//   task flag u8 (0 entity, 1 relation), variant flag u8 (0/1/2),
//   n_e u64, n_r u64, k u64,
//   tensors as f64: entity matrix row-major, relation matrix row-major, the
//   four diagonals (tail-entity, tail-relation, head-entity, head-relation),
//   combination bias, projection bias,
//   CRC-32 u32 over all preceding bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointError : Error {
  enum class Kind { Io, BadMagic, BadVersion, BadFlag, Truncated, TrailingData, BadCrc };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

struct CheckpointMeta {
  Task task = Task::Entity;
  Variant variant = Variant::WeightedListwise;
  std::uint32_t format_version = kCheckpointVersion;
};

struct LoadedCheckpoint {
  ModelParams params;
  CheckpointMeta meta;
};

/// Exact file size for given shapes.
std::uint64_t checkpoint_byte_size(std::uint64_t n_entities, std::uint64_t n_relations,
                                   std::uint64_t k);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, Task task,
                     Variant variant);

/// Validates magic, version, flags, exact length and CRC before building any
/// tensor; a bad file never yields partial parameters.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace proje
