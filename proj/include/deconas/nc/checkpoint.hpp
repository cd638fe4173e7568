#pragma once

// Versioned binary container of named float64 tensors with Adam state.
//
// Layout (all integers little-endian):
//   "DCNASCKP" | u32 version | u32 meta_len | meta (JSON text) | u32 count
//   per entry: u32 name_len | name | u8 dtype (1 = float64) | u32 rank |
//              u64 dims[rank] | u64 numel | f64 values[numel] |
//              u8 has_adam [| i64 step | f64 m[numel] | f64 v[numel]]
// A JSON manifest listing the entries is written next to it as <path>.json.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "deconas/nc/param_store.hpp"

namespace deconas::nc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
  bool has_adam = false;
  AdamState adam;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<CheckpointEntry> entries;
};

Checkpoint snapshot(const ParamStore& store, nlohmann::json meta);

/// Writes the container and its manifest. The manifest carries a creation
/// timestamp unless `deterministic` is set.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint,
                     bool deterministic = false);
/// Throws CheckpointError on a missing file or malformed content.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values (and Adam state) into a store with identical names and
/// shapes. Throws CheckpointError on any mismatch.
void restore(ParamStore& store, const Checkpoint& checkpoint);

nlohmann::json manifest_json(const Checkpoint& checkpoint);

}  // namespace deconas::nc
