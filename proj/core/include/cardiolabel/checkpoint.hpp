#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cardiolabel/network.hpp"
#include "cardiolabel/train.hpp"

namespace cardiolabel {

struct Checkpoint {
  std::uint64_t init_seed = 0;
  std::vector<EpochStats> history;
  EnsembleParams params;  // params.config carries the architecture
};

/**
 * Binary model checkpoint, magic "CLCK". Little-endian layout:
 *   magic | u32 version | u64 fnv1a checksum | u32 meta length | meta JSON |
 *   f64 tensor payloads in EnsembleParams::all() order
 * The checksum covers every byte after itself. The meta JSON holds the
 * config, the init seed, the training history (non-finite values stored as
 * null), and the tensor names with shapes. Serialization is canonical:
 * save(load(bytes)) reproduces bytes exactly.
 */
std::vector<std::uint8_t> serialize_checkpoint(const EnsembleParams& params, std::uint64_t init_seed,
                                               const std::vector<EpochStats>& history);

// Throws on bad magic or version, checksum mismatch, malformed meta, or a
// tensor whose stored shape disagrees with the config-derived one (the
// error names both shapes).
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const EnsembleParams& params, std::uint64_t init_seed,
                     const std::vector<EpochStats>& history);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cardiolabel
