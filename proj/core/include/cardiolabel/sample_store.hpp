#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cardiolabel/pcg.hpp"

namespace cardiolabel {

/**
 * Binary store for prepared samples, magic "CLSS". Little-endian layout:
 *   magic | u32 version | i64 count | i64 N | i64 L
 * then per sample: N*L f64 segment values (row-major), 5 label bytes in
 * group order, u32 pad_count, u8 location, u32 id length, id bytes.
 * Values round-trip bitwise; all samples must share one {N, L}.
 */
std::vector<std::uint8_t> serialize_samples(const std::vector<Sample>& samples);

// Throws on bad magic, version, truncation, or trailing bytes.
std::vector<Sample> deserialize_samples(std::span<const std::uint8_t> bytes);

void save_samples(const std::vector<Sample>& samples, const std::string& path);
std::vector<Sample> load_samples(const std::string& path);

}  // namespace cardiolabel
