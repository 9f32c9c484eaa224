#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cardiolabel {

struct WavData {
  int sample_rate_hz = 0;
  std::vector<double> samples;  // PCM16 scaled by 1/32768 into [-1, 1)
};

// Parses a RIFF/WAVE container holding single-channel 16-bit signed
// little-endian PCM. Unknown chunks are skipped; fmt must precede data.
// Throws std::runtime_error on malformed headers, non-mono or non-16-bit
// audio, and empty payloads.
WavData parse_wav(std::span<const std::uint8_t> bytes);

// Serializes samples as mono PCM16. Values are scaled by 32768, rounded to
// nearest, and clamped to the int16 range.
std::vector<std::uint8_t> write_wav(int sample_rate_hz, std::span<const double> samples);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace cardiolabel
