#include "cardiolabel/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cardiolabel {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw std::runtime_error("wav: " + msg); }

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[off]) | static_cast<std::uint16_t>(b[off + 1]) << 8);
}

void push_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void push_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t off, const char* tag) {
  return std::memcmp(b.data() + off, tag, 4) == 0;
}

}  // namespace

WavData parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) bad("file too short for a RIFF header");
  if (!tag_is(bytes, 0, "RIFF")) bad("missing RIFF tag");
  if (!tag_is(bytes, 8, "WAVE")) bad("missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;

  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, off + 4);
    const std::size_t body = off + 8;
    if (body + chunk_size > bytes.size()) bad("chunk extends past end of file");

    if (tag_is(bytes, off, "fmt ")) {
      if (chunk_size < 16) bad("fmt chunk too short");
      format = read_u16(bytes, body + 0);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      have_fmt = true;
    } else if (tag_is(bytes, off, "data")) {
      if (!have_fmt) bad("data chunk precedes fmt chunk");
      if (format != 1) bad("unsupported encoding " + std::to_string(format) + " (need PCM)");
      if (channels != 1) bad("unsupported channel count " + std::to_string(channels) + " (need mono)");
      if (bits != 16) bad("unsupported bit depth " + std::to_string(bits) + " (need 16)");
      if (rate == 0) bad("zero sample rate");
      if (chunk_size == 0) bad("no samples");
      if (chunk_size % 2 != 0) bad("odd data chunk size for 16-bit samples");

      WavData out;
      out.sample_rate_hz = static_cast<int>(rate);
      const std::size_t count = chunk_size / 2;
      out.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::uint16_t raw = read_u16(bytes, body + 2 * i);
        out.samples[i] = static_cast<double>(static_cast<std::int16_t>(raw)) / 32768.0;
      }
      return out;
    }
    // chunks are word-aligned
    off = body + chunk_size + (chunk_size % 2);
  }
  bad(have_fmt ? "no data chunk" : "no fmt chunk");
}

std::vector<std::uint8_t> write_wav(int sample_rate_hz, std::span<const double> samples) {
  if (sample_rate_hz <= 0) bad("sample rate must be positive");
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  push_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  push_u32(out, 16);
  push_u16(out, 1);  // PCM
  push_u16(out, 1);  // mono
  push_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  push_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * 2);
  push_u16(out, 2);   // block align
  push_u16(out, 16);  // bits
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  push_u32(out, data_size);

  for (double v : samples) {
    double scaled = std::lround(v * 32768.0);
    if (scaled > 32767.0) scaled = 32767.0;
    if (scaled < -32768.0) scaled = -32768.0;
    const auto q = static_cast<std::int16_t>(scaled);
    push_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("read failure on '" + path + "'");
  return bytes;
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

}  // namespace cardiolabel
