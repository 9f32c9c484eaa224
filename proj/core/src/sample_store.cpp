#include "cardiolabel/sample_store.hpp"

#include <stdexcept>

#include "bytes.hpp"
#include "cardiolabel/wav.hpp"

namespace cardiolabel {

namespace {
constexpr std::uint32_t kVersion = 1;
}

std::vector<std::uint8_t> serialize_samples(const std::vector<Sample>& samples) {
  const std::int64_t n = samples.empty() ? 0 : samples.front().segment_count();
  const std::int64_t l = samples.empty() ? 0 : samples.front().segment_length();

  detail::ByteWriter w;
  w.raw("CLSS", 4);
  w.u32(kVersion);
  w.i64(static_cast<std::int64_t>(samples.size()));
  w.i64(n);
  w.i64(l);

  for (const auto& s : samples) {
    if (s.segment_count() != n || s.segment_length() != l)
      throw std::runtime_error("sample store: mixed sample shapes {" + std::to_string(s.segment_count()) + "," +
                               std::to_string(s.segment_length()) + "} vs {" + std::to_string(n) + "," +
                               std::to_string(l) + "}");
    for (double v : s.segments.values()) w.f64(v);
    w.u8(static_cast<std::uint8_t>(s.labels.timing));
    w.u8(static_cast<std::uint8_t>(s.labels.pitch));
    w.u8(static_cast<std::uint8_t>(s.labels.quality));
    w.u8(static_cast<std::uint8_t>(s.labels.shape));
    w.u8(static_cast<std::uint8_t>(s.labels.grading));
    w.u32(static_cast<std::uint32_t>(s.pad_count));
    w.u8(static_cast<std::uint8_t>(s.location));
    w.str(s.patient_id);
  }
  return std::move(w.out);
}

std::vector<Sample> deserialize_samples(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "sample store");
  r.expect_magic("CLSS");
  if (const auto v = r.u32(); v != kVersion)
    throw std::runtime_error("sample store: unsupported version " + std::to_string(v));
  const std::int64_t count = r.i64();
  const std::int64_t n = r.i64();
  const std::int64_t l = r.i64();
  if (count < 0 || n < 0 || l < 0) throw std::runtime_error("sample store: negative header field");

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    Sample s;
    s.segments = Tensor({n, l});
    for (auto& v : s.segments.values()) v = r.f64();
    s.labels.timing = r.u8();
    s.labels.pitch = r.u8();
    s.labels.quality = r.u8();
    s.labels.shape = r.u8();
    s.labels.grading = r.u8();
    validate_labels(s.labels);
    s.pad_count = static_cast<int>(r.u32());
    const int loc = r.u8();
    if (loc < 0 || loc >= kLocationCount) throw std::runtime_error("sample store: bad location code " + std::to_string(loc));
    s.location = static_cast<Location>(loc);
    s.patient_id = r.str();
    out.push_back(std::move(s));
  }
  r.finish();
  return out;
}

void save_samples(const std::vector<Sample>& samples, const std::string& path) {
  write_file_bytes(path, serialize_samples(samples));
}

std::vector<Sample> load_samples(const std::string& path) { return deserialize_samples(read_file_bytes(path)); }

}  // namespace cardiolabel
