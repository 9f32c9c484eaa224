#include "cardiolabel/pcg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cardiolabel/wav.hpp"

namespace cardiolabel {

namespace {

[[noreturn]] void bad_row(std::size_t row, const std::string& msg) {
  throw std::runtime_error("timestamp row " + std::to_string(row + 1) + ": " + msg);
}

std::int64_t to_index(double seconds, int rate) { return std::lround(seconds * static_cast<double>(rate)); }

}  // namespace

std::pair<AudioRecording, std::vector<StateInterval>> parse_recording(std::span<const std::uint8_t> audio_bytes,
                                                                      const std::string& timestamp_rows) {
  WavData wav = parse_wav(audio_bytes);

  AudioRecording rec;
  rec.sample_rate_hz = wav.sample_rate_hz;
  rec.samples = std::move(wav.samples);

  std::vector<StateInterval> intervals;
  std::istringstream in(timestamp_rows);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      ++row;
      continue;
    }
    std::istringstream fields(line);
    double start = 0.0, end = 0.0;
    int code = -1;
    if (!(fields >> start >> end >> code)) bad_row(row, "expected 'start_s end_s state_code', got '" + line + "'");
    std::string extra;
    if (fields >> extra) bad_row(row, "trailing content '" + extra + "'");
    if (!std::isfinite(start) || !std::isfinite(end)) bad_row(row, "non-finite bound");
    if (start < 0.0) bad_row(row, "negative start " + std::to_string(start));
    if (end <= start) bad_row(row, "inverted interval [" + std::to_string(start) + ", " + std::to_string(end) + "]");
    if (code < 0 || code > 4) bad_row(row, "unknown state code " + std::to_string(code));
    intervals.push_back({start, end, static_cast<IntervalState>(code)});
    ++row;
  }

  std::stable_sort(intervals.begin(), intervals.end(), [](const StateInterval& a, const StateInterval& b) { return a.start_s < b.start_s; });

  const double duration = static_cast<double>(rec.samples.size()) / static_cast<double>(rec.sample_rate_hz);
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].end_s > duration + 1e-9)
      bad_row(i, "interval end " + std::to_string(intervals[i].end_s) + " s beyond recording length " + std::to_string(duration) + " s");
    if (i + 1 < intervals.size() && intervals[i + 1].start_s < intervals[i].end_s - 1e-9)
      bad_row(i + 1, "overlaps previous interval ending at " + std::to_string(intervals[i].end_s));
  }

  return {std::move(rec), std::move(intervals)};
}

std::vector<std::vector<double>> extract_s1_systolic_segments(const AudioRecording& recording,
                                                              const std::vector<StateInterval>& intervals) {
  if (recording.samples.empty()) throw std::runtime_error("extract: recording has no samples");
  const int rate = recording.sample_rate_hz;
  const auto total = static_cast<std::int64_t>(recording.samples.size());

  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i + 1 < intervals.size(); ++i) {
    if (intervals[i].state != IntervalState::S1) continue;
    const StateInterval& next = intervals[i + 1];
    if (next.state != IntervalState::Systole) continue;
    if (std::abs(next.start_s - intervals[i].end_s) > 1e-9) continue;

    const std::int64_t begin = std::clamp<std::int64_t>(to_index(intervals[i].start_s, rate), 0, total);
    const std::int64_t end = std::clamp<std::int64_t>(to_index(next.end_s, rate), begin, total);
    if (end <= begin) continue;
    out.emplace_back(recording.samples.begin() + begin, recording.samples.begin() + end);
  }
  return out;
}

std::vector<double> resample_to_length(std::span<const double> segment, std::int64_t L) {
  const auto n = static_cast<std::int64_t>(segment.size());
  if (n < 2) throw std::runtime_error("resample: segment has " + std::to_string(n) + " points, need at least 2");
  if (L < 2) throw std::runtime_error("resample: target length " + std::to_string(L) + " too small");

  std::vector<double> out(static_cast<std::size_t>(L));
  const double scale = static_cast<double>(n - 1) / static_cast<double>(L - 1);
  for (std::int64_t i = 0; i < L; ++i) {
    const double x = static_cast<double>(i) * scale;
    const auto lo = std::min<std::int64_t>(static_cast<std::int64_t>(x), n - 2);
    const double frac = x - static_cast<double>(lo);
    out[static_cast<std::size_t>(i)] = segment[static_cast<std::size_t>(lo)] * (1.0 - frac) + segment[static_cast<std::size_t>(lo + 1)] * frac;
  }
  out.front() = segment.front();
  out.back() = segment.back();
  return out;
}

std::vector<double> standardize(std::span<const double> x, bool unit_variance) {
  if (x.empty()) return {};
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double denom = 1.0;
  if (unit_variance) {
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    denom = std::sqrt(var / n) + 1e-8;
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / denom;
  return out;
}

namespace {

std::vector<std::size_t> draw_sorted_subset(std::size_t k, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (k - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Sample pack_rows(const std::vector<std::vector<double>>& segments, const std::vector<std::size_t>& rows, const LabelSet& labels,
                 std::int64_t N, std::int64_t L) {
  Sample s;
  s.segments = Tensor({N, L});
  s.labels = labels;
  s.pad_count = static_cast<int>(N - static_cast<std::int64_t>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& src = segments[rows[r]];
    std::copy(src.begin(), src.end(), s.segments.data() + static_cast<std::int64_t>(r) * L);
  }
  return s;
}

}  // namespace

std::vector<Sample> build_samples(const std::vector<std::vector<double>>& segments, const LabelSet& labels, std::int64_t N,
                                  std::uint64_t rng_seed) {
  validate_labels(labels);
  if (N < 1) throw std::runtime_error("build_samples: N must be >= 1");
  const auto k = static_cast<std::int64_t>(segments.size());
  if (k == 0) return {};

  const auto L = static_cast<std::int64_t>(segments.front().size());
  for (const auto& s : segments) {
    if (static_cast<std::int64_t>(s.size()) != L)
      throw std::runtime_error("build_samples: segments have mixed lengths (" + std::to_string(s.size()) + " vs " + std::to_string(L) + ")");
  }

  std::vector<Sample> out;
  if (labels.murmur_present()) {
    if (k >= N) {
      for (std::int64_t start = 0; start + N <= k; ++start) {
        std::vector<std::size_t> rows(static_cast<std::size_t>(N));
        std::iota(rows.begin(), rows.end(), static_cast<std::size_t>(start));
        out.push_back(pack_rows(segments, rows, labels, N, L));
      }
    } else {
      std::vector<std::size_t> rows(static_cast<std::size_t>(k));
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      out.push_back(pack_rows(segments, rows, labels, N, L));
    }
  } else {
    if (k > N) {
      std::mt19937_64 rng(rng_seed);
      for (int draw = 0; draw < 2; ++draw) {
        const auto rows = draw_sorted_subset(static_cast<std::size_t>(k), static_cast<std::size_t>(N), rng);
        out.push_back(pack_rows(segments, rows, labels, N, L));
      }
    } else {
      std::vector<std::size_t> rows(static_cast<std::size_t>(k));
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      out.push_back(pack_rows(segments, rows, labels, N, L));
    }
  }
  return out;
}

}  // namespace cardiolabel
