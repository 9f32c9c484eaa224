#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "cardiolabel/pcg.hpp"
#include "cardiolabel/wav.hpp"

using namespace cardiolabel;

namespace {

std::string tsv(std::initializer_list<std::string> rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r;
    out += '\n';
  }
  return out;
}

AudioRecording make_recording(std::size_t count, int rate = 4000) {
  AudioRecording rec;
  rec.sample_rate_hz = rate;
  rec.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) rec.samples[i] = std::sin(0.01 * static_cast<double>(i));
  return rec;
}

std::vector<std::vector<double>> make_segments(std::size_t k, std::size_t len, double base = 0.0) {
  std::vector<std::vector<double>> segs(k, std::vector<double>(len));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < len; ++j) segs[i][j] = base + static_cast<double>(i) + 0.001 * static_cast<double>(j);
  return segs;
}

}  // namespace

TEST_SUITE_BEGIN("pcg");

TEST_CASE("wav roundtrip preserves a sine within quantization") {
  std::vector<double> wave(4000);
  for (std::size_t i = 0; i < wave.size(); ++i) wave[i] = 0.8 * std::sin(2.0 * 3.14159265358979 * 440.0 * static_cast<double>(i) / 4000.0);
  const auto bytes = write_wav(4000, wave);
  const WavData back = parse_wav(bytes);
  CHECK(back.sample_rate_hz == 4000);
  REQUIRE(back.samples.size() == wave.size());
  for (std::size_t i = 0; i < wave.size(); ++i) CHECK(std::abs(back.samples[i] - wave[i]) <= 1.0 / 32768.0);
}

TEST_CASE("parse_recording rejects malformed audio") {
  const std::string no_rows;
  SUBCASE("empty payload") {
    const auto bytes = write_wav(4000, std::vector<double>{});
    CHECK_THROWS_WITH_AS(parse_recording(bytes, no_rows), doctest::Contains("no samples"), std::runtime_error);
  }
  SUBCASE("truncated header") {
    std::vector<std::uint8_t> bytes{'R', 'I', 'F', 'F'};
    CHECK_THROWS_AS(parse_recording(bytes, no_rows), std::runtime_error);
  }
  SUBCASE("stereo is rejected") {
    auto bytes = write_wav(4000, std::vector<double>(8, 0.1));
    bytes[22] = 2;  // channel count field
    CHECK_THROWS_WITH_AS(parse_recording(bytes, no_rows), doctest::Contains("mono"), std::runtime_error);
  }
}

TEST_CASE("parse_recording validates interval rows") {
  const auto bytes = write_wav(4000, std::vector<double>(4000, 0.1));
  SUBCASE("well-formed rows parse sorted") {
    const auto [rec, iv] = parse_recording(bytes, tsv({"0.5\t0.6\t3", "0\t0.1\t1", "0.1\t0.5\t2"}));
    CHECK(rec.sample_rate_hz == 4000);
    REQUIRE(iv.size() == 3);
    CHECK(iv[0].state == IntervalState::S1);
    CHECK(iv[2].end_s == 0.6);
  }
  SUBCASE("inverted interval names its row") {
    CHECK_THROWS_WITH_AS(parse_recording(bytes, tsv({"0\t0.1\t1", "0.3\t0.2\t2"})), doctest::Contains("row 2"), std::runtime_error);
  }
  SUBCASE("overlap names its row") {
    CHECK_THROWS_WITH_AS(parse_recording(bytes, tsv({"0\t0.2\t1", "0.1\t0.3\t2"})), doctest::Contains("overlaps"), std::runtime_error);
  }
  SUBCASE("interval past the end of audio") {
    CHECK_THROWS_WITH_AS(parse_recording(bytes, tsv({"0.9\t1.5\t1"})), doctest::Contains("beyond"), std::runtime_error);
  }
  SUBCASE("unknown state code") {
    CHECK_THROWS_WITH_AS(parse_recording(bytes, tsv({"0\t0.1\t7"})), doctest::Contains("state code"), std::runtime_error);
  }
  SUBCASE("garbage row") {
    CHECK_THROWS_AS(parse_recording(bytes, tsv({"zero\tone\ttwo"})), std::runtime_error);
  }
}

TEST_CASE("extraction takes S1-through-systole slices only") {
  AudioRecording rec = make_recording(8000);
  const std::vector<StateInterval> iv{
      {0.00, 0.10, IntervalState::S1},      {0.10, 0.26, IntervalState::Systole}, {0.26, 0.30, IntervalState::S2},
      {0.30, 0.90, IntervalState::Diastole}, {1.00, 1.09, IntervalState::S1},      {1.09, 1.24, IntervalState::Systole},
  };
  const auto segs = extract_s1_systolic_segments(rec, iv);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].size() == 1040);
  CHECK(segs[1].size() == 960);
  // slice [0, 1040) comes straight from the waveform
  CHECK(segs[0][0] == rec.samples[0]);
  CHECK(segs[0][1039] == rec.samples[1039]);
  CHECK(segs[1][0] == rec.samples[4000]);
}

TEST_CASE("a 0.256 s segment yields 1024 raw points at 4000 Hz") {
  AudioRecording rec = make_recording(4000);
  const std::vector<StateInterval> iv{
      {0.100, 0.140, IntervalState::S1},
      {0.140, 0.356, IntervalState::Systole},
  };
  const auto segs = extract_s1_systolic_segments(rec, iv);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].size() == 1024);
}

TEST_CASE("extraction skips S1 without an adjacent systole") {
  AudioRecording rec = make_recording(8000);
  SUBCASE("only S2 and diastole content") {
    const std::vector<StateInterval> iv{{0.0, 0.1, IntervalState::S2}, {0.1, 0.5, IntervalState::Diastole}};
    CHECK(extract_s1_systolic_segments(rec, iv).empty());
  }
  SUBCASE("S1 followed by something else") {
    const std::vector<StateInterval> iv{{0.0, 0.1, IntervalState::S1}, {0.1, 0.5, IntervalState::Diastole}};
    CHECK(extract_s1_systolic_segments(rec, iv).empty());
  }
  SUBCASE("gap between S1 end and systole start") {
    const std::vector<StateInterval> iv{{0.0, 0.1, IntervalState::S1}, {0.2, 0.5, IntervalState::Systole}};
    CHECK(extract_s1_systolic_segments(rec, iv).empty());
  }
}

TEST_CASE("resample interpolates linearly and keeps endpoints") {
  const std::vector<double> ramp{0, 1, 2, 3};
  const auto out = resample_to_length(ramp, 7);
  const std::vector<double> expected{0, 0.5, 1, 1.5, 2, 2.5, 3};
  REQUIRE(out.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-12));

  const std::vector<double> constant(13, 2.5);
  for (double v : resample_to_length(constant, 5)) CHECK(v == 2.5);

  std::vector<double> wave(301);
  for (std::size_t i = 0; i < wave.size(); ++i) wave[i] = std::sin(0.05 * static_cast<double>(i));
  const auto rs = resample_to_length(wave, 64);
  CHECK(rs.front() == wave.front());
  CHECK(rs.back() == wave.back());

  CHECK_THROWS_AS(resample_to_length(std::vector<double>{1.0}, 8), std::runtime_error);
  CHECK_THROWS_AS(resample_to_length(ramp, 1), std::runtime_error);
}

TEST_CASE("standardize hits zero mean unit variance") {
  const auto out = standardize(std::vector<double>{1.0, 3.0});
  REQUIRE(out.size() == 2);
  CHECK(out[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(out[1] == doctest::Approx(1.0).epsilon(1e-6));

  for (double v : standardize(std::vector<double>(9, 4.2))) CHECK(v == 0.0);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> x(257);
  for (auto& v : x) v = dist(rng);
  const auto z = standardize(x);
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(z.size()));
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(sd - 1.0) < 1e-6);

  const auto mean_only = standardize(x, false);
  const double m2 = std::accumulate(mean_only.begin(), mean_only.end(), 0.0) / static_cast<double>(mean_only.size());
  CHECK(std::abs(m2) < 1e-9);
}

TEST_CASE("murmur augmentation slides a step-1 window") {
  const auto segs = make_segments(15, 8);
  const LabelSet murmur{1, 1, 1, 1, 1};
  const auto samples = build_samples(segs, murmur, 10, 42);
  REQUIRE(samples.size() == 6);
  for (std::size_t w = 0; w < samples.size(); ++w) {
    CHECK(samples[w].pad_count == 0);
    CHECK(samples[w].labels == murmur);
    for (std::int64_t r = 0; r < 10; ++r)
      for (std::int64_t c = 0; c < 8; ++c)
        CHECK(samples[w].segments.at({r, c}) == segs[w + static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
  }
}

TEST_CASE("short murmur recording pads one sample") {
  const auto segs = make_segments(7, 6);
  const auto samples = build_samples(segs, LabelSet{2, 1, 1, 1, 1}, 10, 0);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].pad_count == 3);
  for (std::int64_t r = 7; r < 10; ++r)
    for (std::int64_t c = 0; c < 6; ++c) CHECK(samples[0].segments.at({r, c}) == 0.0);
  for (std::int64_t c = 0; c < 6; ++c) CHECK(samples[0].segments.at({6, c}) == segs[6][static_cast<std::size_t>(c)]);
}

TEST_CASE("normal recording with many segments draws twice") {
  const auto segs = make_segments(14, 5);
  const auto samples = build_samples(segs, LabelSet{}, 10, 7);
  REQUIRE(samples.size() == 2);
  for (const Sample& s : samples) {
    CHECK(s.pad_count == 0);
    // each row must be one of the source segments, in strictly increasing source order
    std::int64_t prev = -1;
    for (std::int64_t r = 0; r < 10; ++r) {
      std::int64_t found = -1;
      for (std::size_t src = 0; src < segs.size(); ++src) {
        bool match = true;
        for (std::int64_t c = 0; c < 5; ++c) {
          if (s.segments.at({r, c}) != segs[src][static_cast<std::size_t>(c)]) {
            match = false;
            break;
          }
        }
        if (match) {
          found = static_cast<std::int64_t>(src);
          break;
        }
      }
      REQUIRE(found >= 0);
      CHECK(found > prev);
      prev = found;
    }
  }
}

TEST_CASE("normal recording boundary cases") {
  SUBCASE("exactly N segments gives one unpadded sample") {
    const auto samples = build_samples(make_segments(10, 4), LabelSet{}, 10, 3);
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].pad_count == 0);
  }
  SUBCASE("fewer than N pads the tail") {
    const auto samples = build_samples(make_segments(7, 4), LabelSet{}, 10, 3);
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].pad_count == 3);
    for (std::int64_t r = 7; r < 10; ++r)
      for (std::int64_t c = 0; c < 4; ++c) CHECK(samples[0].segments.at({r, c}) == 0.0);
  }
  SUBCASE("no segments gives no samples") {
    CHECK(build_samples({}, LabelSet{}, 10, 3).empty());
  }
}

TEST_CASE("augmentation counts match the brute-force rule") {
  for (std::int64_t k = 1; k <= 25; ++k) {
    const auto segs = make_segments(static_cast<std::size_t>(k), 3);
    const auto murmur = build_samples(segs, LabelSet{1, 2, 3, 1, 2}, 10, k);
    const auto normal = build_samples(segs, LabelSet{}, 10, k);
    const std::size_t expect_murmur = k >= 10 ? static_cast<std::size_t>(k - 10 + 1) : 1;
    const std::size_t expect_normal = k > 10 ? 2 : 1;
    CHECK(murmur.size() == expect_murmur);
    CHECK(normal.size() == expect_normal);
  }
}

TEST_CASE("same seed reproduces the same samples") {
  const auto segs = make_segments(20, 4);
  const auto a = build_samples(segs, LabelSet{}, 10, 1234);
  const auto b = build_samples(segs, LabelSet{}, 10, 1234);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].segments.values() == b[i].segments.values());

  const auto c = build_samples(segs, LabelSet{}, 10, 1235);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size() && !any_diff; ++i) any_diff = a[i].segments.values() != c[i].segments.values();
  CHECK(any_diff);
}

TEST_CASE("mixed segment lengths are rejected") {
  std::vector<std::vector<double>> segs{{1, 2, 3}, {1, 2}};
  CHECK_THROWS_AS(build_samples(segs, LabelSet{}, 10, 0), std::runtime_error);
}

TEST_SUITE_END();
