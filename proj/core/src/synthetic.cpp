#include "cardiolabel/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace cardiolabel {

namespace {

constexpr double kS1Seconds = 0.04;
constexpr double kSystoleSeconds = 0.23;
constexpr double kS2Seconds = 0.04;
constexpr double kDiastoleSeconds = 0.20;
constexpr double kS1Hz = 140.0;
constexpr double kS2Hz = 90.0;
constexpr double kMasterGain = 0.9;

// Bands stay below the effective Nyquist of a resampled cycle (~250 Hz at
// segment_length 256) so no band aliases onto another. Tier steps near 3x
// keep the post-standardization amplitude ladder separated even after the
// divisor inflates with murmur energy; the top tier stays moderate for the
// same reason.
constexpr double kPitchHz[3] = {45.0, 105.0, 210.0};
constexpr double kGradeAmp[3] = {0.08, 0.2, 0.65};

// All four envelopes share one mean square so grading rides on segment
// energy alone and shape is carried purely by the temporal profile. The
// three ramps already have equal integral (0.05..1.0 linear pieces); the
// plateau is lowered to match them.
constexpr double kRampMeanSquare = 0.35083333333333333;  // integral of (1 - 0.95u)^2 over [0,1]
constexpr double kPlateauLevel = 0.59231185479722866;    // sqrt(kRampMeanSquare)

// Quality mixes share one RMS (1/2) so murmur energy tracks the grading
// tier alone and quality is carried by texture at unrelated scales: Harsh
// a noise-dominated mix, Blowing a full-depth 30 Hz amplitude ripple on
// the carrier, Musical a clean tone. The ripple sidebands at band +-30 Hz
// land on none of the bands.
constexpr double kHarshNoiseCarrier = 0.6;
constexpr double kHarshScale = 0.69786315779885311;    // 0.5 / sqrt(0.6^2/2 + 1/3)
constexpr double kBlowingScale = 0.57735026918962584;  // 0.5 / sqrt((1/2)(1 + 1/2))
constexpr double kMusicalScale = 0.70710678118654752;  // 0.5 / sqrt(1/2)
constexpr double kBlowingRippleHz = 30.0;

double canonical(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// splitmix64 finalizer; position-keyed broadband noise in [-1, 1)
double hash_noise(std::uint64_t key) {
  std::uint64_t z = key + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-52 - 1.0;
}

double hann(std::int64_t i, std::int64_t n) {
  if (n <= 1) return 1.0;
  return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
}

double envelope(int shape, std::int64_t i, std::int64_t m) {
  const double u = m > 1 ? static_cast<double>(i) / static_cast<double>(m - 1) : 0.0;
  switch (shape) {
    case 1: return kPlateauLevel;                              // Plateau
    case 2: return 1.0 - 0.95 * u;                             // Decrescendo, falls from the peak
    case 3: return u < 0.5 ? 0.05 + 1.9 * u : 1.95 - 1.9 * u;  // Diamond
    case 4: return 0.05 + 0.95 * u;                            // Crescendo
    default: throw std::runtime_error("synthetic: invalid shape class " + std::to_string(shape));
  }
}

void add_burst(std::vector<double>& wave, std::int64_t at, std::int64_t n, double hz, double amp, int rate) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(rate);
    wave[static_cast<std::size_t>(at + i)] += amp * hann(i, n) * std::sin(2.0 * std::numbers::pi * hz * t);
  }
}

void add_murmur(std::vector<double>& wave, std::int64_t sys_at, std::int64_t sys_len, const LabelSet& labels, int rate,
                std::uint64_t recording_key) {
  std::int64_t begin = 0, len = sys_len;
  const std::int64_t third = sys_len / 3;
  switch (labels.timing) {
    case 1: begin = 0; len = third; break;
    case 2: begin = third; len = third; break;
    case 3: begin = sys_len - third; len = third; break;
    case 4: begin = 0; len = sys_len; break;
    default: throw std::runtime_error("synthetic: invalid timing class " + std::to_string(labels.timing));
  }
  const double hz = kPitchHz[labels.pitch - 1];
  const double amp = kGradeAmp[labels.grading - 1];

  for (std::int64_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(rate);
    const double carrier = std::sin(2.0 * std::numbers::pi * hz * t);
    double tone = 0.0;
    switch (labels.quality) {
      case 1:
        tone = kHarshScale * (kHarshNoiseCarrier * carrier +
                              hash_noise(recording_key + static_cast<std::uint64_t>(sys_at + begin + i)));
        break;
      case 2:
        tone = kBlowingScale * carrier * (1.0 + std::sin(2.0 * std::numbers::pi * kBlowingRippleHz * t));
        break;
      case 3: tone = kMusicalScale * carrier; break;
      default: throw std::runtime_error("synthetic: invalid quality class " + std::to_string(labels.quality));
    }
    wave[static_cast<std::size_t>(sys_at + begin + i)] += amp * envelope(labels.shape, i, len) * tone;
  }
}

}  // namespace

SynthDataset generate_synthetic_dataset(const SynthSpec& spec, std::uint64_t rng_seed) {
  if (spec.patients < 1) throw std::runtime_error("synthetic: patients must be >= 1");
  if (spec.murmur_prevalence < 0.0 || spec.murmur_prevalence > 1.0)
    throw std::runtime_error("synthetic: murmur_prevalence must lie in [0,1]");
  if (spec.segments_per_recording < 1) throw std::runtime_error("synthetic: segments_per_recording must be >= 1");
  if (spec.noise_level < 0.0) throw std::runtime_error("synthetic: noise_level must be >= 0");
  if (spec.sample_rate_hz < 400) throw std::runtime_error("synthetic: sample_rate_hz too low for the signature bands");
  if (spec.locations.empty()) throw std::runtime_error("synthetic: need at least one location");
  {
    std::set<Location> seen(spec.locations.begin(), spec.locations.end());
    if (seen.size() != spec.locations.size()) throw std::runtime_error("synthetic: duplicate locations");
  }

  const int rate = spec.sample_rate_hz;
  const auto n_s1 = static_cast<std::int64_t>(std::lround(kS1Seconds * rate));
  const auto n_sys = static_cast<std::int64_t>(std::lround(kSystoleSeconds * rate));
  const auto n_s2 = static_cast<std::int64_t>(std::lround(kS2Seconds * rate));
  const auto n_dia = static_cast<std::int64_t>(std::lround(kDiastoleSeconds * rate));
  const std::int64_t cycle = n_s1 + n_sys + n_s2 + n_dia;
  const std::int64_t total = cycle * spec.segments_per_recording;

  std::mt19937_64 rng(rng_seed);
  SynthDataset out;
  out.patients.reserve(static_cast<std::size_t>(spec.patients));

  for (int p = 0; p < spec.patients; ++p) {
    PatientLabels labels;
    labels.patient_id = std::to_string(10000 + p);
    const bool murmur = canonical(rng) < spec.murmur_prevalence;
    if (murmur) {
      labels.murmur = MurmurStatus::Present;
      labels.label_set.timing = 1 + static_cast<int>(rng() % 4);
      labels.label_set.pitch = 1 + static_cast<int>(rng() % 3);
      labels.label_set.quality = 1 + static_cast<int>(rng() % 3);
      labels.label_set.shape = 1 + static_cast<int>(rng() % 4);
      labels.label_set.grading = 1 + static_cast<int>(rng() % 3);
      labels.audible_locations.insert(spec.locations.begin(), spec.locations.end());
    }

    for (std::size_t li = 0; li < spec.locations.size(); ++li) {
      const Location loc = spec.locations[li];
      AudioRecording rec;
      rec.patient_id = labels.patient_id;
      rec.location = loc;
      rec.sample_rate_hz = rate;
      rec.samples.assign(static_cast<std::size_t>(total), 0.0);

      std::vector<StateInterval> iv;
      iv.reserve(static_cast<std::size_t>(4 * spec.segments_per_recording));

      const double gain = kMasterGain * (1.0 - 0.04 * static_cast<double>(static_cast<int>(loc)));
      // injective over (recording, sample) as long as recordings stay shorter than 2^32 points
      const std::uint64_t recording_key = static_cast<std::uint64_t>(out.recordings.size()) << 32;

      for (int c = 0; c < spec.segments_per_recording; ++c) {
        const std::int64_t base = cycle * c;
        add_burst(rec.samples, base, n_s1, kS1Hz, 1.0, rate);
        add_burst(rec.samples, base + n_s1 + n_sys, n_s2, kS2Hz, 0.7, rate);
        if (murmur) add_murmur(rec.samples, base + n_s1, n_sys, labels.label_set, rate, recording_key);

        const auto t = [rate](std::int64_t index) { return static_cast<double>(index) / static_cast<double>(rate); };
        iv.push_back({t(base), t(base + n_s1), IntervalState::S1});
        iv.push_back({t(base + n_s1), t(base + n_s1 + n_sys), IntervalState::Systole});
        iv.push_back({t(base + n_s1 + n_sys), t(base + n_s1 + n_sys + n_s2), IntervalState::S2});
        iv.push_back({t(base + n_s1 + n_sys + n_s2), t(base + cycle), IntervalState::Diastole});
      }

      for (auto& v : rec.samples) v *= gain;
      if (spec.noise_level > 0.0) {
        for (auto& v : rec.samples) v += (2.0 * canonical(rng) - 1.0) * spec.noise_level;
      }

      out.recordings.push_back(std::move(rec));
      out.intervals.push_back(std::move(iv));
    }

    out.patients.push_back(std::move(labels));
  }
  return out;
}

}  // namespace cardiolabel
