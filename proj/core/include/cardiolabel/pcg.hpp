#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cardiolabel/labels.hpp"
#include "cardiolabel/tensor.hpp"

namespace cardiolabel {

/**
 * One body-position PCG waveform.
 * Samples are dimensionless amplitudes in [-1, 1) after PCM16 scaling.
 */
struct AudioRecording {
  std::string patient_id;
  Location location = Location::AV;
  int sample_rate_hz = 4000;
  std::vector<double> samples;
};

enum class IntervalState : int { Unlabeled = 0, S1 = 1, Systole = 2, S2 = 3, Diastole = 4 };

struct StateInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  IntervalState state = IntervalState::Unlabeled;
};

/**
 * Parses a PCM16 mono audio payload plus its segmentation TSV.
 *
 * Timestamp rows are `start_s<TAB>end_s<TAB>state_code` with state codes
 * 0:Unlabeled 1:S1 2:Systole 3:S2 4:Diastole. Intervals are sorted by start
 * and validated: each must satisfy end > start, must not overlap its
 * neighbour, and must not extend past the end of the recording. Violations
 * raise std::runtime_error naming the offending row. patient_id and location
 * on the returned recording are left for the caller to fill from its
 * manifest.
 */
std::pair<AudioRecording, std::vector<StateInterval>> parse_recording(std::span<const std::uint8_t> audio_bytes,
                                                                      const std::string& timestamp_rows);

/**
 * Emits the raw slice [S1.start, Systole.end) for every S1 interval whose
 * immediate successor is a Systole starting where the S1 ends (tolerance
 * 1e-9 s). Boundaries are converted to sample indices by rounding
 * time * rate to the nearest integer. All other content is discarded.
 * Output preserves temporal order; no matches is a valid empty result.
 */
std::vector<std::vector<double>> extract_s1_systolic_segments(const AudioRecording& recording,
                                                              const std::vector<StateInterval>& intervals);

/**
 * Linear interpolation onto L points over the index axis [0, len-1].
 * Endpoints are preserved exactly. Requires len >= 2 and L >= 2.
 */
std::vector<double> resample_to_length(std::span<const double> segment, std::int64_t L);

/**
 * (x - mean) / (population_std + 1e-8); constant input maps to all-zero.
 * With unit_variance = false only the mean is removed.
 */
std::vector<double> standardize(std::span<const double> x, bool unit_variance = true);

/** The network's input unit: N standardized segments sharing one LabelSet. */
struct Sample {
  Tensor segments;  // {N, L}; the last pad_count rows are exactly zero
  LabelSet labels;
  std::string patient_id;
  Location location = Location::AV;
  int pad_count = 0;

  std::int64_t segment_count() const { return segments.dim(0); }
  std::int64_t segment_length() const { return segments.dim(1); }
};

/**
 * Window augmentation. Segments must already be resampled to a common
 * length and standardized.
 *
 * murmur-present, k >= N: k-N+1 samples from a step-1 sliding window.
 * murmur-present, k <  N: one sample, zero-padded to N rows.
 * murmur-absent,  k >  N: two samples, each N distinct segments drawn
 *                         uniformly, original temporal order preserved.
 * murmur-absent,  k <= N: one sample, zero-padded when k < N.
 *
 * The random draw is pinned so tests can replay it: with
 * std::mt19937_64 rng(rng_seed), one draw selects indices via a partial
 * Fisher-Yates over [0,k): for i in [0,N), j = i + rng() % (k-i), swap;
 * the first N entries are then sorted ascending. The two draws of the
 * murmur-absent branch consume the generator in sequence.
 *
 * patient_id and location in the returned samples are left empty for the
 * caller to stamp.
 */
std::vector<Sample> build_samples(const std::vector<std::vector<double>>& segments, const LabelSet& labels, std::int64_t N,
                                  std::uint64_t rng_seed);

}  // namespace cardiolabel
