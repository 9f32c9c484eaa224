#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cardiolabel/labels.hpp"
#include "cardiolabel/network.hpp"
#include "cardiolabel/pcg.hpp"

namespace cardiolabel {

/**
 * One recording reduced to its prepared segment list: extracted, resampled
 * to the model's segment length, standardized. murmur_audible mirrors the
 * patient annotation for the recording's location, not waveform content.
 */
struct PreparedRecording {
  std::string patient_id;
  Location location = Location::AV;
  bool murmur_audible = false;
  std::vector<std::vector<double>> segments;
};

/**
 * Model lookup for patient-level prediction. The position-dependent regime
 * fills by_location (one model per auscultation location); the
 * position-independent regime fills shared. Lookup prefers the
 * location-specific model and falls back to the shared one.
 */
struct LocationModels {
  std::map<Location, EnsembleParams> by_location;
  std::optional<EnsembleParams> shared;

  // Throws when neither a location-specific nor a shared model exists.
  EnsembleParams& model_for(Location loc);
};

/**
 * Cuts a recording into non-overlapping windows of N segments in temporal
 * order. The tail window keeps the remaining r < N segments and pads N - r
 * zero rows, recorded in pad_count. An empty segment list yields no
 * windows. The returned samples carry all-zero labels; patient_id and
 * location are stamped from the recording.
 */
std::vector<Sample> patient_windows(const PreparedRecording& recording, std::int64_t N);

/**
 * Patient-level mode vote. Uses the recordings flagged murmur_audible when
 * any exist, otherwise all recordings. Every selected recording is cut into
 * non-overlapping windows of its model's segment_count, each window is
 * predicted with the model for the recording's location, and the final
 * value per label group is the mode over all window predictions, ties
 * toward the lowest class index. Throws when no selected recording has any
 * segments.
 */
LabelSet patient_level_predict(LocationModels& models, const std::vector<PreparedRecording>& recordings);

struct PatientAccuracy {
  std::array<double, kGroupCount> per_group{};
  double average = 0.0;
};

/**
 * Per group, the fraction of patients whose predicted value matches the
 * truth exactly, plus the unweighted mean over the five groups.
 */
PatientAccuracy patient_accuracy(std::span<const LabelSet> preds, std::span<const LabelSet> truths);

}  // namespace cardiolabel
