#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cardiolabel/labels.hpp"
#include "cardiolabel/patient.hpp"
#include "cardiolabel/pcg.hpp"

namespace cardiolabel {

struct ManifestEntry {
  std::string patient_id;
  Location location = Location::AV;
  std::string audio;  // relative to the manifest directory
  std::string tsv;
};

/**
 * Dataset manifest: JSON object with a "labels_dir" string and a
 * "recordings" array of {patient, location, audio, tsv} objects. All paths
 * are relative to the directory holding the manifest; root is filled with
 * that directory on load.
 */
struct Manifest {
  std::string root;
  std::string labels_dir = "labels";
  std::vector<ManifestEntry> recordings;
};

Manifest parse_manifest(const std::string& text);
Manifest load_manifest(const std::string& path);
std::string manifest_to_json(const Manifest& manifest);

/**
 * Patient label file, one per patient at <root>/<labels_dir>/<id>.txt, in
 * the flat key = value format. `murmur` (Present | Absent | Unknown) is
 * required; a Present patient must also carry `timing`, `pitch`, `quality`,
 * `shape`, `grading` (class names) and `audible` (comma-separated location
 * names). Absent and Unknown patients carry the murmur line alone.
 */
PatientLabels parse_patient_labels(const std::string& text, const std::string& patient_id);
std::string render_patient_labels(const PatientLabels& labels);

struct RawRecording {
  AudioRecording audio;
  std::vector<StateInterval> intervals;
};

struct Dataset {
  std::vector<RawRecording> recordings;
  std::vector<PatientLabels> patients;  // first-appearance order, one per id
};

/**
 * Reads every manifest entry plus the label file of every referenced
 * patient. Patients labeled Unknown are excluded together with their
 * recordings; they carry no usable targets. Throws on unreadable files,
 * malformed content, or a recording whose patient has no label file.
 */
Dataset load_dataset(const std::string& manifest_path);

struct PrepareStats {
  std::int64_t recordings = 0;
  std::int64_t dropped_recordings = 0;  // no extractable segments
  std::int64_t segments = 0;
  std::int64_t samples = 0;
  std::array<std::int64_t, kLocationCount> samples_per_location{};
  std::int64_t murmur_samples = 0;
};

/**
 * Extract + resample(L) + standardize every recording. A recording's
 * murmur_audible flag is set when its patient is murmur-Present and the
 * location is in the patient's audible set. Recordings with no extractable
 * segments are dropped and counted.
 */
std::vector<PreparedRecording> prepare_recordings(const Dataset& dataset, std::int64_t segment_length,
                                                  PrepareStats* stats = nullptr);

/**
 * Window augmentation over prepared recordings. Recording i uses
 * rng_seed = seed + i. Samples from a murmur_audible recording carry the
 * patient's label set; all other samples carry the all-zero (absent) set.
 * patient_id and location are stamped on every sample.
 */
std::vector<Sample> window_dataset(const std::vector<PreparedRecording>& recordings,
                                   const std::vector<PatientLabels>& patients, std::int64_t segment_count,
                                   std::uint64_t seed, PrepareStats* stats = nullptr);

/**
 * Binary store for prepared recordings plus patient labels, magic "CLPR".
 * Round-trips bitwise; layout mirrors the sample store conventions.
 */
std::vector<std::uint8_t> serialize_prepared(const std::vector<PreparedRecording>& recordings,
                                             const std::vector<PatientLabels>& patients);
std::pair<std::vector<PreparedRecording>, std::vector<PatientLabels>> deserialize_prepared(
    std::span<const std::uint8_t> bytes);

}  // namespace cardiolabel
