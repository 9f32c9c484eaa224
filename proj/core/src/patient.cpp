#include "cardiolabel/patient.hpp"

#include <algorithm>
#include <stdexcept>

#include "cardiolabel/metrics.hpp"

namespace cardiolabel {

EnsembleParams& LocationModels::model_for(Location loc) {
  if (auto it = by_location.find(loc); it != by_location.end()) return it->second;
  if (shared.has_value()) return *shared;
  throw std::runtime_error("patient: no model for location " + location_name(loc));
}

std::vector<Sample> patient_windows(const PreparedRecording& recording, std::int64_t N) {
  if (N < 1) throw std::runtime_error("patient_windows: N must be >= 1");
  std::vector<Sample> out;
  const auto k = static_cast<std::int64_t>(recording.segments.size());
  if (k == 0) return out;

  const auto L = static_cast<std::int64_t>(recording.segments.front().size());
  for (const auto& s : recording.segments) {
    if (static_cast<std::int64_t>(s.size()) != L)
      throw std::runtime_error("patient_windows: segments have mixed lengths (" + std::to_string(s.size()) + " vs " +
                               std::to_string(L) + ")");
  }

  const std::int64_t windows = (k + N - 1) / N;
  out.reserve(static_cast<std::size_t>(windows));
  for (std::int64_t w = 0; w < windows; ++w) {
    const std::int64_t have = std::min(N, k - w * N);
    Tensor t({N, L});
    for (std::int64_t i = 0; i < have; ++i) {
      const auto& src = recording.segments[static_cast<std::size_t>(w * N + i)];
      std::copy(src.begin(), src.end(), t.values().begin() + i * L);
    }
    Sample sample;
    sample.segments = std::move(t);
    sample.patient_id = recording.patient_id;
    sample.location = recording.location;
    sample.pad_count = static_cast<int>(N - have);
    out.push_back(std::move(sample));
  }
  return out;
}

LabelSet patient_level_predict(LocationModels& models, const std::vector<PreparedRecording>& recordings) {
  std::vector<const PreparedRecording*> selected;
  for (const auto& r : recordings)
    if (r.murmur_audible) selected.push_back(&r);
  if (selected.empty())
    for (const auto& r : recordings) selected.push_back(&r);

  std::vector<LabelSet> votes;
  for (const auto* rec : selected) {
    EnsembleParams& model = models.model_for(rec->location);
    for (const Sample& w : patient_windows(*rec, model.config.segment_count))
      votes.push_back(predict_sample(model, w.segments).labels);
  }
  if (votes.empty()) throw std::runtime_error("patient_level_predict: no segments to vote with");
  return mode_vote_labels(votes);
}

PatientAccuracy patient_accuracy(std::span<const LabelSet> preds, std::span<const LabelSet> truths) {
  if (preds.size() != truths.size())
    throw std::runtime_error("patient_accuracy: size mismatch (" + std::to_string(preds.size()) + " vs " +
                             std::to_string(truths.size()) + ")");
  if (preds.empty()) throw std::runtime_error("patient_accuracy: empty input");

  PatientAccuracy acc;
  double sum = 0.0;
  for (int g = 0; g < kGroupCount; ++g) {
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i].group(g) == truths[i].group(g)) ++hits;
    acc.per_group[static_cast<std::size_t>(g)] = static_cast<double>(hits) / static_cast<double>(preds.size());
    sum += acc.per_group[static_cast<std::size_t>(g)];
  }
  acc.average = sum / kGroupCount;
  return acc;
}

}  // namespace cardiolabel
