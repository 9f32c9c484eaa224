#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "cardiolabel/config.hpp"
#include "cardiolabel/dataset.hpp"
#include "cardiolabel/synthetic.hpp"

namespace cardiolabel {

/**
 * CLI entry points. Everything below is deterministic given the run
 * config; the single root seed fans out as
 *   make_splits:                  seed
 *   window augmentation, rec r:   seed + 1000 + r
 *   model init, model_index mi:   seed + 101 + mi
 *   epoch shuffling, model mi:    seed + 202 + mi
 * with model_index 0 for the final holdout-validated model, 1 + location
 * ordinal for position-dependent models, and 10 + 5 * fold (plus the
 * location ordinal under the position-dependent regime) for the
 * cross-validation fold models.
 *
 * Artifacts land in config.out_dir:
 *   prepare: samples.bin, recordings.bin, splits.json
 *   train:   checkpoint.bin + history.csv (position-independent) or
 *            checkpoint_<LOC>.bin + history_<LOC>.csv per location
 *   eval:    metrics.csv (fold rows 1..k, then Avg, then TD),
 *            patient_accuracy.csv (fold rows 1..k, then Avg)
 *   saliency: saliency_<patient>_<LOC>_w<window>.csv
 */

// Renders the synthetic dataset to WAV/TSV/label files plus manifest.json
// under out_dir, the layout load_dataset expects.
void cmd_synth(const SynthSpec& spec, std::uint64_t seed, const std::string& out_dir, std::ostream& log);

// Manifest -> prepared recordings -> windowed samples -> split plan.
PrepareStats cmd_prepare(const RunConfig& config, std::ostream& log);

// Trains the deployment model(s) on all non-holdout samples, validating on
// the holdout slice, and writes checkpoints plus history CSVs.
void cmd_train(const RunConfig& config, std::ostream& log);

// k-fold cross-validation (fold models trained in memory) plus the holdout
// row of the trained deployment model. Writes metrics.csv and
// patient_accuracy.csv.
void cmd_eval(const RunConfig& config, std::ostream& log);

// Patient-level mode-vote prediction; prints one "Group: class" line per
// label group and returns the predicted set.
LabelSet cmd_predict(const RunConfig& config, const std::string& patient_id, std::ostream& out);

// Input-gradient saliency for every window of the patient's voting
// recordings, one CSV per window. group is a label group name.
void cmd_saliency(const RunConfig& config, const std::string& patient_id, const std::string& group, std::ostream& log);

}  // namespace cardiolabel
