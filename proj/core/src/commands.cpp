#include "cardiolabel/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cardiolabel/checkpoint.hpp"
#include "cardiolabel/metrics.hpp"
#include "cardiolabel/patient.hpp"
#include "cardiolabel/saliency.hpp"
#include "cardiolabel/sample_store.hpp"
#include "cardiolabel/train.hpp"
#include "cardiolabel/wav.hpp"

namespace cardiolabel {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string join(const std::string& dir, const std::string& leaf) { return (fs::path(dir) / leaf).string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

std::string read_text(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

// Seed fan-out; keep in sync with the table in commands.hpp.
std::uint64_t window_seed(const RunConfig& c) { return c.seed + 1000; }
std::uint64_t init_seed(const RunConfig& c, int model_index) { return c.seed + 101 + static_cast<std::uint64_t>(model_index); }
std::uint64_t shuffle_seed(const RunConfig& c, int model_index) { return c.seed + 202 + static_cast<std::uint64_t>(model_index); }
constexpr int kDeployModel = 0;
int location_model(Location loc) { return 1 + static_cast<int>(loc); }
// Folds reserve a stride of 5 so per-location fold models never collide.
int fold_model(std::size_t fold) { return 10 + 5 * static_cast<int>(fold); }

std::vector<Sample> gather(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(samples.at(i));
  return out;
}

std::vector<Sample> at_location(const std::vector<Sample>& samples, Location loc) {
  std::vector<Sample> out;
  for (const auto& s : samples)
    if (s.location == loc) out.push_back(s);
  return out;
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string text = "epoch,train_loss,train_f1,val_loss,val_f1\n";
  for (const auto& h : history)
    text += std::to_string(h.epoch) + "," + num(h.train_loss) + "," + num(h.train_f1) + "," + num(h.val_loss) + "," +
            num(h.val_f1) + "\n";
  return text;
}

TrainOptions train_options(const RunConfig& c, int model_index) {
  TrainOptions opt;
  opt.epochs = c.epochs;
  opt.batch_size = c.batch_size;
  opt.adam = c.adam;
  opt.lambda = c.net.lambda;
  opt.shuffle_seed = shuffle_seed(c, model_index);
  opt.patience = c.patience;
  return opt;
}

struct PreparedArtifacts {
  std::vector<Sample> samples;
  SplitPlan plan;
  std::vector<PreparedRecording> recordings;
  std::vector<PatientLabels> patients;
};

PreparedArtifacts load_artifacts(const RunConfig& c, bool with_recordings) {
  PreparedArtifacts a;
  const auto samples_path = join(c.out_dir, "samples.bin");
  if (!fs::exists(samples_path))
    throw std::runtime_error(samples_path + " not found; run `cardiolabel prepare` first");
  a.samples = load_samples(samples_path);
  a.plan = split_plan_from_json(read_text(join(c.out_dir, "splits.json")));
  if (with_recordings) {
    const auto prepared = deserialize_prepared(read_file_bytes(join(c.out_dir, "recordings.bin")));
    a.recordings = prepared.first;
    a.patients = prepared.second;
  }
  return a;
}

// The deployment checkpoint set written by cmd_train.
LocationModels load_deploy_models(const RunConfig& c) {
  LocationModels models;
  if (c.regime == Regime::PositionIndependent) {
    models.shared = load_checkpoint(join(c.out_dir, "checkpoint.bin")).params;
  } else {
    for (Location loc : kModeledLocations) {
      const auto path = join(c.out_dir, "checkpoint_" + location_name(loc) + ".bin");
      if (fs::exists(path)) models.by_location.emplace(loc, load_checkpoint(path).params);
    }
    if (models.by_location.empty())
      throw std::runtime_error("no checkpoint_<LOC>.bin files in " + c.out_dir + "; run `cardiolabel train` first");
  }
  return models;
}

LabelSet truth_for(const PatientLabels& p) {
  return p.murmur == MurmurStatus::Present ? p.label_set : LabelSet{};
}

std::vector<PreparedRecording> recordings_of(const std::vector<PreparedRecording>& recordings, const std::string& id) {
  std::vector<PreparedRecording> out;
  for (const auto& r : recordings)
    if (r.patient_id == id) out.push_back(r);
  return out;
}

// Predictions on a sample list routed through per-location models when the
// regime calls for them.
std::vector<LabelSet> predict_routed(LocationModels& models, const std::vector<Sample>& samples) {
  std::vector<LabelSet> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(predict_sample(models.model_for(s.location), s.segments).labels);
  return out;
}

GroupMetrics macro_of(const std::vector<Sample>& samples, std::span<const LabelSet> preds) {
  std::vector<LabelSet> truths;
  truths.reserve(samples.size());
  for (const auto& s : samples) truths.push_back(s.labels);
  return compute_metrics(truths, preds).macro;
}

std::string metrics_row(const std::string& label, const GroupMetrics& m) {
  return label + "," + num(m.precision) + "," + num(m.sensitivity) + "," + num(m.specificity) + "," + num(m.f1) + "\n";
}

// Trains the regime's model set for one training split in memory.
LocationModels train_fold_models(const RunConfig& c, const std::vector<Sample>& train_set,
                                 const std::vector<Sample>& val_set, int base_model_index, std::ostream& log,
                                 const std::string& tag) {
  LocationModels models;
  if (c.regime == Regime::PositionIndependent) {
    EnsembleParams params = init_params(c.net, init_seed(c, base_model_index));
    const auto result = train_model(params, train_set, val_set, train_options(c, base_model_index));
    log << tag << ": trained " << result.epochs_run << " epochs (" << result.stop_reason << ")\n";
    models.shared = std::move(params);
  } else {
    for (std::size_t li = 0; li < kModeledLocations.size(); ++li) {
      const Location loc = kModeledLocations[li];
      const auto train_loc = at_location(train_set, loc);
      if (train_loc.empty()) continue;
      const int mi = base_model_index + static_cast<int>(li);
      EnsembleParams params = init_params(c.net, init_seed(c, mi));
      const auto result = train_model(params, train_loc, at_location(val_set, loc), train_options(c, mi));
      log << tag << " " << location_name(loc) << ": trained " << result.epochs_run << " epochs (" << result.stop_reason
          << ")\n";
      models.by_location.emplace(loc, std::move(params));
    }
    if (models.by_location.empty()) throw std::runtime_error(tag + ": no location has training samples");
  }
  return models;
}

}  // namespace

void cmd_synth(const SynthSpec& spec, std::uint64_t seed, const std::string& out_dir, std::ostream& log) {
  const auto ds = generate_synthetic_dataset(spec, seed);

  fs::create_directories(fs::path(out_dir) / "wav");
  fs::create_directories(fs::path(out_dir) / "tsv");
  fs::create_directories(fs::path(out_dir) / "labels");

  Manifest manifest;
  for (std::size_t r = 0; r < ds.recordings.size(); ++r) {
    const auto& rec = ds.recordings[r];
    const std::string stem = rec.patient_id + "_" + location_name(rec.location);
    ManifestEntry entry;
    entry.patient_id = rec.patient_id;
    entry.location = rec.location;
    entry.audio = "wav/" + stem + ".wav";
    entry.tsv = "tsv/" + stem + ".tsv";

    write_file_bytes(join(out_dir, entry.audio), write_wav(rec.sample_rate_hz, rec.samples));
    std::ostringstream tsv;
    tsv.precision(17);
    for (const auto& iv : ds.intervals[r])
      tsv << iv.start_s << '\t' << iv.end_s << '\t' << static_cast<int>(iv.state) << '\n';
    write_text(join(out_dir, entry.tsv), tsv.str());
    manifest.recordings.push_back(std::move(entry));
  }

  for (const auto& p : ds.patients)
    write_text(join(out_dir, "labels/" + p.patient_id + ".txt"), render_patient_labels(p));
  write_text(join(out_dir, "manifest.json"), manifest_to_json(manifest));

  log << "synth: wrote " << ds.recordings.size() << " recordings for " << ds.patients.size() << " patients to "
      << out_dir << "\n";
}

PrepareStats cmd_prepare(const RunConfig& config, std::ostream& log) {
  if (config.manifest.empty()) throw std::runtime_error("prepare: config has no manifest path");
  if (config.out_dir.empty()) throw std::runtime_error("prepare: config has no out_dir");

  const Dataset dataset = load_dataset(config.manifest);
  fs::create_directories(config.out_dir);

  PrepareStats stats;
  const auto recordings = prepare_recordings(dataset, config.net.segment_length, &stats);
  const auto samples = window_dataset(recordings, dataset.patients, config.net.segment_count, window_seed(config), &stats);
  const auto plan = make_splits(samples, config.holdout_fraction, config.k_folds, config.seed);

  save_samples(samples, join(config.out_dir, "samples.bin"));
  write_file_bytes(join(config.out_dir, "recordings.bin"), serialize_prepared(recordings, dataset.patients));
  write_text(join(config.out_dir, "splits.json"), split_plan_to_json(plan));

  log << "prepare: " << stats.recordings << " recordings (" << stats.dropped_recordings << " dropped), "
      << stats.segments << " segments, " << stats.samples << " samples (" << stats.murmur_samples << " murmur, "
      << num(stats.samples == 0 ? 0.0 : static_cast<double>(stats.murmur_samples) / static_cast<double>(stats.samples))
      << " ratio)\n";
  for (int l = 0; l < kLocationCount; ++l)
    if (stats.samples_per_location[static_cast<std::size_t>(l)] > 0)
      log << "prepare: location " << location_name(static_cast<Location>(l)) << ": "
          << stats.samples_per_location[static_cast<std::size_t>(l)] << " samples\n";
  log << "prepare: holdout " << plan.holdout.size() << " samples, " << plan.folds.size() << " folds over "
      << plan.non_holdout().size() << "\n";
  return stats;
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  const auto a = load_artifacts(config, false);
  const auto train_all = gather(a.samples, a.plan.non_holdout());
  const auto holdout = gather(a.samples, a.plan.holdout);

  if (config.regime == Regime::PositionIndependent) {
    EnsembleParams params = init_params(config.net, init_seed(config, kDeployModel));
    const auto result = train_model(params, train_all, holdout, train_options(config, kDeployModel));
    save_checkpoint(join(config.out_dir, "checkpoint.bin"), params, init_seed(config, kDeployModel), result.history);
    write_text(join(config.out_dir, "history.csv"), history_csv(result.history));
    const auto& last = result.history.back();
    log << "train: " << result.epochs_run << " epochs (" << result.stop_reason << "), train F1 " << num(last.train_f1)
        << ", holdout F1 " << num(last.val_f1) << "\n";
    return;
  }

  bool any = false;
  for (Location loc : kModeledLocations) {
    const auto train_loc = at_location(train_all, loc);
    if (train_loc.empty()) {
      log << "train " << location_name(loc) << ": no samples, skipped\n";
      continue;
    }
    const int mi = location_model(loc);
    EnsembleParams params = init_params(config.net, init_seed(config, mi));
    const auto result = train_model(params, train_loc, at_location(holdout, loc), train_options(config, mi));
    save_checkpoint(join(config.out_dir, "checkpoint_" + location_name(loc) + ".bin"), params, init_seed(config, mi),
                    result.history);
    write_text(join(config.out_dir, "history_" + location_name(loc) + ".csv"), history_csv(result.history));
    const auto& last = result.history.back();
    log << "train " << location_name(loc) << ": " << result.epochs_run << " epochs (" << result.stop_reason
        << "), train F1 " << num(last.train_f1) << ", holdout F1 " << num(last.val_f1) << "\n";
    any = true;
  }
  if (!any) throw std::runtime_error("train: no location has training samples");
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  const auto a = load_artifacts(config, true);
  std::map<std::string, const PatientLabels*> patient_by_id;
  for (const auto& p : a.patients) patient_by_id[p.patient_id] = &p;

  const std::size_t k = a.plan.folds.size();
  std::string metrics_text = "fold,precision,sensitivity,specificity,f1\n";
  std::string accuracy_text = "fold,Timing,Pitch,Quality,Shape,Grading,Avg\n";
  GroupMetrics metric_sum;
  PatientAccuracy accuracy_sum;

  for (std::size_t f = 0; f < k; ++f) {
    const auto train_set = gather(a.samples, a.plan.fold_train(f));
    const auto fold_set = gather(a.samples, a.plan.folds[f]);
    auto models = train_fold_models(config, train_set, fold_set, fold_model(f), log, "eval fold " + std::to_string(f + 1));

    const auto preds = predict_routed(models, fold_set);
    const auto macro = macro_of(fold_set, preds);
    metrics_text += metrics_row(std::to_string(f + 1), macro);
    metric_sum.precision += macro.precision;
    metric_sum.sensitivity += macro.sensitivity;
    metric_sum.specificity += macro.specificity;
    metric_sum.f1 += macro.f1;

    // Patients with a sample in this fold, scored by the fold's models over
    // all their recordings.
    std::set<std::string> fold_patients;
    for (const auto& s : fold_set) fold_patients.insert(s.patient_id);
    std::vector<LabelSet> truths, votes;
    for (const auto& id : fold_patients) {
      const auto it = patient_by_id.find(id);
      if (it == patient_by_id.end()) throw std::runtime_error("eval: fold patient " + id + " has no stored labels");
      truths.push_back(truth_for(*it->second));
      votes.push_back(patient_level_predict(models, recordings_of(a.recordings, id)));
    }
    const auto acc = patient_accuracy(votes, truths);
    accuracy_text += std::to_string(f + 1);
    for (double g : acc.per_group) accuracy_text += "," + num(g);
    accuracy_text += "," + num(acc.average) + "\n";
    for (int g = 0; g < kGroupCount; ++g) accuracy_sum.per_group[static_cast<std::size_t>(g)] += acc.per_group[static_cast<std::size_t>(g)];
    accuracy_sum.average += acc.average;
    log << "eval fold " << f + 1 << ": macro F1 " << num(macro.f1) << ", patient avg " << num(acc.average) << " over "
        << fold_patients.size() << " patients\n";
  }

  const double kd = static_cast<double>(k);
  metrics_text += metrics_row("Avg", {metric_sum.precision / kd, metric_sum.sensitivity / kd,
                                      metric_sum.specificity / kd, metric_sum.f1 / kd});
  accuracy_text += "Avg";
  for (double g : accuracy_sum.per_group) accuracy_text += "," + num(g / kd);
  accuracy_text += "," + num(accuracy_sum.average / kd) + "\n";

  auto deploy = load_deploy_models(config);
  const auto holdout = gather(a.samples, a.plan.holdout);
  const auto holdout_preds = predict_routed(deploy, holdout);
  const auto td = macro_of(holdout, holdout_preds);
  metrics_text += metrics_row("TD", td);
  log << "eval TD: holdout macro F1 " << num(td.f1) << " over " << holdout.size() << " samples\n";

  write_text(join(config.out_dir, "metrics.csv"), metrics_text);
  write_text(join(config.out_dir, "patient_accuracy.csv"), accuracy_text);
}

LabelSet cmd_predict(const RunConfig& config, const std::string& patient_id, std::ostream& out) {
  const auto prepared = deserialize_prepared(read_file_bytes(join(config.out_dir, "recordings.bin")));
  const auto recs = recordings_of(prepared.first, patient_id);
  if (recs.empty()) throw std::runtime_error("predict: no recordings for patient " + patient_id);

  auto models = load_deploy_models(config);
  const LabelSet pred = patient_level_predict(models, recs);
  for (int g = 0; g < kGroupCount; ++g) {
    std::string name = group_name(g);
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    out << name << ": " << class_name(g, pred.group(g)) << "\n";
  }
  return pred;
}

void cmd_saliency(const RunConfig& config, const std::string& patient_id, const std::string& group, std::ostream& log) {
  const int g = group_index(group);
  const auto prepared = deserialize_prepared(read_file_bytes(join(config.out_dir, "recordings.bin")));
  const auto recs = recordings_of(prepared.first, patient_id);
  if (recs.empty()) throw std::runtime_error("saliency: no recordings for patient " + patient_id);

  auto models = load_deploy_models(config);

  // Same recording selection as the mode vote: audible ones when any exist.
  std::vector<PreparedRecording> selected;
  for (const auto& r : recs)
    if (r.murmur_audible) selected.push_back(r);
  if (selected.empty()) selected = recs;

  int written = 0;
  for (const auto& rec : selected) {
    EnsembleParams& model = models.model_for(rec.location);
    const auto windows = patient_windows(rec, model.config.segment_count);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const auto map = input_saliency(model, windows[w], g);
      const auto contributions = segment_contributions(map);
      const auto path = join(config.out_dir, "saliency_" + patient_id + "_" + location_name(rec.location) + "_w" +
                                                 std::to_string(w) + ".csv");
      export_saliency(map, contributions, path);
      ++written;
    }
  }
  log << "saliency: wrote " << written << " window maps for patient " << patient_id << " (group " << group << ")\n";
}

}  // namespace cardiolabel
