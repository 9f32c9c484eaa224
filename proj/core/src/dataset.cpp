#include "cardiolabel/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>

#include "bytes.hpp"
#include "cardiolabel/wav.hpp"
#include "kv.hpp"

namespace cardiolabel {

namespace {

using json = nlohmann::json;

constexpr std::uint32_t kPreparedVersion = 1;

std::string read_text_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace

Manifest parse_manifest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("manifest: malformed JSON: ") + e.what());
  }
  Manifest m;
  try {
    m.labels_dir = j.at("labels_dir").get<std::string>();
    for (const auto& r : j.at("recordings")) {
      ManifestEntry e;
      e.patient_id = r.at("patient").get<std::string>();
      e.location = location_from_name(r.at("location").get<std::string>());
      e.audio = r.at("audio").get<std::string>();
      e.tsv = r.at("tsv").get<std::string>();
      m.recordings.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("manifest: missing or mistyped field: ") + e.what());
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  Manifest m = parse_manifest(read_text_file(path));
  m.root = std::filesystem::path(path).parent_path().string();
  return m;
}

std::string manifest_to_json(const Manifest& manifest) {
  json j;
  j["labels_dir"] = manifest.labels_dir;
  j["recordings"] = json::array();
  for (const auto& r : manifest.recordings)
    j["recordings"].push_back(json{{"patient", r.patient_id},
                                   {"location", location_name(r.location)},
                                   {"audio", r.audio},
                                   {"tsv", r.tsv}});
  return j.dump(2) + "\n";
}

PatientLabels parse_patient_labels(const std::string& text, const std::string& patient_id) {
  PatientLabels p;
  p.patient_id = patient_id;
  bool murmur_seen = false;
  bool group_seen[kGroupCount] = {};
  bool audible_seen = false;

  for (const auto& [key, value] : detail::parse_kv_pairs(text, "labels")) {
    if (key == "murmur") {
      if (murmur_seen) throw std::runtime_error("labels: duplicate key 'murmur'");
      p.murmur = murmur_status_from_name(value);
      murmur_seen = true;
    } else if (key == "audible") {
      if (audible_seen) throw std::runtime_error("labels: duplicate key 'audible'");
      for (const auto& item : detail::split_commas(value)) p.audible_locations.insert(location_from_name(item));
      audible_seen = true;
    } else {
      int g = -1;
      try {
        g = group_index(key);
      } catch (const std::exception&) {
        throw std::runtime_error("labels: unknown key '" + key + "'");
      }
      if (group_seen[g]) throw std::runtime_error("labels: duplicate key '" + key + "'");
      p.label_set.set_group(g, class_from_name(g, value));
      group_seen[g] = true;
    }
  }

  if (!murmur_seen) throw std::runtime_error("labels: missing key 'murmur' for patient " + patient_id);
  if (p.murmur == MurmurStatus::Present) {
    for (int g = 0; g < kGroupCount; ++g)
      if (!group_seen[g]) throw std::runtime_error("labels: Present patient " + patient_id + " lacks '" + group_name(g) + "'");
    if (!audible_seen) throw std::runtime_error("labels: Present patient " + patient_id + " lacks 'audible'");
  }
  validate_patient_labels(p);
  return p;
}

std::string render_patient_labels(const PatientLabels& labels) {
  std::ostringstream out;
  out << "murmur = " << murmur_status_name(labels.murmur) << "\n";
  if (labels.murmur == MurmurStatus::Present) {
    for (int g = 0; g < kGroupCount; ++g)
      out << group_name(g) << " = " << class_name(g, labels.label_set.group(g)) << "\n";
    out << "audible = ";
    bool first = true;
    for (Location loc : labels.audible_locations) {
      out << (first ? "" : ",") << location_name(loc);
      first = false;
    }
    out << "\n";
  }
  return out.str();
}

Dataset load_dataset(const std::string& manifest_path) {
  const Manifest manifest = load_manifest(manifest_path);
  const std::filesystem::path root(manifest.root);

  Dataset ds;
  std::map<std::string, std::size_t> patient_index;
  for (const auto& entry : manifest.recordings) {
    if (!patient_index.contains(entry.patient_id)) {
      const auto label_path = root / manifest.labels_dir / (entry.patient_id + ".txt");
      patient_index[entry.patient_id] = ds.patients.size();
      ds.patients.push_back(parse_patient_labels(read_text_file(label_path.string()), entry.patient_id));
    }
    if (ds.patients[patient_index[entry.patient_id]].murmur == MurmurStatus::Unknown) continue;

    RawRecording rec;
    auto [audio, intervals] = parse_recording(read_file_bytes((root / entry.audio).string()),
                                              read_text_file((root / entry.tsv).string()));
    audio.patient_id = entry.patient_id;
    audio.location = entry.location;
    rec.audio = std::move(audio);
    rec.intervals = std::move(intervals);
    ds.recordings.push_back(std::move(rec));
  }

  std::erase_if(ds.patients, [](const PatientLabels& p) { return p.murmur == MurmurStatus::Unknown; });
  return ds;
}

std::vector<PreparedRecording> prepare_recordings(const Dataset& dataset, std::int64_t segment_length,
                                                  PrepareStats* stats) {
  std::map<std::string, const PatientLabels*> by_id;
  for (const auto& p : dataset.patients) by_id[p.patient_id] = &p;

  std::vector<PreparedRecording> out;
  for (const auto& rec : dataset.recordings) {
    const auto it = by_id.find(rec.audio.patient_id);
    if (it == by_id.end())
      throw std::runtime_error("dataset: recording for patient " + rec.audio.patient_id + " has no labels");
    const PatientLabels& labels = *it->second;

    PreparedRecording prep;
    prep.patient_id = rec.audio.patient_id;
    prep.location = rec.audio.location;
    prep.murmur_audible =
        labels.murmur == MurmurStatus::Present && labels.audible_locations.contains(rec.audio.location);
    for (const auto& seg : extract_s1_systolic_segments(rec.audio, rec.intervals))
      prep.segments.push_back(standardize(resample_to_length(seg, segment_length)));

    if (stats) {
      ++stats->recordings;
      stats->segments += static_cast<std::int64_t>(prep.segments.size());
      if (prep.segments.empty()) ++stats->dropped_recordings;
    }
    if (!prep.segments.empty()) out.push_back(std::move(prep));
  }
  return out;
}

std::vector<Sample> window_dataset(const std::vector<PreparedRecording>& recordings,
                                   const std::vector<PatientLabels>& patients, std::int64_t segment_count,
                                   std::uint64_t seed, PrepareStats* stats) {
  std::map<std::string, const PatientLabels*> by_id;
  for (const auto& p : patients) by_id[p.patient_id] = &p;

  std::vector<Sample> out;
  for (std::size_t r = 0; r < recordings.size(); ++r) {
    const auto& rec = recordings[r];
    const auto it = by_id.find(rec.patient_id);
    if (it == by_id.end()) throw std::runtime_error("dataset: recording for patient " + rec.patient_id + " has no labels");

    const LabelSet labels = rec.murmur_audible ? it->second->label_set : LabelSet{};
    auto samples = build_samples(rec.segments, labels, segment_count, seed + r);
    for (auto& s : samples) {
      s.patient_id = rec.patient_id;
      s.location = rec.location;
      if (stats) {
        ++stats->samples;
        ++stats->samples_per_location[static_cast<std::size_t>(s.location)];
        if (s.labels.murmur_present()) ++stats->murmur_samples;
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize_prepared(const std::vector<PreparedRecording>& recordings,
                                             const std::vector<PatientLabels>& patients) {
  detail::ByteWriter w;
  w.raw("CLPR", 4);
  w.u32(kPreparedVersion);

  w.i64(static_cast<std::int64_t>(recordings.size()));
  for (const auto& rec : recordings) {
    w.str(rec.patient_id);
    w.u8(static_cast<std::uint8_t>(rec.location));
    w.u8(rec.murmur_audible ? 1 : 0);
    w.i64(static_cast<std::int64_t>(rec.segments.size()));
    for (const auto& seg : rec.segments) {
      w.i64(static_cast<std::int64_t>(seg.size()));
      for (double v : seg) w.f64(v);
    }
  }

  w.i64(static_cast<std::int64_t>(patients.size()));
  for (const auto& p : patients) {
    w.str(p.patient_id);
    w.u8(p.murmur == MurmurStatus::Present ? 0 : p.murmur == MurmurStatus::Absent ? 1 : 2);
    w.u8(static_cast<std::uint8_t>(p.label_set.timing));
    w.u8(static_cast<std::uint8_t>(p.label_set.pitch));
    w.u8(static_cast<std::uint8_t>(p.label_set.quality));
    w.u8(static_cast<std::uint8_t>(p.label_set.shape));
    w.u8(static_cast<std::uint8_t>(p.label_set.grading));
    w.u8(static_cast<std::uint8_t>(p.audible_locations.size()));
    for (Location loc : p.audible_locations) w.u8(static_cast<std::uint8_t>(loc));
  }
  return std::move(w.out);
}

std::pair<std::vector<PreparedRecording>, std::vector<PatientLabels>> deserialize_prepared(
    std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "prepared store");
  r.expect_magic("CLPR");
  if (const auto v = r.u32(); v != kPreparedVersion)
    throw std::runtime_error("prepared store: unsupported version " + std::to_string(v));

  std::vector<PreparedRecording> recordings;
  const std::int64_t rec_count = r.i64();
  if (rec_count < 0) throw std::runtime_error("prepared store: negative recording count");
  recordings.reserve(static_cast<std::size_t>(rec_count));
  for (std::int64_t i = 0; i < rec_count; ++i) {
    PreparedRecording rec;
    rec.patient_id = r.str();
    const int loc = r.u8();
    if (loc < 0 || loc >= kLocationCount)
      throw std::runtime_error("prepared store: bad location code " + std::to_string(loc));
    rec.location = static_cast<Location>(loc);
    rec.murmur_audible = r.u8() != 0;
    const std::int64_t segs = r.i64();
    if (segs < 0) throw std::runtime_error("prepared store: negative segment count");
    rec.segments.resize(static_cast<std::size_t>(segs));
    for (auto& seg : rec.segments) {
      const std::int64_t len = r.i64();
      if (len < 0) throw std::runtime_error("prepared store: negative segment length");
      seg.resize(static_cast<std::size_t>(len));
      for (auto& v : seg) v = r.f64();
    }
    recordings.push_back(std::move(rec));
  }

  std::vector<PatientLabels> patients;
  const std::int64_t pat_count = r.i64();
  if (pat_count < 0) throw std::runtime_error("prepared store: negative patient count");
  patients.reserve(static_cast<std::size_t>(pat_count));
  for (std::int64_t i = 0; i < pat_count; ++i) {
    PatientLabels p;
    p.patient_id = r.str();
    const int m = r.u8();
    if (m < 0 || m > 2) throw std::runtime_error("prepared store: bad murmur code " + std::to_string(m));
    p.murmur = m == 0 ? MurmurStatus::Present : m == 1 ? MurmurStatus::Absent : MurmurStatus::Unknown;
    p.label_set.timing = r.u8();
    p.label_set.pitch = r.u8();
    p.label_set.quality = r.u8();
    p.label_set.shape = r.u8();
    p.label_set.grading = r.u8();
    const int locs = r.u8();
    for (int l = 0; l < locs; ++l) {
      const int loc = r.u8();
      if (loc < 0 || loc >= kLocationCount)
        throw std::runtime_error("prepared store: bad location code " + std::to_string(loc));
      p.audible_locations.insert(static_cast<Location>(loc));
    }
    validate_patient_labels(p);
    patients.push_back(std::move(p));
  }
  r.finish();
  return {std::move(recordings), std::move(patients)};
}

}  // namespace cardiolabel
