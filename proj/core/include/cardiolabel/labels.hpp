#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cardiolabel {

// Auscultation points. Phc appears in source data but carries no
// position-dependent model; see train_eval.
enum class Location : int { AV = 0, PV = 1, TV = 2, MV = 3, Phc = 4 };

constexpr int kLocationCount = 5;
// Locations that participate in the position-dependent regime.
constexpr std::array<Location, 4> kModeledLocations{Location::AV, Location::PV, Location::TV, Location::MV};

std::string location_name(Location loc);
Location location_from_name(const std::string& name);

// Five exclusive label groups; within each group value 0 means murmur absent.
constexpr int kGroupCount = 5;
constexpr std::array<int, kGroupCount> kGroupWidths{5, 4, 4, 5, 4};
constexpr int kLabelDims = 22;  // 5+4+4+5+4

struct LabelSet {
  int timing = 0;   // 0..4: Normal, Early-systolic, Mid-systolic, Late-systolic, Holosystolic
  int pitch = 0;    // 0..3: Normal, Low, Medium, High
  int quality = 0;  // 0..3: Normal, Harsh, Blowing, Musical
  int shape = 0;    // 0..4: Normal, Plateau, Decrescendo, Diamond, Crescendo
  int grading = 0;  // 0..3: Normal, I/VI, II/VI, III/VI

  int group(int g) const;
  void set_group(int g, int value);

  bool murmur_present() const { return timing || pitch || quality || shape || grading; }
  // Dataset-level consistency rule: a murmur labelling populates every group.
  // Enforced at ingestion; predictions are allowed to violate it.
  bool consistent() const;

  bool operator==(const LabelSet&) const = default;
};

// Throws when any group value is out of range.
void validate_labels(const LabelSet& labels);

std::string group_name(int g);
int group_index(const std::string& name);

// class_name(g, 0) == "Normal" for every group.
std::string class_name(int g, int value);
// Accepts canonical names case-insensitively, treats ' ' and '-' alike,
// and maps "nan" (the murmur-absent marker in label files) to 0.
int class_from_name(int g, const std::string& name);

// Concatenated one-hot blocks of widths (5,4,4,5,4), exactly five ones.
std::array<double, kLabelDims> encode_labels(const LabelSet& labels);

// Per-block argmax over soft scores; ties break toward the lowest index.
LabelSet decode_labels(std::span<const double> scores);

enum class MurmurStatus { Present, Absent, Unknown };

std::string murmur_status_name(MurmurStatus s);
MurmurStatus murmur_status_from_name(const std::string& name);

struct PatientLabels {
  std::string patient_id;
  MurmurStatus murmur = MurmurStatus::Absent;
  std::set<Location> audible_locations;
  LabelSet label_set;
};

// Enforces the PatientLabels invariants (Absent => all-zero, Present => all-nonzero).
void validate_patient_labels(const PatientLabels& p);

}  // namespace cardiolabel
