#include "cardiolabel/labels.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace cardiolabel {

namespace {

constexpr std::array<const char*, kLocationCount> kLocationNames{"AV", "PV", "TV", "MV", "Phc"};

constexpr std::array<const char*, kGroupCount> kGroupNames{"timing", "pitch", "quality", "shape", "grading"};

// Class index 0 is always Normal; murmur classes follow the order of the
// source taxonomy tables.
const std::array<std::vector<std::string>, kGroupCount> kClassNames{{
    {"Normal", "Early-systolic", "Mid-systolic", "Late-systolic", "Holosystolic"},
    {"Normal", "Low", "Medium", "High"},
    {"Normal", "Harsh", "Blowing", "Musical"},
    {"Normal", "Plateau", "Decrescendo", "Diamond", "Crescendo"},
    {"Normal", "I/VI", "II/VI", "III/VI"},
}};

std::string canon(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '-' || c == ' ') {
      out.push_back('-');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

}  // namespace

std::string location_name(Location loc) {
  const int i = static_cast<int>(loc);
  if (i < 0 || i >= kLocationCount) throw std::runtime_error("invalid location value " + std::to_string(i));
  return kLocationNames[static_cast<std::size_t>(i)];
}

Location location_from_name(const std::string& name) {
  for (int i = 0; i < kLocationCount; ++i) {
    if (name == kLocationNames[static_cast<std::size_t>(i)]) return static_cast<Location>(i);
  }
  throw std::runtime_error("unknown auscultation location '" + name + "'");
}

int LabelSet::group(int g) const {
  switch (g) {
    case 0: return timing;
    case 1: return pitch;
    case 2: return quality;
    case 3: return shape;
    case 4: return grading;
    default: throw std::runtime_error("label group index " + std::to_string(g) + " out of range");
  }
}

void LabelSet::set_group(int g, int value) {
  switch (g) {
    case 0: timing = value; break;
    case 1: pitch = value; break;
    case 2: quality = value; break;
    case 3: shape = value; break;
    case 4: grading = value; break;
    default: throw std::runtime_error("label group index " + std::to_string(g) + " out of range");
  }
}

bool LabelSet::consistent() const {
  int nonzero = 0;
  for (int g = 0; g < kGroupCount; ++g) nonzero += group(g) != 0;
  return nonzero == 0 || nonzero == kGroupCount;
}

void validate_labels(const LabelSet& labels) {
  for (int g = 0; g < kGroupCount; ++g) {
    const int v = labels.group(g);
    if (v < 0 || v >= kGroupWidths[static_cast<std::size_t>(g)])
      throw std::runtime_error("label group '" + group_name(g) + "' value " + std::to_string(v) + " outside [0," +
                               std::to_string(kGroupWidths[static_cast<std::size_t>(g)] - 1) + "]");
  }
}

std::string group_name(int g) {
  if (g < 0 || g >= kGroupCount) throw std::runtime_error("label group index " + std::to_string(g) + " out of range");
  return kGroupNames[static_cast<std::size_t>(g)];
}

int group_index(const std::string& name) {
  for (int g = 0; g < kGroupCount; ++g) {
    if (name == kGroupNames[static_cast<std::size_t>(g)]) return g;
  }
  throw std::runtime_error("unknown label group '" + name + "'");
}

std::string class_name(int g, int value) {
  if (g < 0 || g >= kGroupCount) throw std::runtime_error("label group index " + std::to_string(g) + " out of range");
  const auto& names = kClassNames[static_cast<std::size_t>(g)];
  if (value < 0 || value >= static_cast<int>(names.size()))
    throw std::runtime_error("class value " + std::to_string(value) + " out of range for group '" + group_name(g) + "'");
  return names[static_cast<std::size_t>(value)];
}

int class_from_name(int g, const std::string& name) {
  if (g < 0 || g >= kGroupCount) throw std::runtime_error("label group index " + std::to_string(g) + " out of range");
  const std::string key = canon(name);
  if (key == "nan") return 0;
  const auto& names = kClassNames[static_cast<std::size_t>(g)];
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (key == canon(names[i])) return static_cast<int>(i);
  }
  throw std::runtime_error("unknown class '" + name + "' for label group '" + group_name(g) + "'");
}

std::array<double, kLabelDims> encode_labels(const LabelSet& labels) {
  validate_labels(labels);
  std::array<double, kLabelDims> out{};
  int offset = 0;
  for (int g = 0; g < kGroupCount; ++g) {
    out[static_cast<std::size_t>(offset + labels.group(g))] = 1.0;
    offset += kGroupWidths[static_cast<std::size_t>(g)];
  }
  return out;
}

LabelSet decode_labels(std::span<const double> scores) {
  if (scores.size() != kLabelDims)
    throw std::runtime_error("decode_labels expects " + std::to_string(kLabelDims) + " scores, got " + std::to_string(scores.size()));
  LabelSet out;
  int offset = 0;
  for (int g = 0; g < kGroupCount; ++g) {
    const int width = kGroupWidths[static_cast<std::size_t>(g)];
    int best = 0;
    for (int i = 1; i < width; ++i) {
      if (scores[static_cast<std::size_t>(offset + i)] > scores[static_cast<std::size_t>(offset + best)]) best = i;
    }
    out.set_group(g, best);
    offset += width;
  }
  return out;
}

std::string murmur_status_name(MurmurStatus s) {
  switch (s) {
    case MurmurStatus::Present: return "Present";
    case MurmurStatus::Absent: return "Absent";
    case MurmurStatus::Unknown: return "Unknown";
  }
  throw std::runtime_error("invalid murmur status");
}

MurmurStatus murmur_status_from_name(const std::string& name) {
  if (name == "Present") return MurmurStatus::Present;
  if (name == "Absent") return MurmurStatus::Absent;
  if (name == "Unknown") return MurmurStatus::Unknown;
  throw std::runtime_error("unknown murmur status '" + name + "'");
}

void validate_patient_labels(const PatientLabels& p) {
  validate_labels(p.label_set);
  if (p.murmur == MurmurStatus::Absent && p.label_set.murmur_present())
    throw std::runtime_error("patient " + p.patient_id + ": murmur Absent but label set is not all-zero");
  if (p.murmur == MurmurStatus::Present && !(p.label_set.consistent() && p.label_set.murmur_present()))
    throw std::runtime_error("patient " + p.patient_id + ": murmur Present requires all five groups nonzero");
}

}  // namespace cardiolabel
