#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "cardiolabel/labels.hpp"

using namespace cardiolabel;

TEST_SUITE_BEGIN("labels");

TEST_CASE("group widths sum to the 22-dim encoding") {
  int total = 0;
  for (int w : kGroupWidths) total += w;
  CHECK(total == kLabelDims);
  CHECK(kLabelDims == 22);
}

TEST_CASE("all-normal encodes to ones at the block starts") {
  const auto v = encode_labels(LabelSet{});
  const std::vector<int> expected{0, 5, 9, 13, 18};
  for (int i = 0; i < kLabelDims; ++i) {
    const bool hot = std::find(expected.begin(), expected.end(), i) != expected.end();
    CHECK(v[static_cast<std::size_t>(i)] == (hot ? 1.0 : 0.0));
  }
}

TEST_CASE("encode/decode roundtrip over all 1600 label sets") {
  int count = 0;
  for (int t = 0; t < 5; ++t)
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q)
        for (int s = 0; s < 5; ++s)
          for (int g = 0; g < 4; ++g) {
            const LabelSet in{t, p, q, s, g};
            const auto enc = encode_labels(in);
            double ones = 0;
            for (double x : enc) ones += x;
            CHECK(ones == 5.0);
            CHECK(decode_labels(enc) == in);
            ++count;
          }
  CHECK(count == 1600);
}

TEST_CASE("decode takes per-block argmax with low-index ties") {
  std::vector<double> scores(22, 0.0);
  scores[0] = 0.2;
  scores[1] = 0.2;
  scores[2] = 0.5;
  scores[3] = 0.05;
  scores[4] = 0.05;
  CHECK(decode_labels(scores).timing == 2);

  std::vector<double> flat(22, 0.25);
  const LabelSet all_ties = decode_labels(flat);
  CHECK(all_ties == LabelSet{});
}

TEST_CASE("decode rejects wrong lengths") {
  std::vector<double> v(21, 0.0);
  CHECK_THROWS_AS(decode_labels(v), std::runtime_error);
}

TEST_CASE("encode rejects out-of-range groups") {
  CHECK_THROWS_AS(encode_labels(LabelSet{5, 0, 0, 0, 0}), std::runtime_error);
  CHECK_THROWS_AS(encode_labels(LabelSet{0, 0, 0, 0, -1}), std::runtime_error);
  CHECK_THROWS_AS(encode_labels(LabelSet{0, 4, 0, 0, 0}), std::runtime_error);
}

TEST_CASE("consistency rule distinguishes mixed labelings") {
  CHECK(LabelSet{}.consistent());
  CHECK(LabelSet{1, 2, 3, 4, 1}.consistent());
  CHECK_FALSE(LabelSet{1, 0, 0, 0, 0}.consistent());
  CHECK_FALSE(LabelSet{1, 2, 3, 4, 0}.consistent());
}

TEST_CASE("class names roundtrip including the nan marker") {
  for (int g = 0; g < kGroupCount; ++g) {
    for (int v = 0; v < kGroupWidths[static_cast<std::size_t>(g)]; ++v) {
      CHECK(class_from_name(g, class_name(g, v)) == v);
    }
    CHECK(class_from_name(g, "nan") == 0);
  }
  CHECK(class_from_name(0, "Early systolic") == 1);  // space/hyphen equivalence
  CHECK(class_from_name(0, "holosystolic") == 4);
  CHECK(class_from_name(4, "II/VI") == 2);
  CHECK_THROWS_AS(class_from_name(1, "Ultra"), std::runtime_error);
}

TEST_CASE("locations parse and print") {
  CHECK(location_from_name("AV") == Location::AV);
  CHECK(location_from_name("Phc") == Location::Phc);
  CHECK(location_name(Location::MV) == "MV");
  CHECK_THROWS_AS(location_from_name("XX"), std::runtime_error);
}

TEST_CASE("patient label validation enforces murmur consistency") {
  PatientLabels p;
  p.patient_id = "10001";
  p.murmur = MurmurStatus::Absent;
  CHECK_NOTHROW(validate_patient_labels(p));

  p.label_set = LabelSet{1, 1, 1, 1, 1};
  CHECK_THROWS_AS(validate_patient_labels(p), std::runtime_error);

  p.murmur = MurmurStatus::Present;
  CHECK_NOTHROW(validate_patient_labels(p));

  p.label_set.grading = 0;
  CHECK_THROWS_AS(validate_patient_labels(p), std::runtime_error);
}

TEST_SUITE_END();
