#pragma once

#include <array>
#include <span>
#include <vector>

#include "cardiolabel/labels.hpp"

namespace cardiolabel {

struct GroupMetrics {
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  std::array<GroupMetrics, kGroupCount> groups;
  GroupMetrics macro;  // unweighted mean of the five groups, per field
};

/**
 * One-vs-rest metrics per label group. Within a group, every class value
 * that appears in either the truths or the predictions contributes a
 * one-vs-rest precision / sensitivity / specificity, each with the 0/0 -> 0
 * convention; the group score is their unweighted mean. Group F1 is the
 * harmonic mean of group precision and group sensitivity (0 when both are
 * 0). The macro report averages the five groups field by field.
 */
MetricsReport compute_metrics(std::span<const LabelSet> truths, std::span<const LabelSet> preds);

/**
 * Most frequent value; ties break toward the smallest value. Empty input
 * returns 0 (the murmur-absent class).
 */
int mode_vote(std::span<const int> votes);

// mode_vote per label group over whole LabelSets.
LabelSet mode_vote_labels(std::span<const LabelSet> votes);

}  // namespace cardiolabel
