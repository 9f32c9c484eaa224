#pragma once

#include <string>
#include <vector>

#include "cardiolabel/network.hpp"
#include "cardiolabel/pcg.hpp"

namespace cardiolabel {

/** Absolute input gradient of one group logit, aligned with the sample. */
struct SaliencyMap {
  Tensor values;  // {N, L}, entries >= 0
  std::string target_group;
  int target_class = 0;
};

struct ContributionVector {
  std::vector<double> percentages;  // one per segment, sums to 100
  bool uniform_fallback = false;    // set when the map was all zero
};

/**
 * |d logit / d input| for the chosen group's class logit (pre-softmax),
 * mapped back from the square reshape to the sample's {N, L} layout.
 * class_index -1 targets the group's predicted class (argmax, ties to the
 * lowest index). Parameter gradient buffers are cleared as a side effect of
 * the backward pass. Throws on an out-of-range group or class.
 */
SaliencyMap input_saliency(EnsembleParams& params, const Sample& sample, int group, int class_index = -1);

/**
 * Per-segment share of total saliency: 100 * row_sum / total. An all-zero
 * map yields the uniform split 100/N with uniform_fallback set.
 */
ContributionVector segment_contributions(const SaliencyMap& map);

/**
 * Writes one CSV: a '#' header naming the target group and class, then one
 * row per segment holding the segment index, its contribution percentage,
 * and the L saliency values, all printed with 12 significant digits.
 * Throws when the file cannot be opened.
 */
void export_saliency(const SaliencyMap& map, const ContributionVector& contributions, const std::string& path);

}  // namespace cardiolabel
