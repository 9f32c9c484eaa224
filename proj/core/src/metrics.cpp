#include "cardiolabel/metrics.hpp"

#include <map>
#include <set>
#include <stdexcept>

namespace cardiolabel {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricsReport compute_metrics(std::span<const LabelSet> truths, std::span<const LabelSet> preds) {
  if (truths.size() != preds.size()) throw std::runtime_error("metrics: truth/prediction count mismatch");
  if (truths.empty()) throw std::runtime_error("metrics: empty input");

  MetricsReport report;
  for (int g = 0; g < kGroupCount; ++g) {
    std::set<int> classes;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      classes.insert(truths[i].group(g));
      classes.insert(preds[i].group(g));
    }
    double p_sum = 0.0, s_sum = 0.0, sp_sum = 0.0;
    for (int c : classes) {
      std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
      for (std::size_t i = 0; i < truths.size(); ++i) {
        const bool t = truths[i].group(g) == c;
        const bool p = preds[i].group(g) == c;
        if (t && p) ++tp;
        else if (!t && p) ++fp;
        else if (t && !p) ++fn;
        else ++tn;
      }
      p_sum += ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
      s_sum += ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
      sp_sum += ratio(static_cast<double>(tn), static_cast<double>(tn + fp));
    }
    GroupMetrics& m = report.groups[static_cast<std::size_t>(g)];
    const auto k = static_cast<double>(classes.size());
    m.precision = p_sum / k;
    m.sensitivity = s_sum / k;
    m.specificity = sp_sum / k;
    m.f1 = ratio(2.0 * m.precision * m.sensitivity, m.precision + m.sensitivity);
  }

  for (const GroupMetrics& m : report.groups) {
    report.macro.precision += m.precision / kGroupCount;
    report.macro.sensitivity += m.sensitivity / kGroupCount;
    report.macro.specificity += m.specificity / kGroupCount;
    report.macro.f1 += m.f1 / kGroupCount;
  }
  return report;
}

int mode_vote(std::span<const int> votes) {
  std::map<int, std::size_t> counts;
  for (int v : votes) ++counts[v];
  int best = 0;
  std::size_t best_count = 0;
  for (const auto& [value, count] : counts) {  // ascending keys: ties keep the smaller value
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

LabelSet mode_vote_labels(std::span<const LabelSet> votes) {
  LabelSet out;
  std::vector<int> column(votes.size());
  for (int g = 0; g < kGroupCount; ++g) {
    for (std::size_t i = 0; i < votes.size(); ++i) column[i] = votes[i].group(g);
    out.set_group(g, mode_vote(column));
  }
  return out;
}

}  // namespace cardiolabel
