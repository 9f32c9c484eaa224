#include "cardiolabel/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cardiolabel {

SaliencyMap input_saliency(EnsembleParams& params, const Sample& sample, int group, int class_index) {
  if (group < 0 || group >= kGroupCount)
    throw std::runtime_error("saliency: group " + std::to_string(group) + " out of range");
  const int width = kGroupWidths[static_cast<std::size_t>(group)];
  if (class_index < -1 || class_index >= width)
    throw std::runtime_error("saliency: class " + std::to_string(class_index) + " out of range for " + group_name(group));

  Trace t;
  const EnsembleForward f = ensemble_forward(t, params, sample.segments);

  int target = class_index;
  if (target == -1) {
    const auto& logits = t.value(f.group_logits[static_cast<std::size_t>(group)]).values();
    target = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }

  t.backward(t.pick(f.group_logits[static_cast<std::size_t>(group)], target));
  const Tensor& g = t.grad(f.input);  // {N,s,s,1}, same flat order as {N,L}
  for (ParamTensor* p : params.all()) p->zero_grad();

  SaliencyMap map;
  map.values = Tensor({sample.segments.dim(0), sample.segments.dim(1)});
  for (std::int64_t i = 0; i < g.size(); ++i) map.values[i] = std::abs(g[i]);
  map.target_group = group_name(group);
  map.target_class = target;
  return map;
}

ContributionVector segment_contributions(const SaliencyMap& map) {
  if (map.values.rank() != 2) throw std::runtime_error("saliency: map must be {N, L}");
  const std::int64_t n = map.values.dim(0);
  const std::int64_t l = map.values.dim(1);

  ContributionVector out;
  out.percentages.assign(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::int64_t j = 0; j < l; ++j) row += map.values.at({i, j});
    out.percentages[static_cast<std::size_t>(i)] = row;
    total += row;
  }

  if (total == 0.0) {
    out.uniform_fallback = true;
    std::fill(out.percentages.begin(), out.percentages.end(), 100.0 / static_cast<double>(n));
    return out;
  }
  for (double& p : out.percentages) p = 100.0 * p / total;
  return out;
}

void export_saliency(const SaliencyMap& map, const ContributionVector& contributions, const std::string& path) {
  const std::int64_t n = map.values.dim(0);
  const std::int64_t l = map.values.dim(1);
  if (contributions.percentages.size() != static_cast<std::size_t>(n))
    throw std::runtime_error("saliency: contribution count does not match the map");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("saliency: cannot write " + path);

  out << "# saliency target_group=" << map.target_group << " target_class=" << map.target_class << "\n";
  char buf[32];
  for (std::int64_t i = 0; i < n; ++i) {
    out << i;
    std::snprintf(buf, sizeof buf, "%.12g", contributions.percentages[static_cast<std::size_t>(i)]);
    out << ',' << buf;
    for (std::int64_t j = 0; j < l; ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", map.values.at({i, j}));
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("saliency: write failed for " + path);
}

}  // namespace cardiolabel
