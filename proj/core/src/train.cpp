#include "cardiolabel/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace cardiolabel {

namespace {

void fisher_yates(std::vector<std::size_t>& a, std::mt19937_64& rng) {
  for (std::size_t i = a.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(a[i - 1], a[j]);
  }
}

double macro_f1(EnsembleParams& params, const std::vector<Sample>& samples) {
  std::vector<LabelSet> truths;
  truths.reserve(samples.size());
  for (const Sample& s : samples) truths.push_back(s.labels);
  const std::vector<LabelSet> preds = predict_all(params, samples);
  return compute_metrics(truths, preds).macro.f1;
}

double mean_loss(EnsembleParams& params, const std::vector<Sample>& samples, double lambda) {
  double total = 0.0;
  for (const Sample& s : samples) {
    Trace t;
    const EnsembleForward f = ensemble_forward(t, params, s.segments);
    total += joint_loss(t, f, s.labels, lambda).value().item();
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace

void AdamState::init(std::span<ParamTensor* const> params) {
  step_count = 0;
  pow1 = 1.0;
  pow2 = 1.0;
  m.clear();
  v.clear();
  m.reserve(params.size());
  v.reserve(params.size());
  for (const ParamTensor* p : params) {
    m.emplace_back(p->value.shape());
    v.emplace_back(p->value.shape());
  }
}

void adam_step(AdamState& state, std::span<ParamTensor* const> params) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::runtime_error("adam: state was initialized for a different parameter list");
  state.step_count += 1;
  state.pow1 *= state.config.beta1;
  state.pow2 *= state.config.beta2;
  const double c1 = 1.0 - state.pow1;
  const double c2 = 1.0 - state.pow2;
  const double b1 = state.config.beta1, b2 = state.config.beta2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamTensor& p = *params[i];
    if (!p.grad.same_shape(p.value)) throw std::runtime_error("adam: parameter '" + p.name + "' has no gradient");
    if (!state.m[i].same_shape(p.value))
      throw std::runtime_error("adam: state shape mismatch on parameter '" + p.name + "'");
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::int64_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      p.value[j] -= state.config.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.config.eps);
    }
  }
}

std::vector<std::size_t> SplitPlan::fold_train(std::size_t f) const {
  if (f >= folds.size()) throw std::runtime_error("split: fold index out of range");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (i == f) continue;
    out.insert(out.end(), folds[i].begin(), folds[i].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> SplitPlan::non_holdout() const {
  std::vector<std::size_t> out;
  for (const auto& fold : folds) out.insert(out.end(), fold.begin(), fold.end());
  std::sort(out.begin(), out.end());
  return out;
}

SplitPlan make_splits(const std::vector<Sample>& samples, double holdout_fraction, int k, std::uint64_t seed) {
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
    throw std::runtime_error("split: holdout fraction must lie in [0,1)");
  if (k < 1) throw std::runtime_error("split: need at least one fold");
  if (samples.empty()) throw std::runtime_error("split: no samples");

  using RecordingKey = std::pair<std::string, Location>;
  std::vector<RecordingKey> recordings;
  std::map<RecordingKey, std::vector<std::size_t>> members;
  std::map<Location, std::int64_t> location_counts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const RecordingKey key{samples[i].patient_id, samples[i].location};
    auto [it, fresh] = members.try_emplace(key);
    if (fresh) recordings.push_back(key);
    it->second.push_back(i);
    ++location_counts[samples[i].location];
  }

  std::map<Location, std::int64_t> target, assigned;
  for (const auto& [loc, count] : location_counts)
    target[loc] = static_cast<std::int64_t>(std::llround(holdout_fraction * static_cast<double>(count)));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> rec_order(recordings.size());
  for (std::size_t i = 0; i < rec_order.size(); ++i) rec_order[i] = i;
  fisher_yates(rec_order, rng);

  SplitPlan plan;
  std::vector<bool> held(samples.size(), false);
  for (const std::size_t r : rec_order) {
    const RecordingKey& key = recordings[r];
    const Location loc = key.second;
    if (assigned[loc] >= target[loc]) continue;
    for (const std::size_t i : members[key]) {
      plan.holdout.push_back(i);
      held[i] = true;
    }
    assigned[loc] += static_cast<std::int64_t>(members[key].size());
  }
  std::sort(plan.holdout.begin(), plan.holdout.end());

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!held[i]) rest.push_back(i);
  if (rest.size() < static_cast<std::size_t>(k))
    throw std::runtime_error("split: " + std::to_string(rest.size()) + " samples cannot fill " + std::to_string(k) +
                             " folds");

  fisher_yates(rest, rng);
  plan.folds.assign(static_cast<std::size_t>(k), {});
  for (std::size_t i = 0; i < rest.size(); ++i) plan.folds[i % static_cast<std::size_t>(k)].push_back(rest[i]);
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

std::string split_plan_to_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["holdout"] = plan.holdout;
  j["folds"] = plan.folds;
  return j.dump(2) + "\n";
}

SplitPlan split_plan_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("split: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("holdout") || !j.contains("folds"))
    throw std::runtime_error("split: JSON must carry 'holdout' and 'folds'");
  SplitPlan plan;
  try {
    plan.holdout = j.at("holdout").get<std::vector<std::size_t>>();
    plan.folds = j.at("folds").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("split: malformed index lists: ") + e.what());
  }
  std::set<std::size_t> seen;
  auto check_unique = [&seen](const std::vector<std::size_t>& xs) {
    for (const std::size_t x : xs)
      if (!seen.insert(x).second) throw std::runtime_error("split: index " + std::to_string(x) + " appears twice");
  };
  check_unique(plan.holdout);
  for (const auto& fold : plan.folds) check_unique(fold);
  return plan;
}

TrainResult train_model(EnsembleParams& params, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& val_set, const TrainOptions& options) {
  if (train_set.empty()) throw std::runtime_error("train: empty training set");
  if (options.epochs < 1) throw std::runtime_error("train: epochs must be >= 1");
  if (options.batch_size < 1) throw std::runtime_error("train: batch size must be >= 1");
  if (options.eval_every < 1) throw std::runtime_error("train: eval_every must be >= 1");

  const std::vector<ParamTensor*> ptrs = params.all();
  AdamState adam;
  adam.config = options.adam;
  adam.init(ptrs);

  std::mt19937_64 shuffle_rng(options.shuffle_seed);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int evals_since_improvement = 0;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    fisher_yates(order, shuffle_rng);
    double epoch_loss = 0.0;
    const std::size_t n = train_set.size();
    for (std::size_t start = 0, batch = 0; start < n; start += static_cast<std::size_t>(options.batch_size), ++batch) {
      const std::size_t bn = std::min(static_cast<std::size_t>(options.batch_size), n - start);
      for (ParamTensor* p : ptrs) p->zero_grad();
      double batch_loss = 0.0;
      for (std::size_t b = 0; b < bn; ++b) {
        const Sample& s = train_set[order[start + b]];
        Trace t;
        const EnsembleForward f = ensemble_forward(t, params, s.segments);
        const Var loss = joint_loss(t, f, s.labels, options.lambda);
        batch_loss += loss.value().item();
        t.backward(t.scale(loss, 1.0 / static_cast<double>(bn)));
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train: non-finite loss " + std::to_string(batch_loss) + " at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(batch) +
                                 "; check the learning rate and input scaling");
      adam_step(adam, ptrs);
      epoch_loss += batch_loss;
    }
    result.epochs_run = epoch;

    const bool record = epoch % options.eval_every == 0 || epoch == options.epochs;
    if (!record) continue;

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(n);
    stats.train_f1 = macro_f1(params, train_set);
    if (val_set.empty()) {
      stats.val_loss = std::numeric_limits<double>::quiet_NaN();
      stats.val_f1 = std::numeric_limits<double>::quiet_NaN();
    } else {
      stats.val_loss = mean_loss(params, val_set, options.lambda);
      stats.val_f1 = macro_f1(params, val_set);
    }
    result.history.push_back(stats);

    if (options.stop_at_train_f1 >= 0.0 && stats.train_f1 >= options.stop_at_train_f1) {
      result.stop_reason = "train_f1";
      return result;
    }
    if (options.stop_at_val_f1 >= 0.0 && !val_set.empty() && stats.val_f1 >= options.stop_at_val_f1) {
      result.stop_reason = "val_f1";
      return result;
    }
    if (options.patience > 0 && !val_set.empty()) {
      if (stats.val_loss < best_val_loss) {
        best_val_loss = stats.val_loss;
        evals_since_improvement = 0;
      } else if (++evals_since_improvement >= options.patience) {
        result.stop_reason = "patience";
        return result;
      }
    }
  }
  result.stop_reason = "epochs";
  return result;
}

std::vector<LabelSet> predict_all(EnsembleParams& params, const std::vector<Sample>& samples) {
  std::vector<LabelSet> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(predict_sample(params, s.segments).labels);
  return out;
}

}  // namespace cardiolabel
