#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cardiolabel/metrics.hpp"
#include "cardiolabel/network.hpp"
#include "cardiolabel/pcg.hpp"

namespace cardiolabel {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

/**
 * Bias-corrected Adam over a fixed parameter enumeration. Per step, for
 * every entry: m = b1*m + (1-b1)*g, v = b2*v + (1-b2)*g*g, then
 * theta -= lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps). The bias powers
 * b1^t, b2^t are maintained incrementally (pow1 *= b1 each step) so the
 * arithmetic is reproducible without libm power calls.
 */
struct AdamState {
  AdamConfig config;
  std::int64_t step_count = 0;
  double pow1 = 1.0, pow2 = 1.0;
  std::vector<Tensor> m, v;  // parallel to the enumeration passed to init

  void init(std::span<ParamTensor* const> params);
};

// Applies one update from the gradients currently stored on the parameters.
// Gradients are left untouched; the caller owns zero_grad().
void adam_step(AdamState& state, std::span<ParamTensor* const> params);

/**
 * Index-based split of a sample list: a holdout slice plus k folds covering
 * the rest. Recordings never straddle the holdout boundary.
 */
struct SplitPlan {
  std::vector<std::size_t> holdout;
  std::vector<std::vector<std::size_t>> folds;

  std::vector<std::size_t> fold_train(std::size_t f) const;  // all folds except f, ascending
  std::vector<std::size_t> non_holdout() const;              // ascending
};

/**
 * Holdout selection is per location at recording granularity: for each
 * location the target is round(fraction * samples at that location);
 * recordings, keyed by (patient_id, location) in first-appearance order, are
 * shuffled and assigned whole to the holdout until their location's target
 * is met. The remaining samples are shuffled and dealt round-robin into k
 * folds (position i goes to fold i % k).
 *
 * Pinned RNG protocol: std::mt19937_64(seed); both shuffles are descending
 * Fisher-Yates (for i from n-1 down to 1: j = rng() % (i+1), swap), first
 * the recording list, then the non-holdout sample list. Throws if fewer
 * non-holdout samples than folds remain.
 */
SplitPlan make_splits(const std::vector<Sample>& samples, double holdout_fraction, int k, std::uint64_t seed);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const std::string& text);

struct TrainOptions {
  int epochs = 30;
  int batch_size = 32;
  AdamConfig adam;
  double lambda = 1.0;
  std::uint64_t shuffle_seed = 0;
  int eval_every = 1;             // epochs between history rows
  double stop_at_train_f1 = -1.0; // >= 0 enables early stop on training macro F1
  double stop_at_val_f1 = -1.0;   // >= 0 enables early stop on validation macro F1
  int patience = 0;               // > 0 stops after this many evals without val loss improvement
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_f1 = 0.0;
  double val_loss = 0.0;  // NaN when no validation set
  double val_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int epochs_run = 0;
  std::string stop_reason;  // "epochs" | "train_f1" | "val_f1" | "patience"
};

/**
 * Minibatch training of one ensemble. Each epoch shuffles the
 * training indices (descending Fisher-Yates on a generator seeded once with
 * shuffle_seed, consumed across epochs in order), walks consecutive batches
 * (the trailing short batch included), and per batch accumulates mean-loss
 * gradients sample by sample before one adam_step. A non-finite loss halts
 * with a diagnostic naming epoch and batch. History rows are appended every
 * eval_every epochs and on the final epoch.
 */
TrainResult train_model(EnsembleParams& params, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& val_set, const TrainOptions& options);

// predict_sample over a list; convenience for metric computation.
std::vector<LabelSet> predict_all(EnsembleParams& params, const std::vector<Sample>& samples);

}  // namespace cardiolabel
