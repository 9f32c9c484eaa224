#pragma once

#include <cstdint>
#include <string>

#include "cardiolabel/network.hpp"
#include "cardiolabel/synthetic.hpp"
#include "cardiolabel/train.hpp"

namespace cardiolabel {

// Four position-specific models, or one model pooled across positions.
enum class Regime { PositionDependent, PositionIndependent };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& name);

/**
 * One flat run configuration covering the network, the training loop, and
 * the artifact paths. Every source of randomness in a run derives from the
 * single root seed here; the derivations are documented in commands.hpp.
 */
struct RunConfig {
  NetConfig net;
  AdamConfig adam;
  int epochs = 30;
  int batch_size = 32;
  int patience = 0;
  int k_folds = 10;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
  Regime regime = Regime::PositionIndependent;
  std::string manifest;
  std::string out_dir;

  bool operator==(const RunConfig&) const = default;
};

/**
 * Parses `key = value` lines ('#' starts a comment, blank lines ignored).
 * Recognized keys:
 *   segment_count, segment_length, block_depths (comma-separated), growth,
 *   lambda, lr, beta1, beta2, epsilon, epochs, batch_size, patience,
 *   k_folds, holdout_fraction, seed, regime (position_dependent |
 *   position_independent), manifest, out_dir
 * Unknown keys, duplicate keys, malformed values, and out-of-range values
 * are all rejected with the offending key named.
 */
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Canonical one-key-per-line rendering; parse_run_config(render(c)) == c.
std::string render_run_config(const RunConfig& config);

/**
 * Same flat format for the synthetic generator:
 *   patients, murmur_prevalence, segments_per_recording, noise_level,
 *   sample_rate_hz, locations (comma-separated location names)
 */
SynthSpec parse_synth_spec(const std::string& text);
SynthSpec load_synth_spec(const std::string& path);

}  // namespace cardiolabel
