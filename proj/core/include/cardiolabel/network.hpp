#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cardiolabel/autodiff.hpp"
#include "cardiolabel/labels.hpp"
#include "cardiolabel/pcg.hpp"
#include "cardiolabel/tensor.hpp"

namespace cardiolabel {

/**
 * Shared segment encoder: a chain of DenseNet-style blocks, each followed by
 * a 2x2 average-pool transition. block_depths[i] is the number of
 * relu+3x3-conv layers in block i, every layer contributing `growth`
 * channels. Channel count after block i is therefore
 * prev + block_depths[i] * growth.
 */
struct EncoderConfig {
  std::vector<int> block_depths{2, 2};
  int growth = 8;

  bool operator==(const EncoderConfig&) const = default;
};

struct NetConfig {
  int segment_count = 10;           // N segments per sample
  std::int64_t segment_length = 1024;  // L; must be a perfect square s*s
  EncoderConfig encoder;
  double lambda = 1.0;              // weight of the global BCE term

  std::int64_t side() const;        // s = sqrt(L), throws if L is not square

  bool operator==(const NetConfig&) const = default;
};

void validate_config(const NetConfig& config);

// Spatial side and channel count of the encoder output for one segment.
struct MapShape {
  std::int64_t side = 0;
  std::int64_t channels = 0;
};
MapShape encoder_output_shape(const NetConfig& config);

struct ConvParam {
  ParamTensor kernel;
  ParamTensor bias;
};

/**
 * One per-group block: private encoder, 1x1 merge conv over the
 * channel-stacked segment maps, and an affine group head. No parameters are
 * shared across groups.
 */
struct GroupBlockParams {
  std::vector<ConvParam> encoder;  // all dense-block layers, application order
  ConvParam merge;                 // {1,1,N*Ce,Ce}
  ParamTensor head_w;              // {flat(head pool of merged map), group width}
  ParamTensor head_b;
};

struct EnsembleParams {
  NetConfig config;
  std::array<GroupBlockParams, kGroupCount> blocks;
  ParamTensor global_w;  // {5 * flat(merged map), 22}
  ParamTensor global_b;

  // Pinned enumeration order (blocks 0..4: encoder convs, merge, head; then
  // the global head). Optimizer state and checkpoints index by this order.
  std::vector<ParamTensor*> all();
  std::vector<const ParamTensor*> all() const;
};

/**
 * He initialization with a pinned draw protocol: std::mt19937_64(seed), and
 * every weight entry consumes two canonical doubles u1, u2 to form
 * sqrt(-2 * log1p(-u1)) * cos(2 pi u2) * sqrt(2 / fan_in), in the
 * enumeration order of all(). Biases are zero and consume no draws. fan_in
 * is kh*kw*Cin for convs and the input width for affine layers.
 */
EnsembleParams init_params(const NetConfig& config, std::uint64_t seed);

// {N,L} sample rows -> {N,s,s,1} row-major square images.
Tensor reshape_sample(const Tensor& segments, const NetConfig& config);

/** Tape handles exposed by one forward pass over a single sample. */
struct EnsembleForward {
  Var input;                                   // {N,s,s,1}; input.grad() feeds saliency
  std::array<Var, kGroupCount> merged;         // per-group merged map {He,We,Ce}
  std::array<Var, kGroupCount> group_logits;   // {width_g}
  std::array<Var, kGroupCount> group_probs;    // softmax of the logits
  Var global_logits;                           // {22}
};

/**
 * Builds the ensemble graph on `t`. Each group block encodes all N segments
 * in one batched pass (identical to per-segment application since images are
 * independent), stacks the segment maps on the channel axis, merges them with
 * a 1x1 conv, and feeds its head. The head average-pools once when both
 * spatial dims are even, then flattens into an affine layer. The global head
 * reads the concatenation of all five flattened merged maps.
 */
EnsembleForward ensemble_forward(Trace& t, EnsembleParams& params, const Tensor& segments);

/**
 * Sum of the five per-group softmax cross entropies against labels.group(g),
 * plus lambda times the mean sigmoid BCE of the global logits against
 * encode_labels(labels). With lambda == 0 the BCE term is not built at all,
 * so the global head stays off the tape.
 */
Var joint_loss(Trace& t, const EnsembleForward& f, const LabelSet& labels, double lambda);

struct Prediction {
  LabelSet labels;                        // per-group argmax, ties to the lowest index
  std::array<double, kLabelDims> probs;   // concatenated group softmaxes
  std::array<double, kLabelDims> global_scores;  // sigmoid of the global logits
};

Prediction predict_sample(EnsembleParams& params, const Tensor& segments);

}  // namespace cardiolabel
