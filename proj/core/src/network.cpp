#include "cardiolabel/network.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>

namespace cardiolabel {

namespace {

double canonical(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::int64_t NetConfig::side() const {
  const auto s = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(segment_length))));
  if (s < 2 || s * s != segment_length)
    throw std::runtime_error("network: segment_length " + std::to_string(segment_length) +
                             " is not the square of a side >= 2");
  return s;
}

void validate_config(const NetConfig& config) {
  if (config.segment_count < 1) throw std::runtime_error("network: segment_count must be >= 1");
  std::int64_t side = config.side();
  if (config.encoder.growth < 1) throw std::runtime_error("network: growth must be >= 1");
  if (config.lambda < 0.0) throw std::runtime_error("network: lambda must be >= 0");
  for (std::size_t b = 0; b < config.encoder.block_depths.size(); ++b) {
    if (config.encoder.block_depths[b] < 1) throw std::runtime_error("network: dense block depths must be >= 1");
    if (side % 2 != 0)
      throw std::runtime_error("network: transition pool " + std::to_string(b) + " needs an even side, got " +
                               std::to_string(side));
    side /= 2;
  }
}

MapShape encoder_output_shape(const NetConfig& config) {
  validate_config(config);
  std::int64_t side = config.side();
  std::int64_t channels = 1;
  for (int d : config.encoder.block_depths) {
    channels += static_cast<std::int64_t>(d) * config.encoder.growth;
    side /= 2;
  }
  return {side, channels};
}

std::vector<ParamTensor*> EnsembleParams::all() {
  std::vector<ParamTensor*> out;
  for (auto& blk : blocks) {
    for (auto& cp : blk.encoder) {
      out.push_back(&cp.kernel);
      out.push_back(&cp.bias);
    }
    out.push_back(&blk.merge.kernel);
    out.push_back(&blk.merge.bias);
    out.push_back(&blk.head_w);
    out.push_back(&blk.head_b);
  }
  out.push_back(&global_w);
  out.push_back(&global_b);
  return out;
}

std::vector<const ParamTensor*> EnsembleParams::all() const {
  std::vector<const ParamTensor*> out;
  for (const ParamTensor* p : const_cast<EnsembleParams*>(this)->all()) out.push_back(p);
  return out;
}

EnsembleParams init_params(const NetConfig& config, std::uint64_t seed) {
  validate_config(config);
  EnsembleParams P;
  P.config = config;
  const auto N = static_cast<std::int64_t>(config.segment_count);
  const MapShape enc = encoder_output_shape(config);
  const std::int64_t He = enc.side, Ce = enc.channels;
  const std::int64_t head_side = He % 2 == 0 ? He / 2 : He;
  const std::int64_t head_flat = head_side * head_side * Ce;
  const std::int64_t map_flat = He * He * Ce;
  const auto growth = static_cast<std::int64_t>(config.encoder.growth);

  for (int g = 0; g < kGroupCount; ++g) {
    GroupBlockParams& blk = P.blocks[static_cast<std::size_t>(g)];
    const std::string base = group_name(g);
    std::int64_t cin = 1;
    int conv_index = 0;
    for (int d : config.encoder.block_depths) {
      for (int l = 0; l < d; ++l) {
        const std::string tag = base + ".enc" + std::to_string(conv_index++);
        blk.encoder.push_back(
            {ParamTensor(tag + ".kernel", Tensor({3, 3, cin, growth})), ParamTensor(tag + ".bias", Tensor({growth}))});
        cin += growth;
      }
    }
    blk.merge.kernel = ParamTensor(base + ".merge.kernel", Tensor({1, 1, N * Ce, Ce}));
    blk.merge.bias = ParamTensor(base + ".merge.bias", Tensor({Ce}));
    blk.head_w = ParamTensor(base + ".head.weight", Tensor({head_flat, kGroupWidths[static_cast<std::size_t>(g)]}));
    blk.head_b = ParamTensor(base + ".head.bias", Tensor({kGroupWidths[static_cast<std::size_t>(g)]}));
  }
  P.global_w = ParamTensor("global.weight", Tensor({kGroupCount * map_flat, kLabelDims}));
  P.global_b = ParamTensor("global.bias", Tensor({kLabelDims}));

  // He init; biases stay zero and consume no draws
  std::mt19937_64 rng(seed);
  for (ParamTensor* p : P.all()) {
    if (p->value.rank() < 2) continue;
    const std::int64_t fan_in =
        p->value.rank() == 4 ? p->value.dim(0) * p->value.dim(1) * p->value.dim(2) : p->value.dim(0);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      const double u1 = canonical(rng);
      const double u2 = canonical(rng);
      p->value[i] = std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2) * sd;
    }
  }
  return P;
}

Tensor reshape_sample(const Tensor& segments, const NetConfig& config) {
  const std::int64_t s = config.side();
  if (segments.rank() != 2 || segments.dim(0) != config.segment_count || segments.dim(1) != config.segment_length)
    throw std::runtime_error("network: sample shape " + shape_to_string(segments.shape()) + " does not match config {" +
                             std::to_string(config.segment_count) + "," + std::to_string(config.segment_length) + "}");
  return Tensor({static_cast<std::int64_t>(config.segment_count), s, s, 1}, segments.values());
}

EnsembleForward ensemble_forward(Trace& t, EnsembleParams& params, const Tensor& segments) {
  const NetConfig& config = params.config;
  const MapShape enc = encoder_output_shape(config);
  const bool head_pool = enc.side % 2 == 0;

  EnsembleForward f;
  f.input = t.input(reshape_sample(segments, config));

  std::vector<Var> flats;
  flats.reserve(kGroupCount);
  for (int g = 0; g < kGroupCount; ++g) {
    GroupBlockParams& blk = params.blocks[static_cast<std::size_t>(g)];
    std::vector<ConvVars> layers;
    layers.reserve(blk.encoder.size());
    for (auto& cp : blk.encoder) layers.push_back({t.param(cp.kernel), t.param(cp.bias)});

    Var h = f.input;
    std::size_t at = 0;
    for (int d : config.encoder.block_depths) {
      h = t.avg_pool2(t.dense_block(h, std::span<const ConvVars>(layers.data() + at, static_cast<std::size_t>(d))));
      at += static_cast<std::size_t>(d);
    }

    Var merged = t.conv2d(t.stack_channels(h), t.param(blk.merge.kernel), t.param(blk.merge.bias));
    f.merged[static_cast<std::size_t>(g)] = merged;

    Var head_in = head_pool ? t.avg_pool2(merged) : merged;
    f.group_logits[static_cast<std::size_t>(g)] = t.linear(t.flatten(head_in), t.param(blk.head_w), t.param(blk.head_b));
    f.group_probs[static_cast<std::size_t>(g)] = t.softmax(f.group_logits[static_cast<std::size_t>(g)]);
    flats.push_back(t.flatten(merged));
  }

  f.global_logits = t.linear(t.concat(flats, 0), t.param(params.global_w), t.param(params.global_b));
  return f;
}

Var joint_loss(Trace& t, const EnsembleForward& f, const LabelSet& labels, double lambda) {
  validate_labels(labels);
  if (lambda < 0.0) throw std::runtime_error("network: lambda must be >= 0");
  std::vector<Var> terms;
  terms.reserve(kGroupCount);
  for (int g = 0; g < kGroupCount; ++g)
    terms.push_back(t.softmax_cross_entropy(f.group_logits[static_cast<std::size_t>(g)], labels.group(g)));
  Var loss = t.add_n(terms);
  if (lambda != 0.0) {
    const auto enc = encode_labels(labels);
    Var targets = t.input(Tensor({kLabelDims}, std::vector<double>(enc.begin(), enc.end())));
    loss = t.add(loss, t.scale(t.sigmoid_bce(f.global_logits, targets), lambda));
  }
  return loss;
}

Prediction predict_sample(EnsembleParams& params, const Tensor& segments) {
  Trace t;
  const EnsembleForward f = ensemble_forward(t, params, segments);
  Prediction p{};
  std::size_t at = 0;
  for (int g = 0; g < kGroupCount; ++g) {
    const Tensor& probs = f.group_probs[static_cast<std::size_t>(g)].value();
    for (std::int64_t i = 0; i < probs.size(); ++i) p.probs[at++] = probs[i];
  }
  const Tensor& gl = f.global_logits.value();
  for (std::int64_t i = 0; i < gl.size(); ++i) p.global_scores[static_cast<std::size_t>(i)] = sigmoid(gl[i]);
  p.labels = decode_labels(p.probs);
  return p;
}

}  // namespace cardiolabel
