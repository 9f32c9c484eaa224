#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cardiolabel/tensor.hpp"

namespace cardiolabel {

// Named trainable tensor. The gradient buffer is allocated on first use and
// accumulates additively across backward passes until zero_grad() is called.
struct ParamTensor {
  std::string name;
  Tensor value;
  Tensor grad;

  ParamTensor() = default;
  ParamTensor(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {}

  void zero_grad();
};

class Trace;

// Handle to a node on a trace. Cheap to copy; only valid while the trace is alive.
struct Var {
  Trace* trace = nullptr;
  std::int32_t id = -1;

  bool valid() const { return trace != nullptr && id >= 0; }
  const Tensor& value() const;
  // Gradient of the most recent backward() target with respect to this node.
  // Throws if no backward pass has touched the node yet.
  const Tensor& grad() const;
};

// Pair of conv parameters already bound to a trace, used by composites.
struct ConvVars {
  Var kernel;  // {kh, kw, Cin, F}
  Var bias;    // {F}
};

// Reverse-mode tape. Nodes are appended in creation order, which is a valid
// topological order, so backward() is a single reverse sweep. All accumulation
// loops run in a fixed order; repeated runs over identical inputs produce
// bitwise identical gradients.
class Trace {
 public:
  Trace();
  ~Trace();
  Trace(const Trace&) = delete;
  Trace& operator=(const Trace&) = delete;

  // Leaves. input() copies the tensor onto the tape; it receives a gradient
  // (needed for input saliency) but propagates nothing further. param() binds
  // a ParamTensor; binding the same tensor again returns the existing node, so
  // every trace holds at most one node per parameter and gradients from all
  // uses accumulate there.
  Var input(Tensor value);
  Var param(ParamTensor& p);

  // 2-D cross-correlation with zero padding and per-filter bias.
  // x is {H,W,C} or {N,H,W,C}; a rank-4 input is treated as N independent
  // images sharing the kernel. kernel is {kh,kw,C,F}, bias {F}.
  // Output spatial dims follow floor((H + 2*pad - kh) / stride) + 1.
  Var conv2d(Var x, Var kernel, Var bias, int stride = 1, int pad = 0);

  Var relu(Var x);

  // 2x2 average pool with stride 2 over the trailing {H,W,C} axes.
  // H and W must be even.
  Var avg_pool2(Var x);

  // Mean over the spatial axes: {H,W,C} -> {C}, {N,H,W,C} -> {N,C}.
  Var global_avg_pool(Var x);

  // y = x.W + b for x {K}, W {K,M}, b {M}.
  Var linear(Var x, Var w, Var b);

  Var concat(const std::vector<Var>& xs, int axis);
  Var reshape(Var x, std::vector<std::int64_t> shape);
  Var flatten(Var x);

  // {N,H,W,C} -> {H,W,N*C}; segment n lands in channels [n*C, (n+1)*C).
  Var stack_channels(Var x);

  Var add(Var a, Var b);
  Var add_n(const std::vector<Var>& xs);
  Var scale(Var x, double s);
  Var mul(Var a, Var b);                // elementwise, shapes must match
  Var reduce_sum(Var x);                // scalar sum of every entry
  Var pick(Var x, std::int64_t index);  // scalar x[index]

  Var softmax(Var logits);  // rank-1

  // Fused numerically stable losses. Both return scalars.
  // softmax_cross_entropy: -log softmax(logits)[target], max-subtracted.
  // sigmoid_bce: mean over elements of max(z,0) - z*t + log1p(exp(-|z|));
  // targets are treated as constants.
  Var softmax_cross_entropy(Var logits, std::int64_t target);
  Var sigmoid_bce(Var logits, Var targets);

  // DenseNet-style block: each layer is relu followed by a 3x3 pad-1 stride-1
  // conv producing growth channels, concatenated onto the running input.
  // Output channels = Cin + layers.size() * growth.
  Var dense_block(Var x, std::span<const ConvVars> layers);

  // Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. loss must be scalar.
  // Parameter gradients are added into each bound ParamTensor::grad.
  void backward(Var loss);

  std::size_t size() const;
  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;

 private:
  struct Impl;
  Impl* impl_;
  friend struct Var;
};

// Central-difference gradient check. `build` must construct the scalar loss
// from current parameter values on the given trace. Returns the maximum
// relative error over every entry of every parameter, with
// rel = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Var(Trace&)>& build, std::span<ParamTensor* const> params, double eps = 1e-5);

// Same comparison, but against whatever each ParamTensor::grad currently
// holds instead of a fresh backward pass. Diagnostic hook: lets a caller
// vet an externally produced or deliberately perturbed gradient.
double grad_check_stored(const std::function<Var(Trace&)>& build, std::span<ParamTensor* const> params, double eps = 1e-5);

}  // namespace cardiolabel
