#include "cardiolabel/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

namespace cardiolabel {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;
using MapV = Eigen::Map<Eigen::VectorXd>;
using CMapV = Eigen::Map<const Eigen::VectorXd>;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("autodiff: " + msg); }

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct ConvGeom {
  std::int64_t n = 1, h = 0, w = 0, c = 0;
  std::int64_t kh = 0, kw = 0, f = 0;
  std::int64_t oh = 0, ow = 0;
  int stride = 1, pad = 0;
  bool batched = false;
  bool direct = false;  // 1x1 stride-1 pad-0: the input itself is the patch matrix
  std::int64_t rows() const { return n * oh * ow; }
  std::int64_t cols() const { return kh * kw * c; }
};

// Patch matrix: row (n, oh, ow), column (kh, kw, c). The column order matches
// the row-major layout of a {kh,kw,C,F} kernel, so the kernel buffer maps
// directly onto the GEMM operand.
void fill_patches(const Tensor& x, const ConvGeom& g, Tensor& cols) {
  const double* xd = x.data();
  double* cd = cols.data();
  const std::int64_t K = g.cols();
  std::int64_t m = 0;
  for (std::int64_t n = 0; n < g.n; ++n) {
    const double* xn = xd + n * g.h * g.w * g.c;
    for (std::int64_t oh = 0; oh < g.oh; ++oh) {
      for (std::int64_t ow = 0; ow < g.ow; ++ow, ++m) {
        double* row = cd + m * K;
        const std::int64_t ih0 = oh * g.stride - g.pad;
        const std::int64_t iw0 = ow * g.stride - g.pad;
        for (std::int64_t kh = 0; kh < g.kh; ++kh) {
          const std::int64_t ih = ih0 + kh;
          for (std::int64_t kw = 0; kw < g.kw; ++kw) {
            const std::int64_t iw = iw0 + kw;
            double* dst = row + (kh * g.kw + kw) * g.c;
            if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) {
              std::fill(dst, dst + g.c, 0.0);
            } else {
              const double* src = xn + (ih * g.w + iw) * g.c;
              std::copy(src, src + g.c, dst);
            }
          }
        }
      }
    }
  }
}

void scatter_patches(const MatRM& dcols, const ConvGeom& g, Tensor& dx) {
  double* xd = dx.data();
  std::int64_t m = 0;
  for (std::int64_t n = 0; n < g.n; ++n) {
    double* xn = xd + n * g.h * g.w * g.c;
    for (std::int64_t oh = 0; oh < g.oh; ++oh) {
      for (std::int64_t ow = 0; ow < g.ow; ++ow, ++m) {
        const double* row = dcols.data() + m * g.cols();
        const std::int64_t ih0 = oh * g.stride - g.pad;
        const std::int64_t iw0 = ow * g.stride - g.pad;
        for (std::int64_t kh = 0; kh < g.kh; ++kh) {
          const std::int64_t ih = ih0 + kh;
          if (ih < 0 || ih >= g.h) continue;
          for (std::int64_t kw = 0; kw < g.kw; ++kw) {
            const std::int64_t iw = iw0 + kw;
            if (iw < 0 || iw >= g.w) continue;
            const double* src = row + (kh * g.kw + kw) * g.c;
            double* dst = xn + (ih * g.w + iw) * g.c;
            for (std::int64_t c = 0; c < g.c; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

}  // namespace

void ParamTensor::zero_grad() {
  if (!grad.same_shape(value)) grad = Tensor(value.shape());
  grad.fill(0.0);
}

struct Trace::Impl {
  struct Node {
    Tensor value;
    Tensor grad;  // zero-size until backward touches the node
    std::function<void()> back;
  };

  std::vector<Node> nodes;
  std::vector<std::pair<ParamTensor*, std::int32_t>> bound;
  bool ran_backward = false;

  std::int32_t push(Tensor value) {
    nodes.push_back(Node{std::move(value), Tensor(), {}});
    return static_cast<std::int32_t>(nodes.size() - 1);
  }

  Node& node(std::int32_t id) { return nodes[static_cast<std::size_t>(id)]; }

  const Tensor& value_of(std::int32_t id) const { return nodes[static_cast<std::size_t>(id)].value; }

  Tensor& grad_buf(std::int32_t id) {
    Node& n = node(id);
    if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  bool has_grad(std::int32_t id) const { return nodes[static_cast<std::size_t>(id)].grad.size() != 0; }
};

const Tensor& Var::value() const {
  if (!valid()) fail("value() on invalid Var");
  return trace->impl_->value_of(id);
}

const Tensor& Var::grad() const {
  if (!valid()) fail("grad() on invalid Var");
  if (!trace->impl_->has_grad(id)) fail("grad() before backward touched this node");
  return trace->impl_->node(id).grad;
}

Trace::Trace() : impl_(new Impl) {}
Trace::~Trace() { delete impl_; }

std::size_t Trace::size() const { return impl_->nodes.size(); }
const Tensor& Trace::value(Var v) const { return v.value(); }
const Tensor& Trace::grad(Var v) const { return v.grad(); }

namespace {

void check_on(const Trace* t, std::initializer_list<Var> vars) {
  for (const Var& v : vars) {
    if (!v.valid() || v.trace != t) fail("Var does not belong to this trace");
  }
}

}  // namespace

Var Trace::input(Tensor value) {
  const std::int32_t id = impl_->push(std::move(value));
  return Var{this, id};
}

Var Trace::param(ParamTensor& p) {
  for (const auto& [ptr, id] : impl_->bound) {
    if (ptr == &p) return Var{this, id};
  }
  const std::int32_t id = impl_->push(p.value);
  impl_->bound.emplace_back(&p, id);
  return Var{this, id};
}

Var Trace::conv2d(Var x, Var kernel, Var bias, int stride, int pad) {
  check_on(this, {x, kernel, bias});
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  const Tensor& bv = bias.value();

  ConvGeom g;
  g.batched = xv.rank() == 4;
  if (xv.rank() != 3 && !g.batched) fail("conv2d input must be {H,W,C} or {N,H,W,C}, got " + shape_to_string(xv.shape()));
  if (kv.rank() != 4) fail("conv2d kernel must be {kh,kw,C,F}, got " + shape_to_string(kv.shape()));
  if (bv.rank() != 1) fail("conv2d bias must be {F}, got " + shape_to_string(bv.shape()));
  if (stride < 1) fail("conv2d stride must be >= 1");
  if (pad < 0) fail("conv2d pad must be >= 0");

  int a = 0;
  g.n = g.batched ? xv.dim(a++) : 1;
  g.h = xv.dim(a++);
  g.w = xv.dim(a++);
  g.c = xv.dim(a);
  g.kh = kv.dim(0);
  g.kw = kv.dim(1);
  g.f = kv.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (kv.dim(2) != g.c) fail("conv2d kernel expects " + std::to_string(kv.dim(2)) + " input channels, input has " + std::to_string(g.c));
  if (bv.dim(0) != g.f) fail("conv2d bias length " + std::to_string(bv.dim(0)) + " does not match filter count " + std::to_string(g.f));
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) fail("conv2d kernel larger than padded input");
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
  g.direct = g.kh == 1 && g.kw == 1 && stride == 1 && pad == 0;

  const std::int64_t M = g.rows();
  const std::int64_t K = g.cols();

  auto cols = std::make_shared<Tensor>();
  if (!g.direct) {
    *cols = Tensor({M, K});
    fill_patches(xv, g, *cols);
  }

  Tensor out(g.batched ? std::vector<std::int64_t>{g.n, g.oh, g.ow, g.f} : std::vector<std::int64_t>{g.oh, g.ow, g.f});
  {
    CMapM kmat(kv.data(), K, g.f);
    MapM y(out.data(), M, g.f);
    if (g.direct) {
      CMapM xm(xv.data(), M, g.c);
      y.noalias() = xm * kmat;
    } else {
      CMapM cm(cols->data(), M, K);
      y.noalias() = cm * kmat;
    }
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data(), g.f);
  }

  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t xid = x.id, kid = kernel.id, bid = bias.id;
  im->node(id).back = [im, id, xid, kid, bid, g, cols]() {
    const std::int64_t M = g.rows();
    const std::int64_t K = g.cols();
    CMapM dy(im->node(id).grad.data(), M, g.f);

    MapV db(im->grad_buf(bid).data(), g.f);
    db += dy.colwise().sum().transpose();

    MapM dw(im->grad_buf(kid).data(), K, g.f);
    if (g.direct) {
      CMapM xm(im->value_of(xid).data(), M, g.c);
      dw.noalias() += xm.transpose() * dy;
    } else {
      CMapM cm(cols->data(), M, K);
      dw.noalias() += cm.transpose() * dy;
    }

    CMapM kmat(im->value_of(kid).data(), K, g.f);
    if (g.direct) {
      MapM dx(im->grad_buf(xid).data(), M, g.c);
      dx.noalias() += dy * kmat.transpose();
    } else {
      MatRM dcols(M, K);
      dcols.noalias() = dy * kmat.transpose();
      scatter_patches(dcols, g, im->grad_buf(xid));
    }
  };
  return Var{this, id};
}

Var Trace::relu(Var x) {
  check_on(this, {x});
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t xid = x.id;
  im->node(id).back = [im, id, xid]() {
    const Tensor& xv = im->value_of(xid);
    const Tensor& dy = im->node(id).grad;
    Tensor& dx = im->grad_buf(xid);
    for (std::int64_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += dy[i];
    }
  };
  return Var{this, id};
}

Var Trace::avg_pool2(Var x) {
  check_on(this, {x});
  const Tensor& xv = x.value();
  const bool batched = xv.rank() == 4;
  if (xv.rank() != 3 && !batched) fail("avg_pool2 input must be {H,W,C} or {N,H,W,C}, got " + shape_to_string(xv.shape()));
  int a = 0;
  const std::int64_t n = batched ? xv.dim(a++) : 1;
  const std::int64_t h = xv.dim(a++);
  const std::int64_t w = xv.dim(a++);
  const std::int64_t c = xv.dim(a);
  if (h % 2 != 0 || w % 2 != 0) fail("avg_pool2 requires even spatial dims, got " + shape_to_string(xv.shape()));
  const std::int64_t oh = h / 2, ow = w / 2;

  Tensor out(batched ? std::vector<std::int64_t>{n, oh, ow, c} : std::vector<std::int64_t>{oh, ow, c});
  for (std::int64_t ni = 0; ni < n; ++ni) {
    const double* xn = xv.data() + ni * h * w * c;
    double* yn = out.data() + ni * oh * ow * c;
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        const double* r0 = xn + ((2 * i) * w + 2 * j) * c;
        const double* r1 = xn + ((2 * i + 1) * w + 2 * j) * c;
        double* y = yn + (i * ow + j) * c;
        for (std::int64_t k = 0; k < c; ++k) y[k] = 0.25 * (r0[k] + r0[c + k] + r1[k] + r1[c + k]);
      }
    }
  }

  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t xid = x.id;
  im->node(id).back = [im, id, xid, n, h, w, c, oh, ow]() {
    const Tensor& dy = im->node(id).grad;
    Tensor& dx = im->grad_buf(xid);
    for (std::int64_t ni = 0; ni < n; ++ni) {
      double* xn = dx.data() + ni * h * w * c;
      const double* yn = dy.data() + ni * oh * ow * c;
      for (std::int64_t i = 0; i < oh; ++i) {
        for (std::int64_t j = 0; j < ow; ++j) {
          const double* g = yn + (i * ow + j) * c;
          double* r0 = xn + ((2 * i) * w + 2 * j) * c;
          double* r1 = xn + ((2 * i + 1) * w + 2 * j) * c;
          for (std::int64_t k = 0; k < c; ++k) {
            const double q = 0.25 * g[k];
            r0[k] += q;
            r0[c + k] += q;
            r1[k] += q;
            r1[c + k] += q;
          }
        }
      }
    }
  };
  return Var{this, id};
}

Var Trace::global_avg_pool(Var x) {
  check_on(this, {x});
  const Tensor& xv = x.value();
  const bool batched = xv.rank() == 4;
  if (xv.rank() != 3 && !batched) fail("global_avg_pool input must be {H,W,C} or {N,H,W,C}, got " + shape_to_string(xv.shape()));
  int a = 0;
  const std::int64_t n = batched ? xv.dim(a++) : 1;
  const std::int64_t h = xv.dim(a++);
  const std::int64_t w = xv.dim(a++);
  const std::int64_t c = xv.dim(a);
  const double inv = 1.0 / static_cast<double>(h * w);

  Tensor out(batched ? std::vector<std::int64_t>{n, c} : std::vector<std::int64_t>{c});
  for (std::int64_t ni = 0; ni < n; ++ni) {
    const double* xn = xv.data() + ni * h * w * c;
    double* yn = out.data() + ni * c;
    for (std::int64_t p = 0; p < h * w; ++p) {
      for (std::int64_t k = 0; k < c; ++k) yn[k] += xn[p * c + k];
    }
    for (std::int64_t k = 0; k < c; ++k) yn[k] *= inv;
  }

  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t xid = x.id;
  im->node(id).back = [im, id, xid, n, h, w, c, inv]() {
    const Tensor& dy = im->node(id).grad;
    Tensor& dx = im->grad_buf(xid);
    for (std::int64_t ni = 0; ni < n; ++ni) {
      const double* g = dy.data() + ni * c;
      double* xn = dx.data() + ni * h * w * c;
      for (std::int64_t p = 0; p < h * w; ++p) {
        for (std::int64_t k = 0; k < c; ++k) xn[p * c + k] += g[k] * inv;
      }
    }
  };
  return Var{this, id};
}

Var Trace::linear(Var x, Var w, Var b) {
  check_on(this, {x, w, b});
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 1) fail("linear input must be rank-1, got " + shape_to_string(xv.shape()));
  if (wv.rank() != 2) fail("linear weight must be {K,M}, got " + shape_to_string(wv.shape()));
  if (bv.rank() != 1) fail("linear bias must be rank-1, got " + shape_to_string(bv.shape()));
  const std::int64_t k = xv.dim(0), m = wv.dim(1);
  if (wv.dim(0) != k) fail("linear weight expects input length " + std::to_string(wv.dim(0)) + ", got " + std::to_string(k));
  if (bv.dim(0) != m) fail("linear bias length " + std::to_string(bv.dim(0)) + " does not match output length " + std::to_string(m));

  Tensor out({m});
  {
    Eigen::Map<const Eigen::RowVectorXd> xm(xv.data(), k);
    CMapM wm(wv.data(), k, m);
    Eigen::Map<Eigen::RowVectorXd> ym(out.data(), m);
    ym.noalias() = xm * wm;
    ym += Eigen::Map<const Eigen::RowVectorXd>(bv.data(), m);
  }

  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t xid = x.id, wid = w.id, bid = b.id;
  im->node(id).back = [im, id, xid, wid, bid, k, m]() {
    Eigen::Map<const Eigen::RowVectorXd> dy(im->node(id).grad.data(), m);
    Eigen::Map<const Eigen::RowVectorXd> xm(im->value_of(xid).data(), k);
    CMapM wm(im->value_of(wid).data(), k, m);

    Eigen::Map<Eigen::RowVectorXd> db(im->grad_buf(bid).data(), m);
    db += dy;
    MapM dw(im->grad_buf(wid).data(), k, m);
    dw.noalias() += xm.transpose() * dy;
    Eigen::Map<Eigen::RowVectorXd> dx(im->grad_buf(xid).data(), k);
    dx.noalias() += dy * wm.transpose();
  };
  return Var{this, id};
}

Var Trace::concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) fail("concat of zero tensors");
  for (const Var& v : xs) check_on(this, {v});
  const int rank = xs[0].value().rank();
  if (axis < 0 || axis >= rank) fail("concat axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));

  std::vector<std::int64_t> shape = xs[0].value().shape();
  std::int64_t axis_total = 0;
  for (const Var& v : xs) {
    const Tensor& t = v.value();
    if (t.rank() != rank) fail("concat rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != axis && t.shape()[static_cast<std::size_t>(d)] != shape[static_cast<std::size_t>(d)])
        fail("concat shape mismatch on axis " + std::to_string(d) + ": " + shape_to_string(t.shape()) + " vs " + shape_to_string(shape));
    }
    axis_total += t.dim(axis);
  }
  shape[static_cast<std::size_t>(axis)] = axis_total;

  std::int64_t outer = 1, tail = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[static_cast<std::size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) tail *= shape[static_cast<std::size_t>(d)];

  std::vector<std::int64_t> chunks;
  chunks.reserve(xs.size());
  for (const Var& v : xs) chunks.push_back(v.value().dim(axis) * tail);
  const std::int64_t total_chunk = axis_total * tail;

  Tensor out(shape);
  for (std::int64_t o = 0; o < outer; ++o) {
    double* dst = out.data() + o * total_chunk;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const double* src = xs[j].value().data() + o * chunks[j];
      std::copy(src, src + chunks[j], dst);
      dst += chunks[j];
    }
  }

  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  std::vector<std::int32_t> ids;
  ids.reserve(xs.size());
  for (const Var& v : xs) ids.push_back(v.id);
  im->node(id).back = [im, id, ids, chunks, outer, total_chunk]() {
    const Tensor& dy = im->node(id).grad;
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = dy.data() + o * total_chunk;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        double* dst = im->grad_buf(ids[j]).data() + o * chunks[j];
        for (std::int64_t i = 0; i < chunks[j]; ++i) dst[i] += src[i];
        src += chunks[j];
      }
    }
  };
  return Var{this, id};
}

Var Trace::reshape(Var x, std::vector<std::int64_t> shape) {
  check_on(this, {x});
  const Tensor& xv = x.value();
  if (shape_numel(shape) != xv.size()) fail("reshape from " + shape_to_string(xv.shape()) + " to " + shape_to_string(shape) + " changes element count");
  Tensor out(std::move(shape), xv.values());
  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t xid = x.id;
  im->node(id).back = [im, id, xid]() {
    const Tensor& dy = im->node(id).grad;
    Tensor& dx = im->grad_buf(xid);
    for (std::int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  };
  return Var{this, id};
}

Var Trace::flatten(Var x) { return reshape(x, {x.value().size()}); }

Var Trace::stack_channels(Var x) {
  check_on(this, {x});
  const Tensor& xv = x.value();
  if (xv.rank() != 4) fail("stack_channels input must be {N,H,W,C}, got " + shape_to_string(xv.shape()));
  const std::int64_t n = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);

  Tensor out({h, w, n * c});
  for (std::int64_t ni = 0; ni < n; ++ni) {
    const double* xn = xv.data() + ni * h * w * c;
    for (std::int64_t p = 0; p < h * w; ++p) {
      const double* src = xn + p * c;
      double* dst = out.data() + p * n * c + ni * c;
      std::copy(src, src + c, dst);
    }
  }

  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t xid = x.id;
  im->node(id).back = [im, id, xid, n, h, w, c]() {
    const Tensor& dy = im->node(id).grad;
    Tensor& dx = im->grad_buf(xid);
    for (std::int64_t ni = 0; ni < n; ++ni) {
      double* xn = dx.data() + ni * h * w * c;
      for (std::int64_t p = 0; p < h * w; ++p) {
        const double* src = dy.data() + p * n * c + ni * c;
        double* dst = xn + p * c;
        for (std::int64_t k = 0; k < c; ++k) dst[k] += src[k];
      }
    }
  };
  return Var{this, id};
}

Var Trace::add(Var a, Var b) { return add_n({a, b}); }

Var Trace::add_n(const std::vector<Var>& xs) {
  if (xs.empty()) fail("add_n of zero tensors");
  for (const Var& v : xs) check_on(this, {v});
  const Tensor& first = xs[0].value();
  for (const Var& v : xs) {
    if (!v.value().same_shape(first)) fail("add_n shape mismatch: " + shape_to_string(v.value().shape()) + " vs " + shape_to_string(first.shape()));
  }
  Tensor out(first.shape());
  for (const Var& v : xs) {
    const Tensor& t = v.value();
    for (std::int64_t i = 0; i < t.size(); ++i) out[i] += t[i];
  }
  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  std::vector<std::int32_t> ids;
  ids.reserve(xs.size());
  for (const Var& v : xs) ids.push_back(v.id);
  im->node(id).back = [im, id, ids]() {
    const Tensor& dy = im->node(id).grad;
    for (std::int32_t xid : ids) {
      Tensor& dx = im->grad_buf(xid);
      for (std::int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    }
  };
  return Var{this, id};
}

Var Trace::scale(Var x, double s) {
  check_on(this, {x});
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = s * xv[i];
  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t xid = x.id;
  im->node(id).back = [im, id, xid, s]() {
    const Tensor& dy = im->node(id).grad;
    Tensor& dx = im->grad_buf(xid);
    for (std::int64_t i = 0; i < dy.size(); ++i) dx[i] += s * dy[i];
  };
  return Var{this, id};
}

Var Trace::mul(Var a, Var b) {
  check_on(this, {a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) fail("mul shape mismatch: " + shape_to_string(av.shape()) + " vs " + shape_to_string(bv.shape()));
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t aid = a.id, bid = b.id;
  im->node(id).back = [im, id, aid, bid]() {
    const Tensor& dy = im->node(id).grad;
    const Tensor& av = im->value_of(aid);
    const Tensor& bv = im->value_of(bid);
    Tensor& da = im->grad_buf(aid);
    for (std::int64_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv[i];
    Tensor& db = im->grad_buf(bid);
    for (std::int64_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
  };
  return Var{this, id};
}

Var Trace::reduce_sum(Var x) {
  check_on(this, {x});
  const Tensor& xv = x.value();
  double sum = 0.0;
  for (std::int64_t i = 0; i < xv.size(); ++i) sum += xv[i];
  const std::int32_t id = impl_->push(Tensor::scalar(sum));
  Impl* im = impl_;
  const std::int32_t xid = x.id;
  im->node(id).back = [im, id, xid]() {
    const double g = im->node(id).grad[0];
    Tensor& dx = im->grad_buf(xid);
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += g;
  };
  return Var{this, id};
}

Var Trace::pick(Var x, std::int64_t index) {
  check_on(this, {x});
  const Tensor& xv = x.value();
  if (index < 0 || index >= xv.size()) fail("pick index " + std::to_string(index) + " out of range for size " + std::to_string(xv.size()));
  const std::int32_t id = impl_->push(Tensor::scalar(xv[index]));
  Impl* im = impl_;
  const std::int32_t xid = x.id;
  im->node(id).back = [im, id, xid, index]() { im->grad_buf(xid)[index] += im->node(id).grad[0]; };
  return Var{this, id};
}

Var Trace::softmax(Var logits) {
  check_on(this, {logits});
  const Tensor& zv = logits.value();
  if (zv.rank() != 1 || zv.size() == 0) fail("softmax expects a non-empty rank-1 tensor, got " + shape_to_string(zv.shape()));
  const std::int64_t k = zv.size();
  double mx = zv[0];
  for (std::int64_t i = 1; i < k; ++i) mx = std::max(mx, zv[i]);
  Tensor out({k});
  double sum = 0.0;
  for (std::int64_t i = 0; i < k; ++i) {
    out[i] = std::exp(zv[i] - mx);
    sum += out[i];
  }
  for (std::int64_t i = 0; i < k; ++i) out[i] /= sum;

  auto probs = std::make_shared<Tensor>(out);
  const std::int32_t id = impl_->push(std::move(out));
  Impl* im = impl_;
  const std::int32_t zid = logits.id;
  im->node(id).back = [im, id, zid, probs, k]() {
    const Tensor& dy = im->node(id).grad;
    Tensor& dz = im->grad_buf(zid);
    double dot = 0.0;
    for (std::int64_t i = 0; i < k; ++i) dot += dy[i] * (*probs)[i];
    for (std::int64_t i = 0; i < k; ++i) dz[i] += (*probs)[i] * (dy[i] - dot);
  };
  return Var{this, id};
}

Var Trace::softmax_cross_entropy(Var logits, std::int64_t target) {
  check_on(this, {logits});
  const Tensor& zv = logits.value();
  if (zv.rank() != 1 || zv.size() == 0) fail("softmax_cross_entropy expects a non-empty rank-1 tensor, got " + shape_to_string(zv.shape()));
  const std::int64_t k = zv.size();
  if (target < 0 || target >= k) fail("softmax_cross_entropy target " + std::to_string(target) + " out of range for " + std::to_string(k) + " classes");

  double mx = zv[0];
  for (std::int64_t i = 1; i < k; ++i) mx = std::max(mx, zv[i]);
  double sum = 0.0;
  for (std::int64_t i = 0; i < k; ++i) sum += std::exp(zv[i] - mx);
  const double lse = mx + std::log(sum);
  const double loss = lse - zv[target];

  auto probs = std::make_shared<Tensor>(std::vector<std::int64_t>{k});
  for (std::int64_t i = 0; i < k; ++i) (*probs)[i] = std::exp(zv[i] - lse);

  const std::int32_t id = impl_->push(Tensor::scalar(loss));
  Impl* im = impl_;
  const std::int32_t zid = logits.id;
  im->node(id).back = [im, id, zid, probs, target, k]() {
    const double g = im->node(id).grad[0];
    Tensor& dz = im->grad_buf(zid);
    for (std::int64_t i = 0; i < k; ++i) dz[i] += g * ((*probs)[i] - (i == target ? 1.0 : 0.0));
  };
  return Var{this, id};
}

Var Trace::sigmoid_bce(Var logits, Var targets) {
  check_on(this, {logits, targets});
  const Tensor& zv = logits.value();
  const Tensor& tv = targets.value();
  if (!zv.same_shape(tv)) fail("sigmoid_bce logits " + shape_to_string(zv.shape()) + " and targets " + shape_to_string(tv.shape()) + " differ");
  if (zv.size() == 0) fail("sigmoid_bce on empty tensor");
  const std::int64_t m = zv.size();

  double total = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double z = zv[i], t = tv[i];
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  const double loss = total / static_cast<double>(m);

  const std::int32_t id = impl_->push(Tensor::scalar(loss));
  Impl* im = impl_;
  const std::int32_t zid = logits.id, tid = targets.id;
  im->node(id).back = [im, id, zid, tid, m]() {
    const double g = im->node(id).grad[0];
    const Tensor& zv = im->value_of(zid);
    const Tensor& tv = im->value_of(tid);
    Tensor& dz = im->grad_buf(zid);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::int64_t i = 0; i < m; ++i) dz[i] += g * (stable_sigmoid(zv[i]) - tv[i]) * inv;
  };
  return Var{this, id};
}

Var Trace::dense_block(Var x, std::span<const ConvVars> layers) {
  check_on(this, {x});
  Var cur = x;
  for (const ConvVars& l : layers) {
    check_on(this, {l.kernel, l.bias});
    const Tensor& kv = l.kernel.value();
    if (kv.rank() != 4 || kv.dim(0) != 3 || kv.dim(1) != 3) fail("dense_block layers use 3x3 kernels, got " + shape_to_string(kv.shape()));
    Var h = relu(cur);
    Var grown = conv2d(h, l.kernel, l.bias, 1, 1);
    const int axis = cur.value().rank() == 4 ? 3 : 2;
    cur = concat({cur, grown}, axis);
  }
  return cur;
}

void Trace::backward(Var loss) {
  check_on(this, {loss});
  if (impl_->ran_backward) fail("backward() already ran on this trace");
  if (loss.value().size() != 1) fail("backward target must be scalar, got " + shape_to_string(loss.value().shape()));
  impl_->ran_backward = true;

  impl_->grad_buf(loss.id)[0] = 1.0;
  for (std::int32_t id = static_cast<std::int32_t>(impl_->nodes.size()) - 1; id >= 0; --id) {
    Impl::Node& n = impl_->node(id);
    if (n.grad.size() == 0) continue;
    if (n.back) n.back();
  }

  for (const auto& [p, id] : impl_->bound) {
    if (!impl_->has_grad(id)) continue;
    if (!p->grad.same_shape(p->value)) p->grad = Tensor(p->value.shape());
    const Tensor& g = impl_->node(id).grad;
    for (std::int64_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
  }
}

double grad_check_stored(const std::function<Var(Trace&)>& build, std::span<ParamTensor* const> params, double eps) {
  if (eps <= 0.0) fail("grad_check eps must be positive");
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (ParamTensor* p : params) {
    if (!p->grad.same_shape(p->value)) fail("grad_check_stored: parameter '" + p->name + "' has no stored gradient");
    analytic.push_back(p->grad.values());
  }

  const auto eval = [&build]() {
    Trace t;
    return build(t).value().item();
  };

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ParamTensor* p = params[pi];
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double fp = eval();
      p->value[i] = orig - eps;
      const double fm = eval();
      p->value[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[pi][static_cast<std::size_t>(i)];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

double grad_check(const std::function<Var(Trace&)>& build, std::span<ParamTensor* const> params, double eps) {
  if (eps <= 0.0) fail("grad_check eps must be positive");
  for (ParamTensor* p : params) p->zero_grad();
  {
    Trace t;
    Var loss = build(t);
    if (loss.value().size() != 1) fail("grad_check loss must be scalar");
    t.backward(loss);
  }
  return grad_check_stored(build, params, eps);
}

}  // namespace cardiolabel
