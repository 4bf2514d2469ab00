#include "pathcnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <utility>

#include "pathcnn/kernels.hpp"

namespace pathcnn::ops {

namespace {

double* grad_of(const Tensor& t) {
  t.node()->ensure_grad();
  return t.node()->grad.data();
}

// Records the op only when tracking is on and some input is tracked;
// otherwise the parents and closure are dropped and the result is a leaf.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> fn) {
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool track = grad_enabled();
  if (track) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    track = any;
  }
  if (track) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backprop = std::move(fn);
  }
  return Tensor::wrap(std::move(n));
}

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size());
  std::int64_t acc = 1;
  for (int d = int(s.size()) - 1; d >= 0; --d) {
    st[size_t(d)] = acc;
    acc *= s[size_t(d)];
  }
  return st;
}

// Broadcast layout of two operands against their common result shape.
// sa/sb hold per-result-dim strides, zero where the operand broadcasts.
struct BcPlan {
  Shape out;
  std::vector<std::int64_t> sa, sb;
  std::int64_t numel = 0;
  bool same = false;
};

BcPlan make_plan(const Shape& a, const Shape& b) {
  BcPlan p;
  if (same_shape(a, b)) {
    p.out = a;
    p.numel = shape_numel(a);
    p.same = true;
    return p;
  }
  const int nd = int(std::max(a.size(), b.size()));
  p.out.resize(size_t(nd));
  p.sa.assign(size_t(nd), 0);
  p.sb.assign(size_t(nd), 0);
  const auto sta = row_major_strides(a);
  const auto stb = row_major_strides(b);
  for (int d = 0; d < nd; ++d) {
    const int da = d - (nd - int(a.size()));
    const int db = d - (nd - int(b.size()));
    const int ad = da >= 0 ? a[size_t(da)] : 1;
    const int bd = db >= 0 ? b[size_t(db)] : 1;
    if (ad != bd && ad != 1 && bd != 1)
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    p.out[size_t(d)] = std::max(ad, bd);
    if (da >= 0 && ad != 1) p.sa[size_t(d)] = sta[size_t(da)];
    if (db >= 0 && bd != 1) p.sb[size_t(d)] = stb[size_t(db)];
  }
  p.numel = shape_numel(p.out);
  return p;
}

template <class F>
void bc_iter(const BcPlan& p, F&& f) {
  if (p.same) {
    for (std::int64_t i = 0; i < p.numel; ++i) f(i, i, i);
    return;
  }
  const int nd = int(p.out.size());
  std::vector<int> idx(size_t(nd), 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t i = 0; i < p.numel; ++i) {
    f(i, ia, ib);
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[size_t(d)];
      ia += p.sa[size_t(d)];
      ib += p.sb[size_t(d)];
      if (idx[size_t(d)] < p.out[size_t(d)]) break;
      idx[size_t(d)] = 0;
      ia -= p.sa[size_t(d)] * p.out[size_t(d)];
      ib -= p.sb[size_t(d)] * p.out[size_t(d)];
    }
  }
}

enum class BinKind { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
  BcPlan plan = make_plan(a.shape(), b.shape());
  std::vector<double> out(size_t(plan.numel));
  const double* av = a.data();
  const double* bv = b.data();
  bc_iter(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
    switch (kind) {
      case BinKind::Add: out[size_t(i)] = av[ia] + bv[ib]; break;
      case BinKind::Sub: out[size_t(i)] = av[ia] - bv[ib]; break;
      case BinKind::Mul: out[size_t(i)] = av[ia] * bv[ib]; break;
      case BinKind::Div: out[size_t(i)] = av[ia] / bv[ib]; break;
    }
  });
  return make_result(plan.out, std::move(out), {a, b}, [plan, kind](detail::Node& self) {
    Tensor pa = self.parents[0];
    Tensor pb = self.parents[1];
    const double* av = pa.data();
    const double* bv = pb.data();
    const double* g = self.grad.data();
    double* ga = pa.requires_grad() ? grad_of(pa) : nullptr;
    double* gb = pb.requires_grad() ? grad_of(pb) : nullptr;
    bc_iter(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      const double gi = g[i];
      switch (kind) {
        case BinKind::Add:
          if (ga) ga[ia] += gi;
          if (gb) gb[ib] += gi;
          break;
        case BinKind::Sub:
          if (ga) ga[ia] += gi;
          if (gb) gb[ib] -= gi;
          break;
        case BinKind::Mul:
          if (ga) ga[ia] += gi * bv[ib];
          if (gb) gb[ib] += gi * av[ia];
          break;
        case BinKind::Div:
          if (ga) ga[ia] += gi / bv[ib];
          if (gb) gb[ib] -= gi * av[ia] / (bv[ib] * bv[ib]);
          break;
      }
    });
  });
}

template <class F, class D>
Tensor unary_op(const Tensor& x, F f, D df) {
  const std::int64_t n = x.numel();
  std::vector<double> out(size_t(n), 0.0);
  const double* xv = x.data();
  for (std::int64_t i = 0; i < n; ++i) out[size_t(i)] = f(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [df](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    double* gx = grad_of(px);
    const double* xv = px.data();
    const double* yv = self.value.data();
    const double* g = self.grad.data();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i] * df(xv[i], yv[i]);
  });
}

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_ndim(const Tensor& t, int nd, const char* what) {
  if (t.ndim() != nd)
    throw ShapeError(std::string(what) + " expects " + std::to_string(nd) + "-d tensor, got " +
                     shape_str(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Div); }

Tensor add_scalar(const Tensor& x, double s) {
  return unary_op(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double s) {
  return unary_op(x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor relu(const Tensor& x) {
  return unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary_op(x, [](double v) { return std::exp(v); },
                  [](double, double yv) { return yv; });
}

Tensor log(const Tensor& x) {
  return unary_op(x, [](double v) { return std::log(v); },
                  [](double xv, double) { return 1.0 / xv; });
}

Tensor sqrt(const Tensor& x) {
  return unary_op(x, [](double v) { return std::sqrt(v); },
                  [](double, double yv) { return 0.5 / yv; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(x, [](double v) { return sigmoid_stable(v); },
                  [](double, double yv) { return yv * (1.0 - yv); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp with lo > hi");
  return unary_op(x, [lo, hi](double v) { return std::min(hi, std::max(lo, v)); },
                  [lo, hi](double xv, double) { return (xv >= lo && xv <= hi) ? 1.0 : 0.0; });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary_op(x, [lo](double v) { return std::max(lo, v); },
                  [lo](double xv, double) { return xv >= lo ? 1.0 : 0.0; });
}

Tensor clamp_max(const Tensor& x, double hi) {
  return unary_op(x, [hi](double v) { return std::min(hi, v); },
                  [hi](double xv, double) { return xv <= hi ? 1.0 : 0.0; });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  return make_result(shape, x.values(), {x}, [](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    double* gx = grad_of(px);
    const double* g = self.grad.data();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
  });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  BcPlan plan = make_plan(x.shape(), shape);
  if (!same_shape(plan.out, shape))
    throw ShapeError("cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  std::vector<double> out(size_t(plan.numel));
  const double* xv = x.data();
  bc_iter(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t) { out[size_t(i)] = xv[ia]; });
  return make_result(plan.out, std::move(out), {x}, [plan](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    double* gx = grad_of(px);
    const double* g = self.grad.data();
    bc_iter(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t) { gx[ia] += g[i]; });
  });
}

Tensor pad2d(const Tensor& x, int pad) {
  if (pad < 0) throw ContractError("negative padding");
  if (x.ndim() < 2) throw ShapeError("pad2d needs at least 2 dims, got " + shape_str(x.shape()));
  const int nd = x.ndim();
  const int h = x.dim(nd - 2), w = x.dim(nd - 1);
  const int oh = h + 2 * pad, ow = w + 2 * pad;
  Shape oshape = x.shape();
  oshape[size_t(nd - 2)] = oh;
  oshape[size_t(nd - 1)] = ow;
  const std::int64_t lead = x.numel() / (std::int64_t(h) * w);
  std::vector<double> out(size_t(lead) * oh * ow, 0.0);
  const double* xv = x.data();
  for (std::int64_t r = 0; r < lead; ++r)
    for (int i = 0; i < h; ++i)
      std::memcpy(out.data() + (r * oh + i + pad) * ow + pad, xv + (r * h + i) * w,
                  size_t(w) * sizeof(double));
  return make_result(oshape, std::move(out), {x}, [lead, h, w, oh, ow, pad](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    double* gx = grad_of(px);
    const double* g = self.grad.data();
    for (std::int64_t r = 0; r < lead; ++r)
      for (int i = 0; i < h; ++i) {
        const double* grow = g + (r * oh + i + pad) * ow + pad;
        double* xrow = gx + (r * h + i) * w;
        for (int j = 0; j < w; ++j) xrow[j] += grow[j];
      }
  });
}

Tensor sum_axes(const Tensor& x, std::vector<int> axes, bool keepdims) {
  const int nd = x.ndim();
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  std::vector<bool> reduced(size_t(nd), false);
  for (int a : axes) {
    if (a < 0 || a >= nd)
      throw ShapeError("sum axis " + std::to_string(a) + " out of range for " +
                       shape_str(x.shape()));
    reduced[size_t(a)] = true;
  }
  Shape kshape = x.shape();
  for (int d = 0; d < nd; ++d)
    if (reduced[size_t(d)]) kshape[size_t(d)] = 1;
  Shape oshape;
  if (keepdims) {
    oshape = kshape;
  } else {
    for (int d = 0; d < nd; ++d)
      if (!reduced[size_t(d)]) oshape.push_back(x.dim(d));
    if (oshape.empty()) oshape = {1};
  }
  // Per input dim, the stride into the reduced output (0 on reduced dims).
  const auto kst = row_major_strides(kshape);
  std::vector<std::int64_t> ost(size_t(nd), 0);
  for (int d = 0; d < nd; ++d)
    if (!reduced[size_t(d)]) ost[size_t(d)] = kst[size_t(d)];
  const Shape xshape = x.shape();
  std::vector<double> out(size_t(shape_numel(oshape)), 0.0);
  const double* xv = x.data();
  {
    std::vector<int> idx(size_t(nd), 0);
    std::int64_t io = 0;
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      out[size_t(io)] += xv[i];
      for (int d = nd - 1; d >= 0; --d) {
        ++idx[size_t(d)];
        io += ost[size_t(d)];
        if (idx[size_t(d)] < xshape[size_t(d)]) break;
        idx[size_t(d)] = 0;
        io -= ost[size_t(d)] * xshape[size_t(d)];
      }
    }
  }
  return make_result(oshape, std::move(out), {x}, [ost, xshape, nd](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    double* gx = grad_of(px);
    const double* g = self.grad.data();
    std::vector<int> idx(size_t(nd), 0);
    std::int64_t io = 0;
    const std::int64_t n = px.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      gx[i] += g[io];
      for (int d = nd - 1; d >= 0; --d) {
        ++idx[size_t(d)];
        io += ost[size_t(d)];
        if (idx[size_t(d)] < xshape[size_t(d)]) break;
        idx[size_t(d)] = 0;
        io -= ost[size_t(d)] * xshape[size_t(d)];
      }
    }
  });
}

Tensor mean_axes(const Tensor& x, std::vector<int> axes, bool keepdims) {
  Tensor s = sum_axes(x, axes, keepdims);
  const double scale = double(s.numel()) / double(x.numel());
  return mul_scalar(s, scale);
}

Tensor sum_all(const Tensor& x) {
  std::vector<int> axes(size_t(x.ndim()));
  for (int d = 0; d < x.ndim(); ++d) axes[size_t(d)] = d;
  return sum_axes(x, axes, false);
}

Tensor mean_all(const Tensor& x) { return mul_scalar(sum_all(x), 1.0 / double(x.numel())); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_ndim(a, 2, "matmul lhs");
  check_ndim(b, 2, "matmul rhs");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul inner dims disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  std::vector<double> out(size_t(m) * n);
  kernels::gemm(false, false, m, n, k, a.data(), b.data(), 0.0, out.data());
  return make_result({m, n}, std::move(out), {a, b}, [m, n, k](detail::Node& self) {
    Tensor pa = self.parents[0];
    Tensor pb = self.parents[1];
    const double* g = self.grad.data();
    if (pa.requires_grad())
      kernels::gemm(false, true, m, k, n, g, pb.data(), 1.0, grad_of(pa));
    if (pb.requires_grad())
      kernels::gemm(true, false, k, n, m, pa.data(), g, 1.0, grad_of(pb));
  });
}

namespace {

Tensor linear_impl(const Tensor& x, const Tensor& w, const Tensor* bias) {
  check_ndim(x, 2, "linear input");
  check_ndim(w, 2, "linear weight");
  const int m = x.dim(0), k = x.dim(1), n = w.dim(0);
  if (w.dim(1) != k)
    throw ShapeError("linear weight " + shape_str(w.shape()) + " does not match input " +
                     shape_str(x.shape()));
  std::vector<double> out(size_t(m) * n);
  kernels::gemm(false, true, m, n, k, x.data(), w.data(), 0.0, out.data());
  std::vector<Tensor> parents = {x, w};
  if (bias) {
    if (bias->ndim() != 1 || bias->dim(0) != n)
      throw ShapeError("linear bias " + shape_str(bias->shape()) + " does not match output " +
                       std::to_string(n));
    const double* bv = bias->data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out[size_t(i) * n + j] += bv[j];
    parents.push_back(*bias);
  }
  const bool has_bias = bias != nullptr;
  return make_result({m, n}, std::move(out), std::move(parents),
                     [m, n, k, has_bias](detail::Node& self) {
                       Tensor px = self.parents[0];
                       Tensor pw = self.parents[1];
                       const double* g = self.grad.data();
                       if (px.requires_grad())
                         kernels::gemm(false, false, m, k, n, g, pw.data(), 1.0, grad_of(px));
                       if (pw.requires_grad())
                         kernels::gemm(true, false, n, k, m, g, px.data(), 1.0, grad_of(pw));
                       if (has_bias && self.parents[2].requires_grad()) {
                         double* gb = grad_of(self.parents[2]);
                         for (int j = 0; j < n; ++j) {
                           double s = 0.0;
                           for (int i = 0; i < m; ++i) s += g[size_t(i) * n + j];
                           gb[j] += s;
                         }
                       }
                     });
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w) { return linear_impl(x, w, nullptr); }
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  return linear_impl(x, w, &bias);
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
  check_ndim(x, 4, "conv2d input");
  check_ndim(w, 4, "conv2d weight");
  if (w.dim(2) != w.dim(3)) throw ShapeError("conv2d kernel must be square: " + shape_str(w.shape()));
  kernels::ConvDims d;
  d.batch = x.dim(0);
  d.in_c = x.dim(1);
  d.in_h = x.dim(2);
  d.in_w = x.dim(3);
  d.out_c = w.dim(0);
  d.ksize = w.dim(2);
  d.stride = stride;
  d.pad = pad;
  if (w.dim(1) != d.in_c)
    throw ShapeError("conv2d channels disagree: input " + shape_str(x.shape()) + ", weight " +
                     shape_str(w.shape()));
  if (!d.valid())
    throw ShapeError("conv2d geometry invalid for input " + shape_str(x.shape()) + " kernel " +
                     std::to_string(d.ksize) + " stride " + std::to_string(stride) + " pad " +
                     std::to_string(pad));
  std::vector<double> out(size_t(d.batch) * d.out_c * d.out_plane());
  kernels::conv2d_forward(d, x.data(), w.data(), out.data());
  return make_result({d.batch, d.out_c, d.out_h(), d.out_w()}, std::move(out), {x, w},
                     [d](detail::Node& self) {
                       Tensor px = self.parents[0];
                       Tensor pw = self.parents[1];
                       double* dx = px.requires_grad() ? grad_of(px) : nullptr;
                       double* dw = pw.requires_grad() ? grad_of(pw) : nullptr;
                       if (dx || dw)
                         kernels::conv2d_backward(d, px.data(), pw.data(), self.grad.data(), dx, dw);
                     });
}

Tensor maxpool2d(const Tensor& x, int k, int stride) {
  check_ndim(x, 4, "maxpool2d input");
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (k <= 0 || stride <= 0 || h < k || w < k)
    throw ShapeError("maxpool2d window " + std::to_string(k) + " does not fit " +
                     shape_str(x.shape()));
  const int oh = (h - k) / stride + 1;
  const int ow = (w - k) / stride + 1;
  const std::int64_t out_count = std::int64_t(b) * c * oh * ow;
  std::vector<double> out(size_t(out_count), 0.0);
  auto argmax = std::make_shared<std::vector<std::int32_t>>(size_t(out_count));
  kernels::maxpool_forward(b, c, h, w, k, stride, x.data(), out.data(), argmax->data());
  return make_result({b, c, oh, ow}, std::move(out), {x}, [argmax, out_count](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    kernels::maxpool_backward(out_count, argmax->data(), self.grad.data(), grad_of(px));
  });
}

Tensor global_avg_pool(const Tensor& x) {
  check_ndim(x, 4, "global_avg_pool input");
  const int b = x.dim(0), c = x.dim(1);
  const std::int64_t plane = std::int64_t(x.dim(2)) * x.dim(3);
  std::vector<double> out(size_t(b) * c);
  kernels::gap_forward(b, c, plane, x.data(), out.data());
  return make_result({b, c}, std::move(out), {x}, [b, c, plane](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    kernels::gap_backward(b, c, plane, self.grad.data(), grad_of(px));
  });
}

Tensor channel_scale(const Tensor& y, const Tensor& z) {
  check_ndim(y, 4, "channel_scale input");
  check_ndim(z, 2, "channel_scale gate");
  const int b = y.dim(0), c = y.dim(1);
  if (z.dim(0) != b || z.dim(1) != c)
    throw ShapeError("channel_scale gate " + shape_str(z.shape()) + " does not match " +
                     shape_str(y.shape()));
  const std::int64_t plane = std::int64_t(y.dim(2)) * y.dim(3);
  const int rows = b * c;
  std::vector<double> out(size_t(rows) * plane);
  const double* yv = y.data();
  const double* zv = z.data();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double s = zv[r];
    const double* in = yv + r * plane;
    double* o = out.data() + r * plane;
    for (std::int64_t i = 0; i < plane; ++i) o[i] = in[i] * s;
  }
  return make_result(y.shape(), std::move(out), {y, z}, [rows, plane](detail::Node& self) {
    Tensor py = self.parents[0];
    Tensor pz = self.parents[1];
    const double* g = self.grad.data();
    const double* yv = py.data();
    const double* zv = pz.data();
    double* gy = py.requires_grad() ? grad_of(py) : nullptr;
    double* gz = pz.requires_grad() ? grad_of(pz) : nullptr;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      const double* grow = g + r * plane;
      if (gy) {
        const double s = zv[r];
        double* out = gy + r * plane;
        for (std::int64_t i = 0; i < plane; ++i) out[i] += grow[i] * s;
      }
      if (gz) {
        const double* in = yv + r * plane;
        double acc = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) acc += grow[i] * in[i];
        gz[r] += acc;
      }
    }
  });
}

Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                       std::vector<double>* batch_mean, std::vector<double>* batch_var) {
  check_ndim(x, 4, "batchnorm input");
  const int b = x.dim(0), c = x.dim(1);
  if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c)
    throw ShapeError("batchnorm scale/shift must be [" + std::to_string(c) + "]");
  const std::int64_t plane = std::int64_t(x.dim(2)) * x.dim(3);
  std::vector<double> out(size_t(x.numel()));
  auto xhat = std::make_shared<std::vector<double>>(size_t(x.numel()));
  std::vector<double> mean(size_t(c), 0.0), var(size_t(c), 0.0);
  auto invstd = std::make_shared<std::vector<double>>(size_t(c));
  kernels::bn_train_forward(b, c, plane, eps, x.data(), gamma.data(), beta.data(), out.data(),
                            xhat->data(), mean.data(), var.data(), invstd->data());
  if (batch_mean) *batch_mean = mean;
  if (batch_var) *batch_var = var;
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [b, c, plane, xhat, invstd](detail::Node& self) {
                       Tensor px = self.parents[0];
                       Tensor pg = self.parents[1];
                       Tensor pb = self.parents[2];
                       double* dx = px.requires_grad() ? grad_of(px) : nullptr;
                       double* dgamma = pg.requires_grad() ? grad_of(pg) : nullptr;
                       double* dbeta = pb.requires_grad() ? grad_of(pb) : nullptr;
                       if (dx || dgamma || dbeta)
                         kernels::bn_train_backward(b, c, plane, self.grad.data(), xhat->data(),
                                                    invstd->data(), pg.data(), dx, dgamma, dbeta);
                     });
}

Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      const std::vector<double>& mean, const std::vector<double>& var,
                      double eps) {
  check_ndim(x, 4, "batchnorm input");
  const int b = x.dim(0), c = x.dim(1);
  if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c)
    throw ShapeError("batchnorm scale/shift must be [" + std::to_string(c) + "]");
  if (int(mean.size()) != c || int(var.size()) != c)
    throw ShapeError("batchnorm running stats must have " + std::to_string(c) + " channels");
  const std::int64_t plane = std::int64_t(x.dim(2)) * x.dim(3);
  std::vector<double> out(size_t(x.numel()));
  kernels::bn_eval_forward(b, c, plane, eps, x.data(), gamma.data(), beta.data(), mean.data(),
                           var.data(), out.data());
  auto m = std::make_shared<std::vector<double>>(mean);
  auto v = std::make_shared<std::vector<double>>(var);
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [b, c, plane, eps, m, v](detail::Node& self) {
                       Tensor px = self.parents[0];
                       Tensor pg = self.parents[1];
                       Tensor pb = self.parents[2];
                       double* dx = px.requires_grad() ? grad_of(px) : nullptr;
                       double* dgamma = pg.requires_grad() ? grad_of(pg) : nullptr;
                       double* dbeta = pb.requires_grad() ? grad_of(pb) : nullptr;
                       if (dx || dgamma || dbeta)
                         kernels::bn_eval_backward(b, c, plane, eps, self.grad.data(), pg.data(),
                                                   v->data(), dx, dgamma, dbeta, px.data(),
                                                   m->data());
                     });
}

Tensor value_override(const Tensor& x, std::vector<double> values) {
  if (std::int64_t(values.size()) != x.numel())
    throw ShapeError("value_override size " + std::to_string(values.size()) +
                     " does not match " + shape_str(x.shape()));
  return make_result(x.shape(), std::move(values), {x}, [](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    double* gx = grad_of(px);
    const double* g = self.grad.data();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  check_ndim(logits, 2, "cross_entropy logits");
  const int b = logits.dim(0), k = logits.dim(1);
  if (int(labels.size()) != b)
    throw ShapeError("cross_entropy got " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(b));
  for (int lab : labels)
    if (lab < 0 || lab >= k)
      throw ContractError("cross_entropy label " + std::to_string(lab) + " outside [0," +
                          std::to_string(k) + ")");
  const double* v = logits.data();
  auto probs = std::make_shared<std::vector<double>>(size_t(b) * k);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = v + size_t(i) * k;
    double m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(row[j] - m);
    const double lse = m + std::log(s);
    total += lse - row[labels[size_t(i)]];
    double* p = probs->data() + size_t(i) * k;
    for (int j = 0; j < k; ++j) p[j] = std::exp(row[j] - m) / s;
  }
  auto labs = std::make_shared<std::vector<int>>(labels);
  return make_result({1}, {total / b}, {logits}, [probs, labs, b, k](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    double* gx = grad_of(px);
    const double g = self.grad[0];
    for (int i = 0; i < b; ++i) {
      const double* p = probs->data() + size_t(i) * k;
      double* out = gx + size_t(i) * k;
      const int lab = (*labs)[size_t(i)];
      for (int j = 0; j < k; ++j) out[j] += g * (p[j] - (j == lab ? 1.0 : 0.0)) / b;
    }
  });
}

Tensor softmax(const Tensor& x) {
  check_ndim(x, 2, "softmax input");
  const int b = x.dim(0), k = x.dim(1);
  std::vector<double> out(size_t(b) * k);
  const double* v = x.data();
  for (int i = 0; i < b; ++i) {
    const double* row = v + size_t(i) * k;
    double* o = out.data() + size_t(i) * k;
    double m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      o[j] = std::exp(row[j] - m);
      s += o[j];
    }
    for (int j = 0; j < k; ++j) o[j] /= s;
  }
  return make_result(x.shape(), std::move(out), {x}, [b, k](detail::Node& self) {
    Tensor px = self.parents[0];
    if (!px.requires_grad()) return;
    double* gx = grad_of(px);
    const double* y = self.value.data();
    const double* g = self.grad.data();
    for (int i = 0; i < b; ++i) {
      const double* yr = y + size_t(i) * k;
      const double* gr = g + size_t(i) * k;
      double dot = 0.0;
      for (int j = 0; j < k; ++j) dot += gr[j] * yr[j];
      double* out = gx + size_t(i) * k;
      for (int j = 0; j < k; ++j) out[j] += yr[j] * (gr[j] - dot);
    }
  });
}

std::vector<int> argmax_rows(const Tensor& x) {
  check_ndim(x, 2, "argmax_rows input");
  const int b = x.dim(0), k = x.dim(1);
  std::vector<int> out(size_t(b), 0);
  const double* v = x.data();
  for (int i = 0; i < b; ++i) {
    const double* row = v + size_t(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    out[size_t(i)] = best;
  }
  return out;
}

}  // namespace pathcnn::ops
