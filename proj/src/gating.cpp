#include "pathcnn/gating.hpp"

#include <cmath>

#include "pathcnn/layers.hpp"
#include "pathcnn/ops.hpp"

namespace pathcnn {

Tensor saturating_sigmoid(const Tensor& x) {
  // (12*sigmoid - 1) / 10 rather than 1.2*sigmoid - 0.1: the latter misses
  // exact 0.5 at x = 0 in double precision.
  Tensor s = ops::mul_scalar(ops::sigmoid(x), 12.0);
  Tensor lin = ops::div(ops::add_scalar(s, -1.0), Tensor::scalar(10.0));
  return ops::clamp(lin, 0.0, 1.0);
}

GateModule::GateModule(int in_channels, int out_channels, int reduction_) {
  if (in_channels <= 0 || out_channels <= 0 || reduction_ <= 0)
    throw ContractError("invalid gate module sizes");
  reduction = reduction_;
  const int w = std::max(1, in_channels / reduction_);
  w1 = Tensor::zeros({w, in_channels});
  w1.set_requires_grad(true);
  w2 = Tensor::zeros({out_channels, w});
  w2.set_requires_grad(true);
}

void GateModule::init(std::mt19937_64& rng) {
  fill_normal(w1, rng, std::sqrt(2.0 / double(in_channels())));
  fill_normal(w2, rng, std::sqrt(2.0 / double(width())));
}

Tensor GateModule::logits(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != in_channels())
    throw ShapeError("gate over " + std::to_string(in_channels()) + " channels cannot read " +
                     shape_str(x.shape()));
  Tensor s = ops::global_avg_pool(x);
  Tensor h = ops::relu(ops::linear(s, w1));
  Tensor out = ops::linear(h, w2);
  if (logit_offset != 0.0) out = ops::add_scalar(out, logit_offset);
  return out;
}

ArchitectureEncoding semhash_train(const Tensor& logits, SemhashSampler& sampler) {
  if (logits.ndim() != 2) throw ShapeError("semhash expects [batch, n] logits");
  const std::int64_t n = logits.numel();
  std::vector<double> noise(size_t(n), 0.0);
  for (auto& v : noise) v = sampler.noise();
  const bool emit_v2 = sampler.coin();

  Tensor a = Tensor::from(logits.shape(), std::move(noise));
  Tensor noisy = ops::add(logits, a);
  Tensor v1 = saturating_sigmoid(noisy);

  ArchitectureEncoding enc;
  enc.logits = logits;
  enc.noisy = noisy;
  enc.used_v2 = emit_v2;
  enc.binary = emit_v2;
  if (emit_v2) {
    std::vector<double> hard(size_t(n), 0.0);
    const double* s = noisy.data();
    for (std::int64_t i = 0; i < n; ++i) hard[size_t(i)] = s[i] > 0.0 ? 1.0 : 0.0;
    enc.z = ops::value_override(v1, std::move(hard));
  } else {
    enc.z = v1;
  }
  return enc;
}

ArchitectureEncoding semhash_eval(const Tensor& logits) {
  if (logits.ndim() != 2) throw ShapeError("semhash expects [batch, n] logits");
  const std::int64_t n = logits.numel();
  std::vector<double> hard(size_t(n), 0.0);
  const double* s = logits.data();
  for (std::int64_t i = 0; i < n; ++i) hard[size_t(i)] = s[i] > 0.0 ? 1.0 : 0.0;

  ArchitectureEncoding enc;
  enc.logits = logits;
  enc.noisy = logits;
  enc.binary = true;
  enc.used_v2 = false;
  enc.z = Tensor::from(logits.shape(), std::move(hard));
  return enc;
}

Tensor apply_gate(const Tensor& y, const ArchitectureEncoding& enc) {
  if (y.ndim() != 4 || enc.z.ndim() != 2 || y.dim(0) != enc.z.dim(0) || y.dim(1) != enc.z.dim(1))
    throw ShapeError("gate encoding " + shape_str(enc.z.shape()) + " does not match output " +
                     shape_str(y.shape()));
  return ops::channel_scale(y, enc.z);
}

GateSchedule GateSchedule::none(int num_conv) {
  GateSchedule g;
  g.gated.assign(size_t(num_conv), false);
  return g;
}

GateSchedule GateSchedule::interior(int num_conv) {
  GateSchedule g;
  g.gated.assign(size_t(num_conv), true);
  if (!g.gated.empty()) {
    g.gated.front() = false;
    g.gated.back() = false;
  }
  g.validate();
  return g;
}

void GateSchedule::validate() const {
  if (gated.empty()) throw ContractError("gate schedule for zero conv layers");
  if (gated.front() || gated.back())
    throw ContractError("first and last conv layers must stay ungated");
}

}  // namespace pathcnn
