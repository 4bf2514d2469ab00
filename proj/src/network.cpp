#include "pathcnn/network.hpp"

#include <cmath>
#include <numeric>

#include "pathcnn/kernels.hpp"
#include "pathcnn/ops.hpp"

namespace pathcnn {

NetworkSpec NetworkSpec::vgg_mini(int in_channels, int classes, bool gates) {
  NetworkSpec s;
  s.in_channels = in_channels;
  s.classes = classes;
  s.blocks = {
      {16, 3, 1, 1, false, false},
      {32, 3, 1, 1, gates, true},
      {64, 3, 1, 1, gates, false},
      {64, 3, 1, 1, gates, true},
      {64, 3, 1, 1, false, false},
  };
  s.validate();
  return s;
}

NetworkSpec NetworkSpec::tiny(int in_channels, int classes, bool gates) {
  NetworkSpec s;
  s.in_channels = in_channels;
  s.classes = classes;
  s.blocks = {
      {4, 3, 1, 1, false, false},
      {6, 3, 1, 1, gates, true},
      {4, 3, 1, 1, false, false},
  };
  s.validate();
  return s;
}

void NetworkSpec::validate() const {
  if (blocks.empty()) throw ContractError("network needs at least one conv block");
  if (in_channels <= 0 || classes < 2) throw ContractError("invalid input channels / class count");
  if (gate_reduction < 1) throw ContractError("gate reduction must be >= 1");
  if (pool_size <= 0 || pool_stride <= 0) throw ContractError("invalid pool geometry");
  for (const auto& b : blocks)
    if (b.out_channels <= 0 || b.ksize <= 0 || b.stride <= 0 || b.pad < 0)
      throw ContractError("invalid conv block geometry");
  schedule().validate();
}

GateSchedule NetworkSpec::schedule() const {
  GateSchedule g;
  for (const auto& b : blocks) g.gated.push_back(b.gated);
  return g;
}

int NetworkSpec::num_gated() const {
  int n = 0;
  for (const auto& b : blocks) n += b.gated ? 1 : 0;
  return n;
}

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  int in_c = spec_.in_channels;
  for (const auto& bs : spec_.blocks) {
    ConvBlock blk;
    blk.conv = Conv2dLayer(bs.out_channels, in_c, bs.ksize, bs.stride, bs.pad, false);
    blk.conv.init_he(rng);
    blk.bn = BatchNormLayer(bs.out_channels);
    blk.gated = bs.gated;
    blk.pool_after = bs.pool_after;
    if (bs.gated) {
      blk.gate = GateModule(in_c, bs.out_channels, spec_.gate_reduction);
      blk.gate.init(rng);
      blk.gate.logit_offset = spec_.gate_logit_offset;
      blk.head = LayerClassifierHead(spec_.classes, bs.out_channels);
      blk.head.cla.init_he(rng);
    }
    blocks_.push_back(std::move(blk));
    in_c = bs.out_channels;
  }
  fc_ = DenseLayer(spec_.classes, in_c, true);
  fc_.init_he(rng);
}

std::vector<Tensor> Network::params() {
  std::vector<Tensor> p;
  for (auto& blk : blocks_) {
    p.push_back(blk.conv.weight);
    if (blk.conv.bias.defined()) p.push_back(blk.conv.bias);
    p.push_back(blk.bn.gamma);
    p.push_back(blk.bn.beta);
    if (blk.gated) {
      p.push_back(blk.gate.w1);
      p.push_back(blk.gate.w2);
      p.push_back(blk.head.cla.weight);
    }
  }
  p.push_back(fc_.weight);
  p.push_back(fc_.bias);
  return p;
}

std::int64_t Network::param_count() const {
  std::int64_t n = 0;
  for (const auto& blk : blocks_) {
    n += blk.conv.weight.numel();
    if (blk.conv.bias.defined()) n += blk.conv.bias.numel();
    n += blk.bn.gamma.numel() + blk.bn.beta.numel();
    if (blk.gated)
      n += blk.gate.w1.numel() + blk.gate.w2.numel() + blk.head.cla.weight.numel();
  }
  n += fc_.weight.numel() + fc_.bias.numel();
  return n;
}

ForwardTrace Network::run(const Tensor& x0, Mode mode, SemhashSampler* sampler,
                          const std::vector<ChannelMask>* masks) {
  if (x0.ndim() != 4 || x0.dim(1) != spec_.in_channels)
    throw ShapeError("network expects [batch," + std::to_string(spec_.in_channels) +
                     ",h,w] input, got " + shape_str(x0.shape()));
  if (masks && int(masks->size()) != num_gated_blocks())
    throw ContractError("mask count " + std::to_string(masks->size()) + " does not match " +
                        std::to_string(num_gated_blocks()) + " gated blocks");
  const bool training = mode == Mode::train;
  ForwardTrace trace;
  Tensor x = x0;
  int gi = 0;
  for (auto& blk : blocks_) {
    Tensor logits;
    if (blk.gated && !masks) {
      if (mode == Mode::attack) {
        NoGradGuard ng;
        logits = blk.gate.logits(x);
      } else {
        logits = blk.gate.logits(x);
      }
    }
    Tensor y = ops::relu(blk.bn.forward(blk.conv.forward(x), training));
    if (blk.gated) {
      if (masks) {
        y = (*masks)[size_t(gi)].apply(y);
      } else {
        Tensor gap = ops::global_avg_pool(y);
        ArchitectureEncoding enc =
            training ? semhash_train(logits, *sampler) : semhash_eval(logits);
        y = apply_gate(y, enc);
        trace.encodings.push_back(std::move(enc));
        trace.gate_gaps.push_back(std::move(gap));
      }
      ++gi;
    }
    if (blk.pool_after) y = ops::maxpool2d(y, spec_.pool_size, spec_.pool_stride);
    x = y;
  }
  trace.logits = fc_.forward(ops::global_avg_pool(x));
  return trace;
}

int Network::num_gated_blocks() const { return spec_.num_gated(); }

ForwardTrace Network::forward_train(const Tensor& x, SemhashSampler& sampler) {
  return run(x, Mode::train, &sampler, nullptr);
}

ForwardTrace Network::forward_eval(const Tensor& x) {
  NoGradGuard ng;
  return run(x, Mode::eval, nullptr, nullptr);
}

ForwardTrace Network::forward_attack(const Tensor& x) {
  return run(x, Mode::attack, nullptr, nullptr);
}

Tensor Network::forward_eval_masked(const Tensor& x, const std::vector<ChannelMask>& masks) {
  NoGradGuard ng;
  return run(x, Mode::eval, nullptr, &masks).logits;
}

MaskedSampleResult Network::infer_masked_sample(const std::vector<double>& image, int h, int w) {
  if (std::int64_t(image.size()) != std::int64_t(spec_.in_channels) * h * w)
    throw ShapeError("sample size " + std::to_string(image.size()) + " does not match " +
                     std::to_string(spec_.in_channels) + "x" + std::to_string(h) + "x" +
                     std::to_string(w));
  MaskedSampleResult res;
  std::vector<double> x = image;
  int cur_c = spec_.in_channels, cur_h = h, cur_w = w;
  std::vector<int> active_in(size_t(cur_c), 0);
  std::iota(active_in.begin(), active_in.end(), 0);

  for (auto& blk : blocks_) {
    const int n = blk.conv.out_channels();
    const std::int64_t plane = std::int64_t(cur_h) * cur_w;
    std::vector<int> active_out;
    if (blk.gated) {
      std::vector<double> s(size_t(cur_c), 0.0);
      for (int c = 0; c < cur_c; ++c) {
        double acc = 0.0;
        const double* in = x.data() + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) acc += in[i];
        s[size_t(c)] = acc / double(plane);
      }
      const int width = blk.gate.width();
      const double* w1 = blk.gate.w1.data();
      const double* w2 = blk.gate.w2.data();
      std::vector<double> hid(size_t(width), 0.0);
      for (int i = 0; i < width; ++i) {
        double acc = 0.0;
        for (int c = 0; c < cur_c; ++c) acc += w1[std::int64_t(i) * cur_c + c] * s[size_t(c)];
        hid[size_t(i)] = acc > 0.0 ? acc : 0.0;
      }
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < width; ++i) acc += w2[std::int64_t(j) * width + i] * hid[size_t(i)];
        acc += blk.gate.logit_offset;
        if (acc > 0.0) active_out.push_back(j);
      }
      res.gate_flops += 2LL * cur_c * width + 2LL * width * n;
      res.active.push_back(active_out);
    } else {
      active_out.resize(size_t(n));
      std::iota(active_out.begin(), active_out.end(), 0);
    }

    kernels::ConvDims d;
    d.batch = 1;
    d.in_c = cur_c;
    d.in_h = cur_h;
    d.in_w = cur_w;
    d.out_c = n;
    d.ksize = blk.conv.ksize();
    d.stride = blk.conv.stride;
    d.pad = blk.conv.pad;
    const int oh = d.out_h(), ow = d.out_w();
    const std::int64_t oplane = std::int64_t(oh) * ow;
    std::vector<double> y(size_t(n) * oplane, 0.0);
    kernels::masked_conv2d(d, x.data(), blk.conv.weight.data(), active_in, active_out, y.data());
    res.conv_flops += 2LL * d.ksize * d.ksize * std::int64_t(active_in.size()) *
                      std::int64_t(active_out.size()) * oh * ow;

    const double* gamma = blk.bn.gamma.data();
    const double* beta = blk.bn.beta.data();
    for (int c : active_out) {
      const double is = 1.0 / std::sqrt(blk.bn.running_var[size_t(c)] + blk.bn.eps);
      const double mu = blk.bn.running_mean[size_t(c)];
      double* row = y.data() + c * oplane;
      for (std::int64_t i = 0; i < oplane; ++i) {
        const double v = gamma[c] * (row[i] - mu) * is + beta[c];
        row[i] = v > 0.0 ? v : 0.0;
      }
    }

    cur_c = n;
    cur_h = oh;
    cur_w = ow;
    if (blk.pool_after) {
      const int ph = (cur_h - spec_.pool_size) / spec_.pool_stride + 1;
      const int pw = (cur_w - spec_.pool_size) / spec_.pool_stride + 1;
      std::vector<double> pooled(size_t(n) * ph * pw, 0.0);
      std::vector<std::int32_t> arg(size_t(n) * ph * pw, 0);
      kernels::maxpool_forward(1, n, cur_h, cur_w, spec_.pool_size, spec_.pool_stride, y.data(),
                               pooled.data(), arg.data());
      y = std::move(pooled);
      cur_h = ph;
      cur_w = pw;
    }
    x = std::move(y);
    active_in = std::move(active_out);
  }

  const std::int64_t plane = std::int64_t(cur_h) * cur_w;
  std::vector<double> feat(size_t(cur_c), 0.0);
  for (int c = 0; c < cur_c; ++c) {
    double acc = 0.0;
    const double* in = x.data() + c * plane;
    for (std::int64_t i = 0; i < plane; ++i) acc += in[i];
    feat[size_t(c)] = acc / double(plane);
  }
  const double* fw = fc_.weight.data();
  const double* fb = fc_.bias.data();
  res.logits.assign(size_t(spec_.classes), 0.0);
  for (int j = 0; j < spec_.classes; ++j) {
    double acc = 0.0;
    for (int c = 0; c < cur_c; ++c) acc += fw[std::int64_t(j) * cur_c + c] * feat[size_t(c)];
    res.logits[size_t(j)] = acc + fb[j];
  }
  return res;
}

namespace {

// Drops the flagged indices of the middle axis of a [outer, mid, inner] view.
std::vector<double> drop_mid(const std::vector<double>& v, std::int64_t outer, std::int64_t mid,
                             std::int64_t inner, const std::vector<bool>& keep) {
  std::int64_t kept = 0;
  for (bool k : keep) kept += k ? 1 : 0;
  std::vector<double> out;
  out.reserve(size_t(outer * kept * inner));
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t m = 0; m < mid; ++m) {
      if (!keep[size_t(m)]) continue;
      const double* src = v.data() + (o * mid + m) * inner;
      out.insert(out.end(), src, src + inner);
    }
  return out;
}

Tensor remake(const Shape& shape, std::vector<double> v) {
  Tensor t = Tensor::from(shape, std::move(v));
  t.set_requires_grad(true);
  return t;
}

}  // namespace

void Network::remove_filters(int block, const std::vector<int>& filters) {
  if (block < 0 || block >= int(blocks_.size()))
    throw ContractError("remove_filters: block index out of range");
  ConvBlock& blk = blocks_[size_t(block)];
  if (!blk.gated) throw ContractError("remove_filters: block " + std::to_string(block) +
                                      " is not gated");
  if (filters.empty()) return;
  const int n = blk.conv.out_channels();
  std::vector<bool> keep(size_t(n), true);
  for (int f : filters) {
    if (f < 0 || f >= n) throw ContractError("remove_filters: filter index out of range");
    keep[size_t(f)] = false;
  }
  int kept = 0;
  for (bool k : keep) kept += k ? 1 : 0;
  if (kept == 0)
    throw ContractError("remove_filters would empty block " + std::to_string(block));

  const int in_c = blk.conv.in_channels();
  const int ksz = blk.conv.ksize();
  blk.conv.weight = remake({kept, in_c, ksz, ksz},
                           drop_mid(blk.conv.weight.values(), 1, n,
                                    std::int64_t(in_c) * ksz * ksz, keep));
  blk.bn.gamma = remake({kept}, drop_mid(blk.bn.gamma.values(), 1, n, 1, keep));
  blk.bn.beta = remake({kept}, drop_mid(blk.bn.beta.values(), 1, n, 1, keep));
  {
    std::vector<double> rm, rv;
    for (int i = 0; i < n; ++i)
      if (keep[size_t(i)]) {
        rm.push_back(blk.bn.running_mean[size_t(i)]);
        rv.push_back(blk.bn.running_var[size_t(i)]);
      }
    blk.bn.running_mean = std::move(rm);
    blk.bn.running_var = std::move(rv);
  }
  blk.gate.w2 = remake({kept, blk.gate.width()},
                       drop_mid(blk.gate.w2.values(), 1, n, blk.gate.width(), keep));
  blk.head.cla.weight = remake({spec_.classes, kept},
                               drop_mid(blk.head.cla.weight.values(), spec_.classes, n, 1, keep));

  // Gated blocks are never last, so a following conv block exists.
  ConvBlock& next = blocks_[size_t(block) + 1];
  const int n2 = next.conv.out_channels();
  const int k2 = next.conv.ksize();
  next.conv.weight = remake({n2, kept, k2, k2},
                            drop_mid(next.conv.weight.values(), n2, n,
                                     std::int64_t(k2) * k2, keep));
  if (next.gated)
    next.gate.w1 = remake({next.gate.width(), kept},
                          drop_mid(next.gate.w1.values(), next.gate.width(), n, 1, keep));

  spec_.blocks[size_t(block)].out_channels = kept;
}

}  // namespace pathcnn
