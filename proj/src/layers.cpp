#include "pathcnn/layers.hpp"

#include <cmath>

#include "pathcnn/ops.hpp"

namespace pathcnn {

void fill_normal(Tensor& t, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values()) v = dist(rng);
}

void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values()) v = dist(rng);
}

Conv2dLayer::Conv2dLayer(int out_c, int in_c, int ksize, int stride_, int pad_, bool with_bias) {
  if (out_c <= 0 || in_c <= 0 || ksize <= 0 || stride_ <= 0 || pad_ < 0)
    throw ContractError("invalid conv layer geometry");
  weight = Tensor::zeros({out_c, in_c, ksize, ksize});
  weight.set_requires_grad(true);
  if (with_bias) {
    bias = Tensor::zeros({out_c});
    bias.set_requires_grad(true);
  }
  stride = stride_;
  pad = pad_;
}

void Conv2dLayer::init_he(std::mt19937_64& rng) {
  const double fan_in = double(in_channels()) * ksize() * ksize();
  fill_normal(weight, rng, std::sqrt(2.0 / fan_in));
}

Tensor Conv2dLayer::forward(const Tensor& x) const {
  Tensor y = ops::conv2d(x, weight, stride, pad);
  if (bias.defined()) y = ops::add(y, ops::reshape(bias, {1, out_channels(), 1, 1}));
  return y;
}

BatchNormLayer::BatchNormLayer(int channels) {
  if (channels <= 0) throw ContractError("batchnorm needs positive channel count");
  gamma = Tensor::full({channels}, 1.0);
  gamma.set_requires_grad(true);
  beta = Tensor::zeros({channels});
  beta.set_requires_grad(true);
  running_mean.assign(size_t(channels), 0.0);
  running_var.assign(size_t(channels), 1.0);
}

Tensor BatchNormLayer::forward(const Tensor& x, bool training) {
  if (!training) return ops::batchnorm_eval(x, gamma, beta, running_mean, running_var, eps);
  std::vector<double> mean, var;
  Tensor y = ops::batchnorm_train(x, gamma, beta, eps, &mean, &var);
  const double m_count = double(x.dim(0)) * x.dim(2) * x.dim(3);
  // Running variance uses the unbiased estimate, normalization the biased one.
  const double unbias = m_count > 1.0 ? m_count / (m_count - 1.0) : 1.0;
  for (int c = 0; c < channels(); ++c) {
    running_mean[size_t(c)] = (1.0 - momentum) * running_mean[size_t(c)] + momentum * mean[size_t(c)];
    running_var[size_t(c)] =
        (1.0 - momentum) * running_var[size_t(c)] + momentum * var[size_t(c)] * unbias;
  }
  return y;
}

DenseLayer::DenseLayer(int out, int in, bool with_bias) {
  if (out <= 0 || in <= 0) throw ContractError("invalid dense layer size");
  weight = Tensor::zeros({out, in});
  weight.set_requires_grad(true);
  if (with_bias) {
    bias = Tensor::zeros({out});
    bias.set_requires_grad(true);
  }
}

void DenseLayer::init_he(std::mt19937_64& rng) {
  fill_normal(weight, rng, std::sqrt(2.0 / double(in_features())));
}

Tensor DenseLayer::forward(const Tensor& x) const {
  if (bias.defined()) return ops::linear(x, weight, bias);
  return ops::linear(x, weight);
}

ChannelMask::ChannelMask(std::vector<double> mult) : m(std::move(mult)) {
  for (double v : m)
    if (v < 0.0 || v > 1.0) throw ContractError("channel mask entries must lie in [0,1]");
}

ChannelMask ChannelMask::ones(int channels) {
  return ChannelMask(std::vector<double>(size_t(channels), 1.0));
}

std::vector<int> ChannelMask::active() const {
  std::vector<int> idx;
  for (int i = 0; i < channels(); ++i)
    if (m[size_t(i)] != 0.0) idx.push_back(i);
  return idx;
}

Tensor ChannelMask::apply(const Tensor& y) const {
  if (y.ndim() != 4 || y.dim(1) != channels())
    throw ShapeError("mask of " + std::to_string(channels()) + " channels cannot apply to " +
                     shape_str(y.shape()));
  Tensor mt = Tensor::from({1, channels(), 1, 1}, m);
  return ops::mul(y, mt);
}

}  // namespace pathcnn
