#pragma once

#include <random>
#include <vector>

#include "pathcnn/tensor.hpp"

namespace pathcnn {

// Gaussian / uniform fills for parameter init. Deterministic given the rng
// state and the fixed draw order (row-major).
void fill_normal(Tensor& t, std::mt19937_64& rng, double stddev);
void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi);

struct Conv2dLayer {
  Tensor weight;  // [out_c, in_c, k, k]
  Tensor bias;    // [out_c]; undefined when the layer has no bias
  int stride = 1;
  int pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(int out_c, int in_c, int ksize, int stride, int pad, bool with_bias = false);

  int out_channels() const { return weight.dim(0); }
  int in_channels() const { return weight.dim(1); }
  int ksize() const { return weight.dim(2); }

  void init_he(std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

struct BatchNormLayer {
  Tensor gamma, beta;  // [c]
  std::vector<double> running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNormLayer() = default;
  explicit BatchNormLayer(int channels);

  int channels() const { return gamma.dim(0); }
  // Training mode normalizes with batch statistics and folds them into the
  // running estimates (unbiased variance); eval mode is a fixed affine map.
  Tensor forward(const Tensor& x, bool training);
};

struct DenseLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]; undefined when absent

  DenseLayer() = default;
  DenseLayer(int out, int in, bool with_bias = true);

  int out_features() const { return weight.dim(0); }
  int in_features() const { return weight.dim(1); }

  void init_he(std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;  // x [batch, in]
};

// Per-output-channel multiplier in [0,1]; binary at eval time. A zero entry
// makes the whole channel exactly zero.
struct ChannelMask {
  std::vector<double> m;

  ChannelMask() = default;
  explicit ChannelMask(std::vector<double> mult);
  static ChannelMask ones(int channels);

  int channels() const { return int(m.size()); }
  std::vector<int> active() const;  // indices with m != 0
  Tensor apply(const Tensor& y) const;  // y [batch, channels, h, w]
};

}  // namespace pathcnn
