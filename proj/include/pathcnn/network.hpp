#pragma once

#include <cstdint>
#include <vector>

#include "pathcnn/gating.hpp"
#include "pathcnn/layers.hpp"
#include "pathcnn/losses.hpp"
#include "pathcnn/tensor.hpp"

namespace pathcnn {

struct ConvBlockSpec {
  int out_channels = 0;
  int ksize = 3;
  int stride = 1;
  int pad = 1;
  bool gated = false;
  bool pool_after = false;  // 2x2 stride-2 max pool
};

struct NetworkSpec {
  std::vector<ConvBlockSpec> blocks;
  int in_channels = 1;
  int classes = 10;
  int gate_reduction = 4;
  double gate_logit_offset = 0.1;
  int pool_size = 2;
  int pool_stride = 2;

  // conv3x3(16) - [g conv3x3(32)] - pool - [g conv3x3(64)] - [g conv3x3(64)]
  // - pool - conv3x3(64) - GAP - dense(classes)
  static NetworkSpec vgg_mini(int in_channels, int classes, bool gates = true);
  // Three-block net small enough for exhaustive tests.
  static NetworkSpec tiny(int in_channels, int classes, bool gates = true);

  void validate() const;
  GateSchedule schedule() const;
  int num_gated() const;
};

struct ConvBlock {
  Conv2dLayer conv;
  BatchNormLayer bn;
  GateModule gate;           // weights undefined when !gated
  LayerClassifierHead head;  // same
  bool gated = false;
  bool pool_after = false;
};

// Everything one forward pass produces beyond the class logits. encodings
// and gate_gaps have one entry per gated block, in network order; gate_gaps
// is the GAP of the block's pre-mask output (the KL target).
struct ForwardTrace {
  Tensor logits;
  std::vector<ArchitectureEncoding> encodings;
  std::vector<Tensor> gate_gaps;
};

// Single-sample inference over only the active channels, with exact
// operation accounting. conv_flops counts 2*D^2*|in|*|out|*OH*OW per conv;
// gate_flops counts 2*C*width + 2*width*N per gate.
struct MaskedSampleResult {
  std::vector<double> logits;
  std::vector<std::vector<int>> active;  // active output channels per gated block
  std::int64_t conv_flops = 0;
  std::int64_t gate_flops = 0;
};

class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  std::vector<ConvBlock>& conv_blocks() { return blocks_; }
  const std::vector<ConvBlock>& conv_blocks() const { return blocks_; }
  DenseLayer& classifier() { return fc_; }
  const DenseLayer& classifier() const { return fc_; }
  int classes() const { return spec_.classes; }
  int num_gated_blocks() const;

  // All trainable tensors in a fixed order (conv, bn, gate, head per block,
  // then the classifier). Order is the checkpoint and optimizer contract.
  std::vector<Tensor> params();
  std::int64_t param_count() const;

  ForwardTrace forward_train(const Tensor& x, SemhashSampler& sampler);
  // Binary gates from the logits; no graph recorded.
  ForwardTrace forward_eval(const Tensor& x);
  // Eval semantics but recorded, so gradients reach the input; the binary
  // gates are fixed constants computed outside the graph.
  ForwardTrace forward_attack(const Tensor& x);
  // Eval with explicit per-gated-block masks replacing the gate decisions.
  Tensor forward_eval_masked(const Tensor& x, const std::vector<ChannelMask>& masks);

  // image is one sample [in_channels * h * w], already normalized.
  MaskedSampleResult infer_masked_sample(const std::vector<double>& image, int h, int w);

  // Structural surgery used by pruning: drop the listed output filters of
  // gated block `block` everywhere they appear (conv rows, bn rows, gate w2
  // rows, head columns, next conv's input slices, next gate's w1 columns).
  void remove_filters(int block, const std::vector<int>& filters);

 private:
  enum class Mode { train, eval, attack };
  ForwardTrace run(const Tensor& x, Mode mode, SemhashSampler* sampler,
                   const std::vector<ChannelMask>* masks);

  NetworkSpec spec_;
  std::vector<ConvBlock> blocks_;
  DenseLayer fc_;
};

}  // namespace pathcnn
