#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pathcnn/tensor.hpp"

namespace pathcnn {

// max(0, min(1, 1.2*sigmoid(x) - 0.1)). Exactly 0.5 at x = 0; saturates to
// 0/1 outside the linear region with zero gradient there.
Tensor saturating_sigmoid(const Tensor& x);

// Bottleneck gate over the squeezed input: G(s) = W2 * relu(W1 * s) with
// s = GAP(x). No bias terms. logit_offset is a fixed (untrained) constant
// added to every logit; zero keeps the raw form.
struct GateModule {
  Tensor w1;  // [width, in_channels], width = max(1, in_channels / reduction)
  Tensor w2;  // [out_channels, width]
  int reduction = 4;
  double logit_offset = 0.0;

  GateModule() = default;
  GateModule(int in_channels, int out_channels, int reduction = 4);

  int in_channels() const { return w1.dim(1); }
  int out_channels() const { return w2.dim(0); }
  int width() const { return w1.dim(0); }

  void init(std::mt19937_64& rng);
  Tensor logits(const Tensor& x) const;  // x [b, in_c, h, w] -> [b, out_c]
};

// One gate decision for a layer: the encoding z actually used in the forward
// pass plus the quantities it was derived from.
struct ArchitectureEncoding {
  Tensor z;       // [b, n]; relaxed in [0,1] or binary in {0,1}
  Tensor logits;  // pre-noise gate logits [b, n]
  Tensor noisy;   // logits + noise during training; == logits at eval
  bool binary = false;   // forward value is strictly {0,1}
  bool used_v2 = false;  // train mode emitted the binarized branch
};

// Noise and branch-coin source for Improved SemHash. Draw order per forward:
// all element noises in row-major order, then one coin.
class SemhashSampler {
 public:
  explicit SemhashSampler(std::uint64_t seed) : rng_(seed) {}

  double noise() { return normal_(rng_); }
  bool coin() { return (rng_() & 1ull) != 0; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Training-mode binarization: s~ = logits + N(0,1) noise; v1 = saturating
// sigmoid of s~, v2 = 1(s~ > 0). One coin per call picks the emitted value;
// gradients always flow through the v1 expression (straight-through for v2).
ArchitectureEncoding semhash_train(const Tensor& logits, SemhashSampler& sampler);

// Eval-mode binarization: z = 1(logits > 0), detached from the graph.
// A logit of exactly zero closes the gate.
ArchitectureEncoding semhash_eval(const Tensor& logits);

// Per-channel multiplication y[b,i,:,:] *= z[b,i].
Tensor apply_gate(const Tensor& y, const ArchitectureEncoding& enc);

// Which conv layers of a network carry gates. The first and last conv layers
// are never gated.
struct GateSchedule {
  std::vector<bool> gated;

  static GateSchedule none(int num_conv);
  static GateSchedule interior(int num_conv);  // all but first and last
  void validate() const;
};

}  // namespace pathcnn
