#pragma once

#include <vector>

#include "pathcnn/gating.hpp"
#include "pathcnn/layers.hpp"
#include "pathcnn/tensor.hpp"

namespace pathcnn {

struct LossWeights {
  double lambda_m = 0.0;
  double lambda_k = 0.0;
  double lambda_s = 0.0;

  void validate() const {
    if (lambda_m < 0.0 || lambda_k < 0.0 || lambda_s < 0.0)
      throw ContractError("loss weights must be nonnegative");
  }
};

// Per gated layer: auxiliary classifier weight over the encoding, [classes, n].
struct LayerClassifierHead {
  DenseLayer cla;  // no bias

  LayerClassifierHead() = default;
  LayerClassifierHead(int classes, int n) : cla(classes, n, false) {}
};

// Sum over gated layers of the cross entropy of softmax(W_cla * z) against
// the labels (each term batch-mean).
Tensor mi_loss(const std::vector<ArchitectureEncoding>& encodings,
               const std::vector<LayerClassifierHead*>& heads, const std::vector<int>& labels);

// Sum over gated layers of KL(normalize(z + eps) || normalize(y + eps)) with
// eps = 1e-8 and sum normalization per sample, batch-mean per layer.
// layer_gaps holds GAP of each gated layer's pre-mask output, [batch, n].
Tensor kl_loss(const std::vector<ArchitectureEncoding>& encodings,
               const std::vector<Tensor>& layer_gaps);

// Sum over gated layers of the L1 norm of z (elements are nonnegative),
// batch-mean per layer.
Tensor sparse_loss(const std::vector<ArchitectureEncoding>& encodings);

// ce + lambda_m * mi + lambda_k * kl + lambda_s * sp.
Tensor total_loss(const Tensor& ce, const Tensor& mi, const Tensor& kl, const Tensor& sp,
                  const LossWeights& w);

}  // namespace pathcnn
