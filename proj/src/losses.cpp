#include "pathcnn/losses.hpp"

#include "pathcnn/ops.hpp"

namespace pathcnn {

namespace {

constexpr double kKlEps = 1e-8;

Tensor normalize_rows(const Tensor& v) {
  Tensor shifted = ops::add_scalar(v, kKlEps);
  Tensor sums = ops::sum_axes(shifted, {1}, true);  // [b,1]
  return ops::div(shifted, sums);
}

}  // namespace

Tensor mi_loss(const std::vector<ArchitectureEncoding>& encodings,
               const std::vector<LayerClassifierHead*>& heads, const std::vector<int>& labels) {
  if (encodings.size() != heads.size())
    throw ContractError("mi_loss got " + std::to_string(encodings.size()) + " encodings for " +
                        std::to_string(heads.size()) + " heads");
  Tensor total = Tensor::scalar(0.0);
  for (size_t l = 0; l < encodings.size(); ++l) {
    Tensor logits = heads[l]->cla.forward(encodings[l].z);
    total = ops::add(total, ops::cross_entropy(logits, labels));
  }
  return total;
}

Tensor kl_loss(const std::vector<ArchitectureEncoding>& encodings,
               const std::vector<Tensor>& layer_gaps) {
  if (encodings.size() != layer_gaps.size())
    throw ContractError("kl_loss got " + std::to_string(encodings.size()) + " encodings for " +
                        std::to_string(layer_gaps.size()) + " layer outputs");
  Tensor total = Tensor::scalar(0.0);
  for (size_t l = 0; l < encodings.size(); ++l) {
    const Tensor& z = encodings[l].z;
    const Tensor& y = layer_gaps[l];
    if (!same_shape(z.shape(), y.shape()))
      throw ShapeError("kl_loss encoding " + shape_str(z.shape()) + " vs layer output " +
                       shape_str(y.shape()));
    const int batch = z.dim(0);
    Tensor p = normalize_rows(z);
    Tensor q = normalize_rows(y);
    Tensor kl = ops::sum_all(ops::mul(p, ops::log(ops::div(p, q))));
    total = ops::add(total, ops::mul_scalar(kl, 1.0 / double(batch)));
  }
  return total;
}

Tensor sparse_loss(const std::vector<ArchitectureEncoding>& encodings) {
  Tensor total = Tensor::scalar(0.0);
  for (const auto& enc : encodings) {
    const int batch = enc.z.dim(0);
    total = ops::add(total, ops::mul_scalar(ops::sum_all(enc.z), 1.0 / double(batch)));
  }
  return total;
}

Tensor total_loss(const Tensor& ce, const Tensor& mi, const Tensor& kl, const Tensor& sp,
                  const LossWeights& w) {
  w.validate();
  Tensor out = ce;
  out = ops::add(out, ops::mul_scalar(mi, w.lambda_m));
  out = ops::add(out, ops::mul_scalar(kl, w.lambda_k));
  out = ops::add(out, ops::mul_scalar(sp, w.lambda_s));
  return out;
}

}  // namespace pathcnn
