#pragma once

#include <vector>

#include "pathcnn/tensor.hpp"

namespace pathcnn::ops {

// Elementwise arithmetic with numpy-style broadcasting (shapes aligned from
// the trailing dimension; a dimension of 1 broadcasts). Gradients of a
// broadcast operand are reduce-summed back to its shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Clamp to [lo, hi]; gradient passes where lo <= x <= hi, zero outside.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor clamp_min(const Tensor& x, double lo);
Tensor clamp_max(const Tensor& x, double hi);

Tensor reshape(const Tensor& x, const Shape& shape);
Tensor broadcast_to(const Tensor& x, const Shape& shape);
// Zero padding of the two trailing (spatial) dims by `pad` on each side.
Tensor pad2d(const Tensor& x, int pad);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
// Sum over the listed axes (deduplicated). keepdims retains size-1 dims.
Tensor sum_axes(const Tensor& x, std::vector<int> axes, bool keepdims = false);
Tensor mean_axes(const Tensor& x, std::vector<int> axes, bool keepdims = false);

// a[m,k] * b[k,n]. Backward: dA += dC*B^T, dB += A^T*dC.
Tensor matmul(const Tensor& a, const Tensor& b);
// x[m,k] * w[n,k]^T (+ bias[n] per row when given).
Tensor linear(const Tensor& x, const Tensor& w);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// x[B,C,H,W] (*) w[N,C,D,D], zero padding, cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
// Window k x k, stride s, no padding. Ties keep the first maximum.
Tensor maxpool2d(const Tensor& x, int k, int stride);
// [B,C,H,W] -> [B,C].
Tensor global_avg_pool(const Tensor& x);
// y[B,C,H,W] scaled per channel by z[B,C].
Tensor channel_scale(const Tensor& y, const Tensor& z);

// Batch norm over [B,C,H,W] using batch statistics (biased variance).
// The per-channel batch mean/variance are written to the out parameters when
// given, so callers can maintain running statistics.
Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                       std::vector<double>* batch_mean, std::vector<double>* batch_var);
// Affine per-channel map using the supplied (running) statistics.
Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      const std::vector<double>& mean, const std::vector<double>& var,
                      double eps);

// Straight-through estimator: forward emits `values` (same element count as
// x), backward passes the gradient to x unchanged.
Tensor value_override(const Tensor& x, std::vector<double> values);

// Mean over the batch of -log softmax(logits)[label]. logits [B,K].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);
// Row-wise softmax of [B,K].
Tensor softmax(const Tensor& x);

// Non-autodiff helper: index of the row maximum (first on ties).
std::vector<int> argmax_rows(const Tensor& x);

}  // namespace pathcnn::ops
