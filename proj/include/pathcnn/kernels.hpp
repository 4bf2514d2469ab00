#pragma once

#include <cstdint>
#include <vector>

namespace pathcnn::kernels {

// Runtime switch between the OpenMP kernels and the serial reference path.
// The reference kernels stay available unconditionally; tests compare the
// two and the bench tool times them against each other.
bool parallel_enabled();
void set_parallel(bool v);

struct ConvDims {
  int batch = 1;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0;
  int ksize = 1, stride = 1, pad = 0;

  int out_h() const { return (in_h + 2 * pad - ksize) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - ksize) / stride + 1; }
  std::int64_t in_plane() const { return std::int64_t(in_h) * in_w; }
  std::int64_t out_plane() const { return std::int64_t(out_h()) * out_w(); }
  std::int64_t weight_count() const { return std::int64_t(out_c) * in_c * ksize * ksize; }
  bool valid() const {
    return batch > 0 && in_c > 0 && out_c > 0 && ksize > 0 && stride > 0 && pad >= 0 &&
           (in_h + 2 * pad) >= ksize && (in_w + 2 * pad) >= ksize;
  }
};

namespace ref {

// C[m,n] = op(A)[m,k] * op(B)[k,n] + beta * C. Row-major, packed.
void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double beta, double* c);

// x[B,C,H,W] (*) w[N,C,D,D] -> y[B,N,OH,OW], cross-correlation, zero padding.
void conv2d_forward(const ConvDims& d, const double* x, const double* w, double* y);

// Gradients of conv2d_forward. dx/dw may be null to skip; both accumulate (+=).
void conv2d_backward(const ConvDims& d, const double* x, const double* w,
                     const double* dy, double* dx, double* dw);

// Convolution restricted to the given input/output channel index sets.
// Output channels outside active_out are written as zero.
void masked_conv2d(const ConvDims& d, const double* x, const double* w,
                   const std::vector<int>& active_in, const std::vector<int>& active_out,
                   double* y);

}  // namespace ref

namespace par {

void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double beta, double* c);
void conv2d_forward(const ConvDims& d, const double* x, const double* w, double* y);
void conv2d_backward(const ConvDims& d, const double* x, const double* w,
                     const double* dy, double* dx, double* dw);
void masked_conv2d(const ConvDims& d, const double* x, const double* w,
                   const std::vector<int>& active_in, const std::vector<int>& active_out,
                   double* y);

}  // namespace par

// Dispatching wrappers honoring set_parallel().
void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double beta, double* c);
void conv2d_forward(const ConvDims& d, const double* x, const double* w, double* y);
void conv2d_backward(const ConvDims& d, const double* x, const double* w,
                     const double* dy, double* dx, double* dw);
void masked_conv2d(const ConvDims& d, const double* x, const double* w,
                   const std::vector<int>& active_in, const std::vector<int>& active_out,
                   double* y);

// Max pooling, window k x k, no padding. argmax holds the flat input index of
// the selected element per output (first maximum in scan order).
void maxpool_forward(int batch, int channels, int h, int w, int k, int stride,
                     const double* x, double* y, std::int32_t* argmax);
void maxpool_backward(std::int64_t out_count, const std::int32_t* argmax,
                      const double* dy, double* dx);

// Global average pooling: y[b,c] = mean over H*W.
void gap_forward(int batch, int channels, std::int64_t plane, const double* x, double* y);
void gap_backward(int batch, int channels, std::int64_t plane, const double* dy, double* dx);

// Batch norm over [B,C,H,W], statistics per channel across B*H*W.
// Training forward returns the normalized activations in xhat (same size as x)
// and per-channel batch mean / biased variance / 1/sqrt(var+eps).
void bn_train_forward(int batch, int channels, std::int64_t plane, double eps,
                      const double* x, const double* gamma, const double* beta,
                      double* y, double* xhat, double* mean, double* var, double* invstd);
void bn_train_backward(int batch, int channels, std::int64_t plane,
                       const double* dy, const double* xhat, const double* invstd,
                       const double* gamma, double* dx, double* dgamma, double* dbeta);
void bn_eval_forward(int batch, int channels, std::int64_t plane, double eps,
                     const double* x, const double* gamma, const double* beta,
                     const double* mean, const double* var, double* y);
void bn_eval_backward(int batch, int channels, std::int64_t plane, double eps,
                      const double* dy, const double* gamma, const double* var,
                      double* dx, double* dgamma, double* dbeta, const double* x,
                      const double* mean);

}  // namespace pathcnn::kernels
