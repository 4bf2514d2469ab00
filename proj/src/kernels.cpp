#include "pathcnn/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <vector>

namespace pathcnn::kernels {

namespace {

std::atomic<bool> g_parallel{true};

constexpr int MR = 4;    // micro-tile rows
constexpr int NR = 16;   // micro-tile cols (two 8-wide vectors)
constexpr int KC = 320;  // k panel
constexpr int NC = 1024; // column stripe per task

inline void transpose(int rows, int cols, const double* src, double* dst) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) dst[std::int64_t(c) * rows + r] = src[std::int64_t(r) * cols + c];
}

// C[i0:i0+mb, j0:j0+nb] += A[i0:, p0:p0+kb] * B[p0:, j0:], row-major full
// matrices of logical sizes m x k / k x n / m x n. Serial; accumulation over
// k runs in a fixed order so results do not depend on threading.
void gemm_accum_block(int k, int n, const double* a, const double* b, double* c,
                      int i0, int mb, int j0, int nb, int p0, int kb) {
  for (int i = i0; i < i0 + mb; i += MR) {
    const int mr = std::min(MR, i0 + mb - i);
    for (int j = j0; j < j0 + nb; j += NR) {
      const int nr = std::min(NR, j0 + nb - j);
      if (mr == MR && nr == NR) {
        double acc[MR][NR];
        for (int r = 0; r < MR; ++r)
          for (int s = 0; s < NR; ++s) acc[r][s] = c[std::int64_t(i + r) * n + j + s];
        for (int p = p0; p < p0 + kb; ++p) {
          const double* brow = b + std::int64_t(p) * n + j;
          for (int r = 0; r < MR; ++r) {
            const double av = a[std::int64_t(i + r) * k + p];
#pragma omp simd
            for (int s = 0; s < NR; ++s) acc[r][s] += av * brow[s];
          }
        }
        for (int r = 0; r < MR; ++r)
          for (int s = 0; s < NR; ++s) c[std::int64_t(i + r) * n + j + s] = acc[r][s];
      } else {
        for (int r = 0; r < mr; ++r) {
          double* crow = c + std::int64_t(i + r) * n;
          for (int p = p0; p < p0 + kb; ++p) {
            const double av = a[std::int64_t(i + r) * k + p];
            const double* brow = b + std::int64_t(p) * n;
            for (int s = 0; s < nr; ++s) crow[j + s] += av * brow[j + s];
          }
        }
      }
    }
  }
}

// Serial C[m,j0:j0+nb] += A * B stripe.
void gemm_stripe(int m, int n, int k, const double* a, const double* b, double* c,
                 int j0, int nb) {
  for (int p0 = 0; p0 < k; p0 += KC) {
    const int kb = std::min(KC, k - p0);
    gemm_accum_block(k, n, a, b, c, 0, m, j0, nb, p0, kb);
  }
}

void apply_beta(std::int64_t count, double beta, double* c) {
  if (beta == 0.0) {
    std::fill(c, c + count, 0.0);
  } else if (beta != 1.0) {
    for (std::int64_t i = 0; i < count; ++i) c[i] *= beta;
  }
}

// Serial NN product, blocked. Accumulates on top of whatever is in C.
void gemm_nn_serial(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int j0 = 0; j0 < n; j0 += NC) gemm_stripe(m, n, k, a, b, c, j0, std::min(NC, n - j0));
}

struct PackedOperands {
  std::vector<double> abuf, bbuf;
  const double* a;
  const double* b;
};

PackedOperands pack_for_nn(bool trans_a, bool trans_b, int m, int n, int k,
                           const double* a, const double* b) {
  PackedOperands p;
  p.a = a;
  p.b = b;
  if (trans_a) {
    p.abuf.resize(std::size_t(m) * k);
    transpose(k, m, a, p.abuf.data());  // stored [k,m] -> [m,k]
    p.a = p.abuf.data();
  }
  if (trans_b) {
    p.bbuf.resize(std::size_t(k) * n);
    transpose(n, k, b, p.bbuf.data());  // stored [n,k] -> [k,n]
    p.b = p.bbuf.data();
  }
  return p;
}

inline std::int64_t x_index(const ConvDims& d, int b, int c, int ih, int iw) {
  return ((std::int64_t(b) * d.in_c + c) * d.in_h + ih) * d.in_w + iw;
}

void im2col(const ConvDims& d, const double* x, double* col) {
  const int oh_n = d.out_h(), ow_n = d.out_w(), ksz = d.ksize;
  const std::int64_t ohw = std::int64_t(oh_n) * ow_n;
  for (int c = 0; c < d.in_c; ++c) {
    const double* plane = x + std::int64_t(c) * d.in_plane();
    for (int kh = 0; kh < ksz; ++kh) {
      for (int kw = 0; kw < ksz; ++kw) {
        double* row = col + ((std::int64_t(c) * ksz + kh) * ksz + kw) * ohw;
        for (int oh = 0; oh < oh_n; ++oh) {
          const int ih = oh * d.stride - d.pad + kh;
          double* out = row + std::int64_t(oh) * ow_n;
          if (ih < 0 || ih >= d.in_h) {
            std::fill(out, out + ow_n, 0.0);
            continue;
          }
          const double* in = plane + std::int64_t(ih) * d.in_w;
          for (int ow = 0; ow < ow_n; ++ow) {
            const int iw = ow * d.stride - d.pad + kw;
            out[ow] = (iw >= 0 && iw < d.in_w) ? in[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvDims& d, const double* col, double* x) {
  const int oh_n = d.out_h(), ow_n = d.out_w(), ksz = d.ksize;
  const std::int64_t ohw = std::int64_t(oh_n) * ow_n;
  for (int c = 0; c < d.in_c; ++c) {
    double* plane = x + std::int64_t(c) * d.in_plane();
    for (int kh = 0; kh < ksz; ++kh) {
      for (int kw = 0; kw < ksz; ++kw) {
        const double* row = col + ((std::int64_t(c) * ksz + kh) * ksz + kw) * ohw;
        for (int oh = 0; oh < oh_n; ++oh) {
          const int ih = oh * d.stride - d.pad + kh;
          if (ih < 0 || ih >= d.in_h) continue;
          double* out = plane + std::int64_t(ih) * d.in_w;
          const double* in = row + std::int64_t(oh) * ow_n;
          for (int ow = 0; ow < ow_n; ++ow) {
            const int iw = ow * d.stride - d.pad + kw;
            if (iw >= 0 && iw < d.in_w) out[iw] += in[ow];
          }
        }
      }
    }
  }
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool v) { g_parallel.store(v, std::memory_order_relaxed); }

namespace ref {

void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double beta, double* c) {
  auto at = [&](int i, int p) { return trans_a ? a[std::int64_t(p) * m + i] : a[std::int64_t(i) * k + p]; };
  auto bt = [&](int p, int j) { return trans_b ? b[std::int64_t(j) * k + p] : b[std::int64_t(p) * n + j]; };
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = (beta == 0.0) ? 0.0 : beta * c[std::int64_t(i) * n + j];
      for (int p = 0; p < k; ++p) s += at(i, p) * bt(p, j);
      c[std::int64_t(i) * n + j] = s;
    }
  }
}

void conv2d_forward(const ConvDims& d, const double* x, const double* w, double* y) {
  const int oh_n = d.out_h(), ow_n = d.out_w(), ksz = d.ksize;
  std::int64_t yi = 0;
  for (int b = 0; b < d.batch; ++b) {
    for (int n = 0; n < d.out_c; ++n) {
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow, ++yi) {
          double acc = 0.0;
          for (int c = 0; c < d.in_c; ++c) {
            for (int kh = 0; kh < ksz; ++kh) {
              const int ih = oh * d.stride - d.pad + kh;
              if (ih < 0 || ih >= d.in_h) continue;
              for (int kw = 0; kw < ksz; ++kw) {
                const int iw = ow * d.stride - d.pad + kw;
                if (iw < 0 || iw >= d.in_w) continue;
                acc += x[x_index(d, b, c, ih, iw)] *
                       w[((std::int64_t(n) * d.in_c + c) * ksz + kh) * ksz + kw];
              }
            }
          }
          y[yi] = acc;
        }
      }
    }
  }
}

void conv2d_backward(const ConvDims& d, const double* x, const double* w,
                     const double* dy, double* dx, double* dw) {
  const int oh_n = d.out_h(), ow_n = d.out_w(), ksz = d.ksize;
  std::int64_t yi = 0;
  for (int b = 0; b < d.batch; ++b) {
    for (int n = 0; n < d.out_c; ++n) {
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow, ++yi) {
          const double g = dy[yi];
          if (g == 0.0) continue;
          for (int c = 0; c < d.in_c; ++c) {
            for (int kh = 0; kh < ksz; ++kh) {
              const int ih = oh * d.stride - d.pad + kh;
              if (ih < 0 || ih >= d.in_h) continue;
              for (int kw = 0; kw < ksz; ++kw) {
                const int iw = ow * d.stride - d.pad + kw;
                if (iw < 0 || iw >= d.in_w) continue;
                const std::int64_t wi = ((std::int64_t(n) * d.in_c + c) * ksz + kh) * ksz + kw;
                if (dx) dx[x_index(d, b, c, ih, iw)] += w[wi] * g;
                if (dw) dw[wi] += x[x_index(d, b, c, ih, iw)] * g;
              }
            }
          }
        }
      }
    }
  }
}

void masked_conv2d(const ConvDims& d, const double* x, const double* w,
                   const std::vector<int>& active_in, const std::vector<int>& active_out,
                   double* y) {
  const int oh_n = d.out_h(), ow_n = d.out_w(), ksz = d.ksize;
  const std::int64_t out_count = std::int64_t(d.batch) * d.out_c * oh_n * ow_n;
  std::fill(y, y + out_count, 0.0);
  for (int b = 0; b < d.batch; ++b) {
    for (int n : active_out) {
      double* yplane = y + (std::int64_t(b) * d.out_c + n) * d.out_plane();
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          double acc = 0.0;
          for (int c : active_in) {
            for (int kh = 0; kh < ksz; ++kh) {
              const int ih = oh * d.stride - d.pad + kh;
              if (ih < 0 || ih >= d.in_h) continue;
              for (int kw = 0; kw < ksz; ++kw) {
                const int iw = ow * d.stride - d.pad + kw;
                if (iw < 0 || iw >= d.in_w) continue;
                acc += x[x_index(d, b, c, ih, iw)] *
                       w[((std::int64_t(n) * d.in_c + c) * ksz + kh) * ksz + kw];
              }
            }
          }
          yplane[std::int64_t(oh) * ow_n + ow] = acc;
        }
      }
    }
  }
}

}  // namespace ref

namespace par {

void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double beta, double* c) {
  PackedOperands p = pack_for_nn(trans_a, trans_b, m, n, k, a, b);
  apply_beta(std::int64_t(m) * n, beta, c);
#pragma omp parallel for schedule(static)
  for (int j0 = 0; j0 < n; j0 += NC) gemm_stripe(m, n, k, p.a, p.b, c, j0, std::min(NC, n - j0));
}

void conv2d_forward(const ConvDims& d, const double* x, const double* w, double* y) {
  const std::int64_t ohw = d.out_plane();
  const int ckk = d.in_c * d.ksize * d.ksize;
  const std::int64_t xsz = std::int64_t(d.in_c) * d.in_plane();
  const std::int64_t ysz = std::int64_t(d.out_c) * ohw;
#pragma omp parallel
  {
    std::vector<double> col(std::size_t(ckk) * ohw);
#pragma omp for schedule(static)
    for (int b = 0; b < d.batch; ++b) {
      im2col(d, x + b * xsz, col.data());
      double* yb = y + b * ysz;
      std::fill(yb, yb + ysz, 0.0);
      gemm_nn_serial(d.out_c, int(ohw), ckk, w, col.data(), yb);
    }
  }
}

void conv2d_backward(const ConvDims& d, const double* x, const double* w,
                     const double* dy, double* dx, double* dw) {
  const std::int64_t ohw = d.out_plane();
  const int ckk = d.in_c * d.ksize * d.ksize;
  const std::int64_t xsz = std::int64_t(d.in_c) * d.in_plane();
  const std::int64_t ysz = std::int64_t(d.out_c) * ohw;
  const std::int64_t wsz = d.weight_count();

  std::vector<double> wt;  // [ckk, out_c]
  if (dx) {
    wt.resize(std::size_t(wsz));
    transpose(d.out_c, ckk, w, wt.data());
  }
  // Per-image weight-gradient partials, reduced serially afterwards so the
  // result does not depend on thread scheduling.
  std::vector<double> dw_part;
  if (dw) dw_part.assign(std::size_t(d.batch) * wsz, 0.0);

#pragma omp parallel
  {
    std::vector<double> col, colt, dcol;
    if (dw) {
      col.resize(std::size_t(ckk) * ohw);
      colt.resize(std::size_t(ckk) * ohw);
    }
    if (dx) dcol.resize(std::size_t(ckk) * ohw);
#pragma omp for schedule(static)
    for (int b = 0; b < d.batch; ++b) {
      const double* dyb = dy + b * ysz;
      if (dw) {
        im2col(d, x + b * xsz, col.data());
        transpose(ckk, int(ohw), col.data(), colt.data());  // -> [ohw, ckk]
        gemm_nn_serial(d.out_c, ckk, int(ohw), dyb, colt.data(), dw_part.data() + b * wsz);
      }
      if (dx) {
        std::fill(dcol.begin(), dcol.end(), 0.0);
        gemm_nn_serial(ckk, int(ohw), d.out_c, wt.data(), dyb, dcol.data());
        col2im_add(d, dcol.data(), dx + b * xsz);
      }
    }
  }
  if (dw) {
    for (int b = 0; b < d.batch; ++b) {
      const double* part = dw_part.data() + std::int64_t(b) * wsz;
      for (std::int64_t i = 0; i < wsz; ++i) dw[i] += part[i];
    }
  }
}

void masked_conv2d(const ConvDims& d, const double* x, const double* w,
                   const std::vector<int>& active_in, const std::vector<int>& active_out,
                   double* y) {
  const int oh_n = d.out_h(), ow_n = d.out_w(), ksz = d.ksize;
  const std::int64_t out_count = std::int64_t(d.batch) * d.out_c * oh_n * ow_n;
  std::fill(y, y + out_count, 0.0);
  const int jobs = d.batch * int(active_out.size());
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int b = job / int(active_out.size());
    const int n = active_out[job % active_out.size()];
    double* yplane = y + (std::int64_t(b) * d.out_c + n) * d.out_plane();
    for (int oh = 0; oh < oh_n; ++oh) {
      for (int ow = 0; ow < ow_n; ++ow) {
        double acc = 0.0;
        for (int c : active_in) {
          for (int kh = 0; kh < ksz; ++kh) {
            const int ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.in_h) continue;
            for (int kw = 0; kw < ksz; ++kw) {
              const int iw = ow * d.stride - d.pad + kw;
              if (iw < 0 || iw >= d.in_w) continue;
              acc += x[x_index(d, b, c, ih, iw)] *
                     w[((std::int64_t(n) * d.in_c + c) * ksz + kh) * ksz + kw];
            }
          }
        }
        yplane[std::int64_t(oh) * ow_n + ow] = acc;
      }
    }
  }
}

}  // namespace par

void gemm(bool ta, bool tb, int m, int n, int k, const double* a, const double* b,
          double beta, double* c) {
  if (parallel_enabled()) par::gemm(ta, tb, m, n, k, a, b, beta, c);
  else ref::gemm(ta, tb, m, n, k, a, b, beta, c);
}

void conv2d_forward(const ConvDims& d, const double* x, const double* w, double* y) {
  if (parallel_enabled()) par::conv2d_forward(d, x, w, y);
  else ref::conv2d_forward(d, x, w, y);
}

void conv2d_backward(const ConvDims& d, const double* x, const double* w,
                     const double* dy, double* dx, double* dw) {
  if (parallel_enabled()) par::conv2d_backward(d, x, w, dy, dx, dw);
  else ref::conv2d_backward(d, x, w, dy, dx, dw);
}

void masked_conv2d(const ConvDims& d, const double* x, const double* w,
                   const std::vector<int>& active_in, const std::vector<int>& active_out,
                   double* y) {
  if (parallel_enabled()) par::masked_conv2d(d, x, w, active_in, active_out, y);
  else ref::masked_conv2d(d, x, w, active_in, active_out, y);
}

void maxpool_forward(int batch, int channels, int h, int w, int k, int stride,
                     const double* x, double* y, std::int32_t* argmax) {
  const int oh_n = (h - k) / stride + 1;
  const int ow_n = (w - k) / stride + 1;
  const std::int64_t plane = std::int64_t(h) * w;
  const std::int64_t oplane = std::int64_t(oh_n) * ow_n;
  const int planes = batch * channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* in = x + p * plane;
    double* out = y + p * oplane;
    std::int32_t* arg = argmax + p * oplane;
    std::int64_t oi = 0;
    for (int oh = 0; oh < oh_n; ++oh) {
      for (int ow = 0; ow < ow_n; ++ow, ++oi) {
        double best = in[std::int64_t(oh * stride) * w + ow * stride];
        std::int64_t best_i = std::int64_t(oh * stride) * w + ow * stride;
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const std::int64_t ii = std::int64_t(oh * stride + kh) * w + (ow * stride + kw);
            if (in[ii] > best) {
              best = in[ii];
              best_i = ii;
            }
          }
        }
        out[oi] = best;
        arg[oi] = std::int32_t(p * plane + best_i);
      }
    }
  }
}

void maxpool_backward(std::int64_t out_count, const std::int32_t* argmax,
                      const double* dy, double* dx) {
  // Serial scatter: overlapping windows may hit the same input element.
  for (std::int64_t i = 0; i < out_count; ++i) dx[argmax[i]] += dy[i];
}

void gap_forward(int batch, int channels, std::int64_t plane, const double* x, double* y) {
  const int rows = batch * channels;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* in = x + r * plane;
    double s = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) s += in[i];
    y[r] = s / double(plane);
  }
}

void gap_backward(int batch, int channels, std::int64_t plane, const double* dy, double* dx) {
  const int rows = batch * channels;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double g = dy[r] / double(plane);
    double* out = dx + r * plane;
    for (std::int64_t i = 0; i < plane; ++i) out[i] += g;
  }
}

void bn_train_forward(int batch, int channels, std::int64_t plane, double eps,
                      const double* x, const double* gamma, const double* beta,
                      double* y, double* xhat, double* mean, double* var, double* invstd) {
  const std::int64_t stride_b = std::int64_t(channels) * plane;
  const double m_count = double(batch) * double(plane);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    double s = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* in = x + b * stride_b + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) s += in[i];
    }
    const double mu = s / m_count;
    double v = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* in = x + b * stride_b + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const double d = in[i] - mu;
        v += d * d;
      }
    }
    v /= m_count;
    const double is = 1.0 / std::sqrt(v + eps);
    mean[c] = mu;
    var[c] = v;
    invstd[c] = is;
    for (int b = 0; b < batch; ++b) {
      const double* in = x + b * stride_b + c * plane;
      double* xh = xhat + b * stride_b + c * plane;
      double* out = y + b * stride_b + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const double h = (in[i] - mu) * is;
        xh[i] = h;
        out[i] = gamma[c] * h + beta[c];
      }
    }
  }
}

void bn_train_backward(int batch, int channels, std::int64_t plane,
                       const double* dy, const double* xhat, const double* invstd,
                       const double* gamma, double* dx, double* dgamma, double* dbeta) {
  const std::int64_t stride_b = std::int64_t(channels) * plane;
  const double m_count = double(batch) * double(plane);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dyxh = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* g = dy + b * stride_b + c * plane;
      const double* xh = xhat + b * stride_b + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dyxh += g[i] * xh[i];
      }
    }
    if (dgamma) dgamma[c] += sum_dyxh;
    if (dbeta) dbeta[c] += sum_dy;
    if (dx) {
      const double scale = gamma[c] * invstd[c];
      const double mean_dy = sum_dy / m_count;
      const double mean_dyxh = sum_dyxh / m_count;
      for (int b = 0; b < batch; ++b) {
        const double* g = dy + b * stride_b + c * plane;
        const double* xh = xhat + b * stride_b + c * plane;
        double* out = dx + b * stride_b + c * plane;
        for (std::int64_t i = 0; i < plane; ++i)
          out[i] += scale * (g[i] - mean_dy - xh[i] * mean_dyxh);
      }
    }
  }
}

void bn_eval_forward(int batch, int channels, std::int64_t plane, double eps,
                     const double* x, const double* gamma, const double* beta,
                     const double* mean, const double* var, double* y) {
  const std::int64_t stride_b = std::int64_t(channels) * plane;
  const int rows = batch * channels;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r % channels;
    const int b = r / channels;
    const double is = 1.0 / std::sqrt(var[c] + eps);
    const double* in = x + b * stride_b + c * plane;
    double* out = y + b * stride_b + c * plane;
    for (std::int64_t i = 0; i < plane; ++i) out[i] = gamma[c] * (in[i] - mean[c]) * is + beta[c];
  }
}

void bn_eval_backward(int batch, int channels, std::int64_t plane, double eps,
                      const double* dy, const double* gamma, const double* var,
                      double* dx, double* dgamma, double* dbeta, const double* x,
                      const double* mean) {
  const std::int64_t stride_b = std::int64_t(channels) * plane;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const double is = 1.0 / std::sqrt(var[c] + eps);
    double sum_dy = 0.0, sum_dyxh = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* g = dy + b * stride_b + c * plane;
      const double* in = x + b * stride_b + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dyxh += g[i] * (in[i] - mean[c]) * is;
      }
    }
    if (dgamma) dgamma[c] += sum_dyxh;
    if (dbeta) dbeta[c] += sum_dy;
    if (dx) {
      const double scale = gamma[c] * is;
      for (int b = 0; b < batch; ++b) {
        const double* g = dy + b * stride_b + c * plane;
        double* out = dx + b * stride_b + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) out[i] += scale * g[i];
      }
    }
  }
}

}  // namespace pathcnn::kernels
