// Timing comparison of the serial reference kernels against the parallel
// ones, plus dense vs masked single-sample inference.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "pathcnn/kernels.hpp"
#include "pathcnn/layers.hpp"
#include "pathcnn/network.hpp"

using namespace pathcnn;
using namespace pathcnn::kernels;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void fill(std::vector<double>& v, std::mt19937_64& rng) {
  for (auto& x : v) x = double(rng() >> 11) * 0x1.0p-52 - 1.0;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void bench_gemm(int m, int n, int k, int iters) {
  std::mt19937_64 rng(7);
  std::vector<double> a(size_t(m) * k), b(size_t(k) * n);
  std::vector<double> c_ref(size_t(m) * n, 0.0), c_par(size_t(m) * n, 0.0);
  fill(a, rng);
  fill(b, rng);

  double flops = 2.0 * m * n * k * iters;
  double t0 = now_s();
  for (int i = 0; i < iters; ++i)
    ref::gemm(false, false, m, n, k, a.data(), b.data(), 0.0, c_ref.data());
  double t_ref = now_s() - t0;
  t0 = now_s();
  for (int i = 0; i < iters; ++i)
    par::gemm(false, false, m, n, k, a.data(), b.data(), 0.0, c_par.data());
  double t_par = now_s() - t0;

  std::printf("gemm %4dx%4dx%4d  ref %7.2f ms (%6.2f GF/s)  par %7.2f ms (%6.2f GF/s)  "
              "speedup %.2fx  maxdiff %.2e\n",
              m, n, k, 1e3 * t_ref / iters, flops / t_ref * 1e-9, 1e3 * t_par / iters,
              flops / t_par * 1e-9, t_ref / t_par, max_diff(c_ref, c_par));
}

void bench_conv(int batch, int in_c, int out_c, int hw, int iters) {
  std::mt19937_64 rng(11);
  ConvDims d;
  d.batch = batch;
  d.in_c = in_c;
  d.in_h = hw;
  d.in_w = hw;
  d.out_c = out_c;
  d.ksize = 3;
  d.stride = 1;
  d.pad = 1;
  std::vector<double> x(size_t(batch) * in_c * hw * hw), w(size_t(out_c) * in_c * 9);
  std::vector<double> y_ref(size_t(batch) * out_c * d.out_h() * d.out_w(), 0.0);
  std::vector<double> y_par(y_ref.size(), 0.0);
  fill(x, rng);
  fill(w, rng);

  double flops = 2.0 * 9 * in_c * out_c * d.out_h() * d.out_w() * batch * iters;
  double t0 = now_s();
  for (int i = 0; i < iters; ++i) ref::conv2d_forward(d, x.data(), w.data(), y_ref.data());
  double t_ref = now_s() - t0;
  t0 = now_s();
  for (int i = 0; i < iters; ++i) par::conv2d_forward(d, x.data(), w.data(), y_par.data());
  double t_par = now_s() - t0;

  std::printf("conv b%d %3d->%3d %dx%d  ref %7.2f ms (%6.2f GF/s)  par %7.2f ms (%6.2f GF/s)  "
              "speedup %.2fx  maxdiff %.2e\n",
              batch, in_c, out_c, hw, hw, 1e3 * t_ref / iters, flops / t_ref * 1e-9,
              1e3 * t_par / iters, flops / t_par * 1e-9, t_ref / t_par,
              max_diff(y_ref, y_par));
}

// Rigs every gate so even output channels open and odd ones close,
// independent of the input: hidden units 0/1 split the sign of sum(s) and
// each w2 row routes |sum(s)| with an alternating sign.
void force_alternating_gates(Network& net) {
  for (auto& b : net.conv_blocks()) {
    if (!b.gated) continue;
    b.gate.logit_offset = 0.0;
    int width = b.gate.width(), in_c = b.gate.in_channels(), out_c = b.gate.out_channels();
    double* w1 = b.gate.w1.data();
    for (int r = 0; r < width; ++r)
      for (int j = 0; j < in_c; ++j)
        w1[r * in_c + j] = r == 0 ? 1.0 : (r == 1 ? -1.0 : 0.0);
    double* w2 = b.gate.w2.data();
    for (int c = 0; c < out_c; ++c)
      for (int j = 0; j < width; ++j)
        w2[c * width + j] = j < 2 ? (c % 2 == 0 ? 1.0 : -1.0) : 0.0;
  }
}

void bench_masked_inference() {
  NetworkSpec spec = NetworkSpec::vgg_mini(1, 10);
  Network net(spec, 3);
  force_alternating_gates(net);

  std::mt19937_64 rng(13);
  std::vector<double> image(28 * 28);
  fill(image, rng);

  int iters = 20;
  double t0 = now_s();
  MaskedSampleResult res;
  for (int i = 0; i < iters; ++i) res = net.infer_masked_sample(image, 28, 28);
  double t_masked = (now_s() - t0) / iters;

  std::vector<ChannelMask> open;
  for (auto& b : net.conv_blocks())
    if (b.gated) open.push_back(ChannelMask::ones(b.conv.out_channels()));
  Tensor x = Tensor::from({1, 1, 28, 28}, image);
  t0 = now_s();
  for (int i = 0; i < iters; ++i) {
    NoGradGuard ng;
    Tensor y = net.forward_eval_masked(x, open);
    (void)y;
  }
  double t_dense = (now_s() - t0) / iters;

  std::int64_t active = 0;
  for (const auto& layer : res.active) active += std::int64_t(layer.size());
  std::printf("masked inference %0.3f ms/sample (%lld conv flops, %lld active gated channels), "
              "all-open graph eval %0.3f ms/sample\n",
              1e3 * t_masked, (long long)res.conv_flops, (long long)active, 1e3 * t_dense);
}

}  // namespace

int main() {
  std::printf("parallel kernels %s\n", kernels::parallel_enabled() ? "on" : "off");
  bench_gemm(192, 192, 192, 10);
  bench_gemm(384, 384, 384, 4);
  bench_conv(4, 16, 32, 28, 10);
  bench_conv(4, 64, 64, 14, 10);
  bench_masked_inference();
  return 0;
}
