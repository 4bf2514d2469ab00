#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pathcnn/kernels.hpp"
#include "testutil.hpp"

using namespace pathcnn;
using namespace pathcnn::kernels;

namespace {

std::vector<double> rvec(std::mt19937_64& rng, std::int64_t n) {
  return testutil::randn_vec(rng, n);
}

void naive_gemm(bool ta, bool tb, int m, int n, int k, const std::vector<double>& a,
                const std::vector<double>& b, double beta, std::vector<double>& c) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = beta == 0.0 ? 0.0 : beta * c[size_t(i) * n + j];
      for (int p = 0; p < k; ++p) {
        const double av = ta ? a[size_t(p) * m + i] : a[size_t(i) * k + p];
        const double bv = tb ? b[size_t(j) * k + p] : b[size_t(p) * n + j];
        s += av * bv;
      }
      c[size_t(i) * n + j] = s;
    }
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("ref gemm against a naive oracle, all transpose combinations") {
  std::mt19937_64 rng(31);
  for (bool ta : {false, true})
    for (bool tb : {false, true})
      for (double beta : {0.0, 0.5}) {
        const int m = 7, n = 9, k = 11;
        auto a = rvec(rng, std::int64_t(m) * k);
        auto b = rvec(rng, std::int64_t(k) * n);
        auto c0 = rvec(rng, std::int64_t(m) * n);
        auto want = c0, got = c0;
        naive_gemm(ta, tb, m, n, k, a, b, beta, want);
        ref::gemm(ta, tb, m, n, k, a.data(), b.data(), beta, got.data());
        CHECK(max_abs_diff(want, got) < 1e-11);
      }
}

TEST_CASE("gemm beta zero overwrites garbage, beta one accumulates") {
  const int m = 3, n = 4, k = 2;
  std::vector<double> a(size_t(m) * k, 1.0), b(size_t(k) * n, 1.0);
  std::vector<double> c(size_t(m) * n, std::nan(""));
  ref::gemm(false, false, m, n, k, a.data(), b.data(), 0.0, c.data());
  for (double v : c) CHECK(v == 2.0);
  ref::gemm(false, false, m, n, k, a.data(), b.data(), 1.0, c.data());
  for (double v : c) CHECK(v == 4.0);

  std::vector<double> cp(size_t(m) * n, std::nan(""));
  par::gemm(false, false, m, n, k, a.data(), b.data(), 0.0, cp.data());
  for (double v : cp) CHECK(v == 2.0);
}

TEST_CASE("parallel gemm matches reference across panel boundaries") {
  std::mt19937_64 rng(32);
  // k > KC (320) exercises panel-crossing accumulation; n > NC (1024) the
  // stripe split. Both sides sum k in ascending order, but the compiler is
  // free to split products from adds when it vectorizes one of them, so the
  // comparison allows last-bits drift.
  struct Case {
    int m, n, k;
    bool ta, tb;
  };
  for (Case cs : {Case{37, 45, 400, false, false}, Case{24, 1100, 33, false, false},
                  Case{17, 23, 350, true, false}, Case{19, 29, 340, false, true},
                  Case{4, 16, 5, true, true}, Case{1, 1, 1, false, false}}) {
    auto a = rvec(rng, std::int64_t(cs.m) * cs.k);
    auto b = rvec(rng, std::int64_t(cs.k) * cs.n);
    auto c1 = rvec(rng, std::int64_t(cs.m) * cs.n);
    auto c2 = c1;
    ref::gemm(cs.ta, cs.tb, cs.m, cs.n, cs.k, a.data(), b.data(), 0.3, c1.data());
    par::gemm(cs.ta, cs.tb, cs.m, cs.n, cs.k, a.data(), b.data(), 0.3, c2.data());
    for (size_t i = 0; i < c1.size(); ++i) {
      const double rel = std::abs(c1[i] - c2[i]) / std::max(1.0, std::abs(c1[i]));
      REQUIRE(rel < 1e-13);
    }
  }
}

TEST_CASE("conv dims helpers") {
  ConvDims d;
  d.batch = 2;
  d.in_c = 3;
  d.in_h = 7;
  d.in_w = 5;
  d.out_c = 4;
  d.ksize = 3;
  d.stride = 2;
  d.pad = 1;
  CHECK(d.out_h() == 4);
  CHECK(d.out_w() == 3);
  CHECK(d.weight_count() == 4 * 3 * 9);
  CHECK(d.valid());
  d.ksize = 10;
  CHECK(!d.valid());
}

TEST_CASE("parallel conv forward matches reference") {
  std::mt19937_64 rng(33);
  for (int it = 0; it < 6; ++it) {
    ConvDims d;
    d.batch = 1 + int(rng() % 3);
    d.in_c = 1 + int(rng() % 5);
    d.out_c = 1 + int(rng() % 6);
    d.in_h = 4 + int(rng() % 9);
    d.in_w = 4 + int(rng() % 9);
    d.ksize = 1 + 2 * int(rng() % 2);
    d.stride = 1 + int(rng() % 2);
    d.pad = int(rng() % 2);
    auto x = rvec(rng, std::int64_t(d.batch) * d.in_c * d.in_plane());
    auto w = rvec(rng, d.weight_count());
    const std::int64_t ycount = std::int64_t(d.batch) * d.out_c * d.out_plane();
    std::vector<double> y1(size_t(ycount), 0.0), y2(size_t(ycount), 0.0);
    ref::conv2d_forward(d, x.data(), w.data(), y1.data());
    par::conv2d_forward(d, x.data(), w.data(), y2.data());
    for (size_t i = 0; i < y1.size(); ++i) {
      const double rel = std::abs(y1[i] - y2[i]) / std::max(1.0, std::abs(y1[i]));
      REQUIRE(rel < 1e-13);
    }
  }
}

TEST_CASE("conv backward against finite differences and parallel parity") {
  std::mt19937_64 rng(34);
  ConvDims d;
  d.batch = 2;
  d.in_c = 2;
  d.out_c = 3;
  d.in_h = 5;
  d.in_w = 4;
  d.ksize = 3;
  d.stride = 1;
  d.pad = 1;
  const std::int64_t xc = std::int64_t(d.batch) * d.in_c * d.in_plane();
  const std::int64_t yc = std::int64_t(d.batch) * d.out_c * d.out_plane();
  auto x = rvec(rng, xc);
  auto w = rvec(rng, d.weight_count());
  auto dy = rvec(rng, yc);

  auto loss = [&](const std::vector<double>& xv, const std::vector<double>& wv) {
    std::vector<double> y(size_t(yc), 0.0);
    ref::conv2d_forward(d, xv.data(), wv.data(), y.data());
    double s = 0.0;
    for (std::int64_t i = 0; i < yc; ++i) s += y[size_t(i)] * dy[size_t(i)];
    return s;
  };

  std::vector<double> dx(size_t(xc), 0.0), dw(size_t(d.weight_count()), 0.0);
  ref::conv2d_backward(d, x.data(), w.data(), dy.data(), dx.data(), dw.data());

  const double h = 1e-6;
  for (std::int64_t i = 0; i < xc; i += 7) {
    auto xp = x, xm = x;
    xp[size_t(i)] += h;
    xm[size_t(i)] -= h;
    const double fd = (loss(xp, w) - loss(xm, w)) / (2 * h);
    CHECK(dx[size_t(i)] == doctest::Approx(fd).epsilon(1e-5));
  }
  for (std::int64_t i = 0; i < d.weight_count(); i += 5) {
    auto wp = w, wm = w;
    wp[size_t(i)] += h;
    wm[size_t(i)] -= h;
    const double fd = (loss(x, wp) - loss(x, wm)) / (2 * h);
    CHECK(dw[size_t(i)] == doctest::Approx(fd).epsilon(1e-5));
  }

  // accumulation semantics: a second call doubles both gradients
  std::vector<double> dx2 = dx, dw2 = dw;
  ref::conv2d_backward(d, x.data(), w.data(), dy.data(), dx2.data(), dw2.data());
  for (size_t i = 0; i < dx.size(); ++i) CHECK(dx2[i] == doctest::Approx(2 * dx[i]));
  for (size_t i = 0; i < dw.size(); ++i) CHECK(dw2[i] == doctest::Approx(2 * dw[i]));

  // parallel path reassembles both gradients from per-image gemm partials,
  // so agreement is rounding-level rather than bitwise
  std::vector<double> dxp(size_t(xc), 0.0), dwp(size_t(d.weight_count()), 0.0);
  par::conv2d_backward(d, x.data(), w.data(), dy.data(), dxp.data(), dwp.data());
  CHECK(max_abs_diff(dwp, dw) < 1e-12);
  CHECK(max_abs_diff(dxp, dx) < 1e-12);
}

TEST_CASE("masked conv equals full conv restricted to active channels") {
  std::mt19937_64 rng(35);
  for (int it = 0; it < 10; ++it) {
    ConvDims d;
    d.batch = 1 + int(rng() % 2);
    d.in_c = 2 + int(rng() % 4);
    d.out_c = 2 + int(rng() % 5);
    d.in_h = 4 + int(rng() % 6);
    d.in_w = 4 + int(rng() % 6);
    d.ksize = 3;
    d.stride = 1 + int(rng() % 2);
    d.pad = 1;
    auto x = rvec(rng, std::int64_t(d.batch) * d.in_c * d.in_plane());
    auto w = rvec(rng, d.weight_count());

    std::vector<int> ain, aout;
    for (int c = 0; c < d.in_c; ++c)
      if (rng() % 3 != 0) ain.push_back(c);
    if (ain.empty()) ain.push_back(0);
    for (int n = 0; n < d.out_c; ++n)
      if (rng() % 3 != 0) aout.push_back(n);

    // oracle: zero the inactive input channels, full conv, zero the
    // inactive output channels
    auto xz = x;
    for (int b = 0; b < d.batch; ++b)
      for (int c = 0; c < d.in_c; ++c) {
        bool active = false;
        for (int a : ain) active |= (a == c);
        if (!active)
          std::fill_n(xz.begin() + (std::int64_t(b) * d.in_c + c) * d.in_plane(),
                      d.in_plane(), 0.0);
      }
    const std::int64_t yc = std::int64_t(d.batch) * d.out_c * d.out_plane();
    std::vector<double> want(size_t(yc), 0.0);
    ref::conv2d_forward(d, xz.data(), w.data(), want.data());
    for (int b = 0; b < d.batch; ++b)
      for (int n = 0; n < d.out_c; ++n) {
        bool active = false;
        for (int a : aout) active |= (a == n);
        if (!active)
          std::fill_n(want.begin() + (std::int64_t(b) * d.out_c + n) * d.out_plane(),
                      d.out_plane(), 0.0);
      }

    std::vector<double> got(size_t(yc), 0.0), gotp(size_t(yc), 0.0);
    ref::masked_conv2d(d, x.data(), w.data(), ain, aout, got.data());
    par::masked_conv2d(d, x.data(), w.data(), ain, aout, gotp.data());
    CHECK(max_abs_diff(want, got) < 1e-12);
    for (size_t i = 0; i < got.size(); ++i) REQUIRE(gotp[i] == got[i]);
  }
}

TEST_CASE("maxpool kernel: first-maximum ties and backward scatter") {
  // window holding a tie: 5 appears twice, argmax must take the first
  std::vector<double> x = {5.0, 5.0, 1.0, 2.0,   //
                           0.0, 1.0, 2.0, 9.0};  // [1,2,2,2] two channels
  std::vector<double> y(2);
  std::vector<std::int32_t> arg(2);
  maxpool_forward(1, 2, 2, 2, 2, 2, x.data(), y.data(), arg.data());
  CHECK(y == std::vector<double>{5.0, 9.0});
  CHECK(arg[0] == 0);  // first of the tied pair
  CHECK(arg[1] == 7);

  std::vector<double> dy = {1.0, 2.0};
  std::vector<double> dx(8, 0.0);
  maxpool_backward(2, arg.data(), dy.data(), dx.data());
  CHECK(dx == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 2});

  // overlapping windows share a winner; backward accumulates there
  std::vector<double> x2 = {1.0, 9.0, 2.0,  //
                            0.0, 3.0, 1.0};  // [1,1,2,3]
  std::vector<double> y2(2);
  std::vector<std::int32_t> arg2(2);
  maxpool_forward(1, 1, 2, 3, 2, 1, x2.data(), y2.data(), arg2.data());
  CHECK(y2 == std::vector<double>{9.0, 9.0});
  CHECK(arg2 == std::vector<std::int32_t>{1, 1});
  std::vector<double> dy2 = {1.0, 2.0};
  std::vector<double> dx2(6, 0.0);
  maxpool_backward(2, arg2.data(), dy2.data(), dx2.data());
  CHECK(dx2 == std::vector<double>{0, 3, 0, 0, 0, 0});
}

TEST_CASE("gap kernel forward and backward") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0};
  std::vector<double> y(2);
  gap_forward(1, 2, 4, x.data(), y.data());
  CHECK(y == std::vector<double>{2.5, 25.0});
  std::vector<double> dy = {4.0, 8.0};
  std::vector<double> dx(8, 0.0);
  gap_backward(1, 2, 4, dy.data(), dx.data());
  CHECK(dx == std::vector<double>{1, 1, 1, 1, 2, 2, 2, 2});
}

TEST_CASE("bn kernel forward matches direct statistics") {
  std::mt19937_64 rng(36);
  const int b = 3, c = 2;
  const std::int64_t plane = 4;
  auto x = rvec(rng, b * c * plane);
  std::vector<double> gamma = {1.5, 0.5}, beta = {0.1, -0.2};
  std::vector<double> y(x.size()), xhat(x.size()), mean(c), var(c), invstd(c);
  bn_train_forward(b, c, plane, 1e-5, x.data(), gamma.data(), beta.data(), y.data(),
                   xhat.data(), mean.data(), var.data(), invstd.data());
  for (int ch = 0; ch < c; ++ch) {
    double m = 0.0;
    for (int bi = 0; bi < b; ++bi)
      for (int i = 0; i < plane; ++i) m += x[size_t((bi * c + ch) * plane + i)];
    m /= double(b * plane);
    double v = 0.0;
    for (int bi = 0; bi < b; ++bi)
      for (int i = 0; i < plane; ++i) {
        const double dd = x[size_t((bi * c + ch) * plane + i)] - m;
        v += dd * dd;
      }
    v /= double(b * plane);
    CHECK(mean[size_t(ch)] == doctest::Approx(m).epsilon(1e-12));
    CHECK(var[size_t(ch)] == doctest::Approx(v).epsilon(1e-12));
    CHECK(invstd[size_t(ch)] == doctest::Approx(1.0 / std::sqrt(v + 1e-5)).epsilon(1e-12));
  }
  for (size_t i = 0; i < x.size(); ++i) {
    const int ch = int((i / size_t(plane)) % size_t(c));
    CHECK(y[i] == doctest::Approx(gamma[size_t(ch)] * xhat[i] + beta[size_t(ch)]).epsilon(1e-12));
  }

  std::vector<double> ye(x.size());
  bn_eval_forward(b, c, plane, 1e-5, x.data(), gamma.data(), beta.data(), mean.data(),
                  var.data(), ye.data());
  CHECK(max_abs_diff(y, ye) < 1e-10);  // same statistics -> same map
}

TEST_CASE("dispatch honors the parallel switch") {
  const bool prev = parallel_enabled();
  std::mt19937_64 rng(37);
  const int m = 5, n = 6, k = 7;
  auto a = rvec(rng, std::int64_t(m) * k);
  auto b = rvec(rng, std::int64_t(k) * n);
  std::vector<double> c1(size_t(m) * n, 0.0), c2 = c1;

  set_parallel(false);
  CHECK(!parallel_enabled());
  gemm(false, false, m, n, k, a.data(), b.data(), 0.0, c1.data());
  set_parallel(true);
  CHECK(parallel_enabled());
  gemm(false, false, m, n, k, a.data(), b.data(), 0.0, c2.data());
  set_parallel(prev);
  for (size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == c2[i]);
}
