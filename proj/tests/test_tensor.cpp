#include <doctest.h>

#include <cmath>
#include <random>

#include "pathcnn/ops.hpp"
#include "pathcnn/tensor.hpp"
#include "testutil.hpp"

using namespace pathcnn;
using testutil::grad_check;
using testutil::randn;

namespace {
constexpr double kTol = 1e-7;  // FD agreement for smooth ops at step 1e-5
}

TEST_CASE("tensor construction and accessors") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.numel() == 6);
  CHECK(z.dim(0) == 2);
  CHECK(z.values() == std::vector<double>(6, 0.0));

  Tensor f = Tensor::full({2}, 1.5);
  CHECK(f.values() == std::vector<double>{1.5, 1.5});

  Tensor s = Tensor::scalar(3.0);
  CHECK(s.item() == 3.0);
  CHECK_THROWS_AS(z.item(), ContractError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), ShapeError);

  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(shape_str({2, 3}) == "[2x3]");
  CHECK(same_shape({2, 3}, {2, 3}));
  CHECK(!same_shape({2, 3}, {3, 2}));
}

TEST_CASE("gradient storage contract") {
  Tensor t = Tensor::from({2}, {1.0, 2.0});
  CHECK(!t.has_grad());
  const Tensor& ct = t;
  CHECK_THROWS_AS(ct.grad(), ContractError);
  CHECK(t.grad() == std::vector<double>{0.0, 0.0});  // allocates zeros
  CHECK(t.has_grad());

  Tensor d = t.detach();
  CHECK(d.values() == t.values());
  CHECK(!d.requires_grad());
  d.data()[0] = 99.0;
  CHECK(t.data()[0] == 1.0);  // detach copies
}

TEST_CASE("backward requires scalar root and accumulates") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}).set_requires_grad(true);
  Tensor y = ops::mul(x, x);
  CHECK_THROWS_AS(backward(y), ContractError);

  Tensor s = ops::sum_all(y);
  int n1 = backward(s);
  CHECK(n1 >= 3);
  CHECK(x.grad() == std::vector<double>{2.0, 4.0});
  // a second graph over the same leaf adds onto the stored gradient
  backward(ops::sum_all(ops::mul(x, x)));
  CHECK(x.grad() == std::vector<double>{4.0, 8.0});
}

TEST_CASE("diamond graph accumulates through both paths") {
  Tensor x = Tensor::from({1}, {3.0}).set_requires_grad(true);
  Tensor a = ops::mul(x, x);      // x^2
  Tensor b = ops::add(a, x);      // x^2 + x
  Tensor c = ops::add(a, b);      // 2x^2 + x
  backward(ops::sum_all(c));
  CHECK(x.grad()[0] == doctest::Approx(4.0 * 3.0 + 1.0).epsilon(1e-12));
}

TEST_CASE("topo order visits every node once, root first") {
  Tensor x = Tensor::from({1}, {2.0}).set_requires_grad(true);
  Tensor a = ops::mul(x, x);
  Tensor c = ops::add(a, a);  // a appears twice as parent
  auto order = topo_order(c);
  CHECK(order.front() == c.node());
  CHECK(order.size() == 3);  // c, a, x
}

TEST_CASE("no-grad guard suppresses graph recording") {
  Tensor x = Tensor::from({2}, {1.0, -1.0}).set_requires_grad(true);
  {
    NoGradGuard ng;
    CHECK(!grad_enabled());
    Tensor y = ops::relu(x);
    CHECK(!y.requires_grad());
    CHECK(y.node()->parents.empty());
  }
  CHECK(grad_enabled());
  Tensor y2 = ops::relu(x);
  CHECK(y2.requires_grad());
}

TEST_CASE("results without tracked parents record no graph") {
  Tensor x = Tensor::from({2}, {1.0, -1.0});  // requires_grad off
  Tensor y = ops::relu(x);
  CHECK(!y.requires_grad());
  CHECK(y.node()->parents.empty());
}

TEST_CASE("elementwise arithmetic values and gradients") {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 4; ++it) {
    Tensor a = randn({3, 4}, rng);
    Tensor b = randn({3, 4}, rng);
    CHECK(grad_check([](auto& in) { return ops::add(in[0], in[1]); }, {a, b}) < kTol);
    CHECK(grad_check([](auto& in) { return ops::sub(in[0], in[1]); }, {a, b}) < kTol);
    CHECK(grad_check([](auto& in) { return ops::mul(in[0], in[1]); }, {a, b}) < kTol);
    Tensor d = testutil::rand_away_from_zero({3, 4}, rng);
    CHECK(grad_check([](auto& in) { return ops::div(in[0], in[1]); }, {a, d}) < kTol);
  }
  Tensor a = Tensor::from({2}, {1.0, 2.0});
  Tensor b = Tensor::from({2}, {3.0, 5.0});
  CHECK(ops::add(a, b).values() == std::vector<double>{4.0, 7.0});
  CHECK(ops::sub(a, b).values() == std::vector<double>{-2.0, -3.0});
  CHECK(ops::mul(a, b).values() == std::vector<double>{3.0, 10.0});
  CHECK(ops::div(b, a).values() == std::vector<double>{3.0, 2.5});
}

TEST_CASE("broadcasting matches numpy semantics and reduces gradients") {
  std::mt19937_64 rng(12);
  Tensor a = randn({2, 3}, rng);
  Tensor r = randn({3}, rng);
  Tensor c = randn({2, 1}, rng);

  Tensor s = ops::add(a, r);
  CHECK(s.shape() == Shape{2, 3});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(s.data()[i * 3 + j] == a.data()[i * 3 + j] + r.data()[j]);

  CHECK(grad_check([](auto& in) { return ops::add(in[0], in[1]); }, {a, r}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::mul(in[0], in[1]); }, {a, c}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::mul(in[0], in[1]); }, {c, r}) < kTol);

  // [B,C,1,1] against [B,C,H,W], the gate-mask pattern
  Tensor y = randn({2, 3, 2, 2}, rng);
  Tensor m = randn({2, 3, 1, 1}, rng);
  CHECK(grad_check([](auto& in) { return ops::mul(in[0], in[1]); }, {y, m}) < kTol);

  CHECK_THROWS_AS(ops::add(Tensor::zeros({2, 3}), Tensor::zeros({2, 2})), ShapeError);
}

TEST_CASE("scalar ops and negation") {
  std::mt19937_64 rng(13);
  Tensor a = randn({2, 5}, rng);
  CHECK(grad_check([](auto& in) { return ops::add_scalar(in[0], 1.7); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::mul_scalar(in[0], -2.5); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::neg(in[0]); }, {a}) < kTol);
  CHECK(ops::add_scalar(Tensor::scalar(1.0), 2.0).item() == 3.0);
  CHECK(ops::mul_scalar(Tensor::scalar(3.0), -2.0).item() == -6.0);
  CHECK(ops::neg(Tensor::scalar(4.0)).item() == -4.0);
}

TEST_CASE("unary nonlinearities") {
  std::mt19937_64 rng(14);
  Tensor a = randn({3, 5}, rng);
  CHECK(grad_check([](auto& in) { return ops::relu(in[0]); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::sigmoid(in[0]); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::exp(in[0]); }, {a}) < kTol);
  Tensor p = testutil::rand_positive({3, 5}, rng);
  CHECK(grad_check([](auto& in) { return ops::log(in[0]); }, {p}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::sqrt(in[0]); }, {p}) < kTol);

  CHECK(ops::relu(Tensor::from({3}, {-1.0, 0.0, 2.0})).values() ==
        std::vector<double>{0.0, 0.0, 2.0});
  CHECK(ops::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ops::exp(Tensor::scalar(0.0)).item() == 1.0);
  CHECK(ops::log(Tensor::scalar(1.0)).item() == 0.0);
  CHECK(ops::sqrt(Tensor::scalar(4.0)).item() == 2.0);
}

TEST_CASE("clamp family: values, pass-through and blocked gradients") {
  Tensor x = Tensor::from({5}, {-2.0, -0.5, 0.3, 0.9, 2.0}).set_requires_grad(true);
  Tensor y = ops::clamp(x, -1.0, 1.0);
  CHECK(y.values() == std::vector<double>{-1.0, -0.5, 0.3, 0.9, 1.0});
  backward(ops::sum_all(y));
  CHECK(x.grad() == std::vector<double>{0.0, 1.0, 1.0, 1.0, 0.0});

  std::mt19937_64 rng(15);
  Tensor a = randn({4, 4}, rng);  // kinks at +-1 unlikely to be hit
  CHECK(grad_check([](auto& in) { return ops::clamp(in[0], -1.0, 1.0); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::clamp_min(in[0], 0.25); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::clamp_max(in[0], 0.25); }, {a}) < kTol);
  CHECK(ops::clamp_min(Tensor::scalar(-3.0), 0.0).item() == 0.0);
  CHECK(ops::clamp_max(Tensor::scalar(3.0), 1.0).item() == 1.0);
}

TEST_CASE("reshape, broadcast_to and pad2d") {
  std::mt19937_64 rng(16);
  Tensor a = randn({2, 6}, rng);
  Tensor r = ops::reshape(a, {3, 4});
  CHECK(r.shape() == Shape{3, 4});
  CHECK(r.values() == a.values());
  CHECK_THROWS_AS(ops::reshape(a, {5, 2}), ShapeError);
  CHECK(grad_check([](auto& in) { return ops::reshape(in[0], {4, 3}); }, {a}) < kTol);

  Tensor b = randn({1, 3}, rng);
  Tensor bb = ops::broadcast_to(b, {4, 3});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) CHECK(bb.data()[i * 3 + j] == b.data()[j]);
  CHECK(grad_check([](auto& in) { return ops::broadcast_to(in[0], {4, 3}); }, {b}) < kTol);

  Tensor x = randn({1, 2, 2, 3}, rng);
  Tensor p = ops::pad2d(x, 1);
  CHECK(p.shape() == Shape{1, 2, 4, 5});
  CHECK(p.data()[0] == 0.0);
  CHECK(p.data()[1 * 5 + 1] == x.data()[0]);
  CHECK(grad_check([](auto& in) { return ops::pad2d(in[0], 1); }, {x}) < kTol);
}

TEST_CASE("reductions over all elements and axes") {
  std::mt19937_64 rng(17);
  Tensor a = randn({2, 3, 4}, rng);
  double s = 0.0;
  for (double v : a.values()) s += v;
  CHECK(ops::sum_all(a).item() == doctest::Approx(s).epsilon(1e-12));
  CHECK(ops::mean_all(a).item() == doctest::Approx(s / 24.0).epsilon(1e-12));

  CHECK(grad_check([](auto& in) { return ops::sum_all(in[0]); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::mean_all(in[0]); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::sum_axes(in[0], {1}); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::sum_axes(in[0], {0, 2}, true); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::mean_axes(in[0], {2}); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::mean_axes(in[0], {0, 1}, true); }, {a}) < kTol);

  Tensor m = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor rows = ops::sum_axes(m, {1});
  CHECK(rows.shape() == Shape{2});
  CHECK(rows.values() == std::vector<double>{3.0, 7.0});
  Tensor cols = ops::sum_axes(m, {0}, true);
  CHECK(cols.shape() == Shape{1, 2});
  CHECK(cols.values() == std::vector<double>{4.0, 6.0});
}

TEST_CASE("matmul and linear") {
  std::mt19937_64 rng(18);
  Tensor a = randn({3, 4}, rng);
  Tensor b = randn({4, 2}, rng);
  Tensor c = ops::matmul(a, b);
  CHECK(c.shape() == Shape{3, 2});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a.data()[i * 4 + k] * b.data()[k * 2 + j];
      CHECK(c.data()[i * 2 + j] == doctest::Approx(acc).epsilon(1e-12));
    }
  CHECK_THROWS_AS(ops::matmul(a, Tensor::zeros({3, 2})), ShapeError);
  CHECK(grad_check([](auto& in) { return ops::matmul(in[0], in[1]); }, {a, b}) < kTol);

  Tensor x = randn({3, 4}, rng);
  Tensor w = randn({5, 4}, rng);
  Tensor bias = randn({5}, rng);
  CHECK(ops::linear(x, w).shape() == Shape{3, 5});
  CHECK(grad_check([](auto& in) { return ops::linear(in[0], in[1]); }, {x, w}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::linear(in[0], in[1], in[2]); }, {x, w, bias}) <
        kTol);
  // bias enters every row
  Tensor with = ops::linear(x, w, bias);
  Tensor without = ops::linear(x, w);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK(with.data()[i * 5 + j] ==
            doctest::Approx(without.data()[i * 5 + j] + bias.data()[j]).epsilon(1e-12));
}

TEST_CASE("conv2d forward oracle and gradients") {
  std::mt19937_64 rng(19);
  struct Case {
    int b, ci, co, h, w, k, stride, pad;
  };
  for (Case cs : {Case{2, 2, 3, 5, 5, 3, 1, 1}, Case{1, 3, 2, 6, 5, 3, 2, 1},
                  Case{2, 1, 2, 4, 4, 1, 1, 0}, Case{1, 2, 2, 5, 6, 3, 1, 0}}) {
    Tensor x = randn({cs.b, cs.ci, cs.h, cs.w}, rng);
    Tensor w = randn({cs.co, cs.ci, cs.k, cs.k}, rng);
    Tensor y = ops::conv2d(x, w, cs.stride, cs.pad);
    const int oh = (cs.h + 2 * cs.pad - cs.k) / cs.stride + 1;
    const int ow = (cs.w + 2 * cs.pad - cs.k) / cs.stride + 1;
    REQUIRE(y.shape() == Shape{cs.b, cs.co, oh, ow});
    // direct-loop oracle
    for (int b = 0; b < cs.b; ++b)
      for (int n = 0; n < cs.co; ++n)
        for (int oi = 0; oi < oh; ++oi)
          for (int oj = 0; oj < ow; ++oj) {
            double acc = 0.0;
            for (int c = 0; c < cs.ci; ++c)
              for (int ki = 0; ki < cs.k; ++ki)
                for (int kj = 0; kj < cs.k; ++kj) {
                  const int ii = oi * cs.stride + ki - cs.pad;
                  const int jj = oj * cs.stride + kj - cs.pad;
                  if (ii < 0 || ii >= cs.h || jj < 0 || jj >= cs.w) continue;
                  acc += x.data()[((b * cs.ci + c) * cs.h + ii) * cs.w + jj] *
                         w.data()[((n * cs.ci + c) * cs.k + ki) * cs.k + kj];
                }
            const double got = y.data()[((b * cs.co + n) * oh + oi) * ow + oj];
            CHECK(got == doctest::Approx(acc).epsilon(1e-10));
          }
    CHECK(grad_check([&](auto& in) { return ops::conv2d(in[0], in[1], cs.stride, cs.pad); },
                     {x, w}) < 1e-6);
  }
  CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({2, 3, 3, 3}), 1, 1),
                  ShapeError);
}

TEST_CASE("maxpool2d takes the first maximum and routes gradient to it") {
  Tensor x = Tensor::from({1, 1, 2, 4}, {1.0, 3.0, 2.0, 2.0, 3.0, 0.0, 1.0, 2.0});
  x.set_requires_grad(true);
  Tensor y = ops::maxpool2d(x, 2, 2);
  CHECK(y.shape() == Shape{1, 1, 1, 2});
  CHECK(y.values() == std::vector<double>{3.0, 2.0});  // ties: first in scan order
  backward(ops::sum_all(y));
  CHECK(x.grad() == std::vector<double>{0, 1, 1, 0, 0, 0, 0, 0});

  std::mt19937_64 rng(20);
  Tensor a = randn({2, 3, 6, 6}, rng);
  CHECK(grad_check([](auto& in) { return ops::maxpool2d(in[0], 2, 2); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::maxpool2d(in[0], 3, 2); }, {a}) < kTol);
}

TEST_CASE("global average pooling") {
  Tensor x = Tensor::from({1, 2, 1, 2}, {1.0, 3.0, 5.0, 7.0});
  Tensor y = ops::global_avg_pool(x);
  CHECK(y.shape() == Shape{1, 2});
  CHECK(y.values() == std::vector<double>{2.0, 6.0});

  std::mt19937_64 rng(21);
  Tensor a = randn({2, 3, 4, 5}, rng);
  CHECK(grad_check([](auto& in) { return ops::global_avg_pool(in[0]); }, {a}) < kTol);
}

TEST_CASE("channel_scale multiplies per channel") {
  std::mt19937_64 rng(22);
  Tensor y = randn({2, 3, 2, 2}, rng);
  Tensor z = randn({2, 3}, rng);
  Tensor out = ops::channel_scale(y, z);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i)
        CHECK(out.data()[(b * 3 + c) * 4 + i] ==
              doctest::Approx(y.data()[(b * 3 + c) * 4 + i] * z.data()[b * 3 + c])
                  .epsilon(1e-12));
  CHECK(grad_check([](auto& in) { return ops::channel_scale(in[0], in[1]); }, {y, z}) < kTol);
  CHECK_THROWS_AS(ops::channel_scale(y, Tensor::zeros({2, 4})), ShapeError);
}

TEST_CASE("batchnorm training statistics and gradients") {
  std::mt19937_64 rng(23);
  Tensor x = randn({3, 2, 2, 2}, rng);
  Tensor gamma = testutil::rand_positive({2}, rng);
  Tensor beta = randn({2}, rng);
  std::vector<double> bm, bv;
  Tensor y = ops::batchnorm_train(x, gamma, beta, 1e-5, &bm, &bv);
  REQUIRE(bm.size() == 2);

  const std::int64_t n = 3 * 2 * 2;  // per-channel count
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 4; ++i) mean += x.data()[(b * 2 + c) * 4 + i];
    mean /= double(n);
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 4; ++i) {
        const double d = x.data()[(b * 2 + c) * 4 + i] - mean;
        var += d * d;
      }
    var /= double(n);  // biased
    CHECK(bm[size_t(c)] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(bv[size_t(c)] == doctest::Approx(var).epsilon(1e-12));
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 4; ++i) {
        const double xhat = (x.data()[(b * 2 + c) * 4 + i] - mean) / std::sqrt(var + 1e-5);
        CHECK(y.data()[(b * 2 + c) * 4 + i] ==
              doctest::Approx(gamma.data()[c] * xhat + beta.data()[c]).epsilon(1e-10));
      }
  }

  CHECK(grad_check(
            [](auto& in) {
              return ops::batchnorm_train(in[0], in[1], in[2], 1e-5, nullptr, nullptr);
            },
            {x, gamma, beta}) < 1e-6);
}

TEST_CASE("batchnorm eval is an affine map with gradients") {
  std::mt19937_64 rng(24);
  Tensor x = randn({2, 2, 3, 3}, rng);
  Tensor gamma = testutil::rand_positive({2}, rng);
  Tensor beta = randn({2}, rng);
  std::vector<double> mean = {0.3, -0.2}, var = {1.5, 0.7};
  Tensor y = ops::batchnorm_eval(x, gamma, beta, mean, var, 1e-5);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 9; ++i) {
        const double xhat =
            (x.data()[(b * 2 + c) * 9 + i] - mean[size_t(c)]) / std::sqrt(var[size_t(c)] + 1e-5);
        CHECK(y.data()[(b * 2 + c) * 9 + i] ==
              doctest::Approx(gamma.data()[c] * xhat + beta.data()[c]).epsilon(1e-10));
      }
  CHECK(grad_check(
            [&](auto& in) { return ops::batchnorm_eval(in[0], in[1], in[2], mean, var, 1e-5); },
            {x, gamma, beta}) < kTol);
}

TEST_CASE("value_override emits the payload and passes gradient through") {
  Tensor x = Tensor::from({2, 2}, {0.1, 0.2, 0.3, 0.4}).set_requires_grad(true);
  Tensor y = ops::value_override(ops::mul_scalar(x, 2.0), {1.0, 0.0, 1.0, 1.0});
  CHECK(y.values() == std::vector<double>{1.0, 0.0, 1.0, 1.0});
  Tensor w = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
  backward(ops::sum_all(ops::mul(y, w)));
  // straight-through: d/dx of sum(w * override(2x)) == 2w
  CHECK(x.grad() == std::vector<double>{2.0, 4.0, 6.0, 8.0});
}

TEST_CASE("softmax rows and cross entropy") {
  Tensor l = Tensor::from({1, 2}, {0.0, 0.0});
  CHECK(ops::cross_entropy(l, {0}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor sm = ops::softmax(Tensor::from({2, 2}, {0.0, 0.0, 100.0, 0.0}));
  CHECK(sm.data()[0] == 0.5);
  CHECK(sm.data()[1] == 0.5);
  CHECK(sm.data()[2] == doctest::Approx(1.0).epsilon(1e-12));

  // invariance to a large common shift (stability)
  Tensor shifted = Tensor::from({1, 3}, {1000.0, 1001.0, 999.0});
  Tensor p = ops::softmax(shifted);
  CHECK(p.data()[1] > p.data()[0]);
  CHECK(std::isfinite(p.data()[2]));
  double rowsum = p.data()[0] + p.data()[1] + p.data()[2];
  CHECK(rowsum == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(25);
  Tensor a = randn({4, 5}, rng);
  std::vector<int> labels = {0, 3, 2, 4};
  CHECK(grad_check([&](auto& in) { return ops::cross_entropy(in[0], labels); }, {a}) < kTol);
  CHECK(grad_check([](auto& in) { return ops::softmax(in[0]); }, {a}) < kTol);
  CHECK_THROWS_AS(ops::cross_entropy(a, std::vector<int>{0, 1}), ShapeError);
  CHECK_THROWS_AS(ops::cross_entropy(a, std::vector<int>{0, 1, 2, 9}), ContractError);

  CHECK(ops::argmax_rows(Tensor::from({2, 3}, {1.0, 5.0, 5.0, -1.0, -3.0, -2.0})) ==
        std::vector<int>{1, 0});
}
