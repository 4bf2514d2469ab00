#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>

#include "pathcnn/checkpoint.hpp"
#include "pathcnn/dataset.hpp"
#include "pathcnn/trainer.hpp"
#include "testutil.hpp"

using namespace pathcnn;

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  TrainConfig bad = c;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = c;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = c;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = c;
  bad.lr_drop_epochs = {0};
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = c;
  bad.lr_drop_epochs = {11};
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = c;
  bad.weights.lambda_m = -1.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("default lr schedule drops at the half and three-quarter epochs") {
  TrainConfig c;
  c.epochs = 10;
  c.lr = 0.05;
  for (int e = 1; e <= 4; ++e) CHECK(c.lr_at(e) == 0.05);
  for (int e = 5; e <= 7; ++e) CHECK(c.lr_at(e) == doctest::Approx(0.005).epsilon(1e-12));
  for (int e = 8; e <= 10; ++e) CHECK(c.lr_at(e) == doctest::Approx(0.0005).epsilon(1e-12));

  c.epochs = 7;  // ceil(3.5) = 4, ceil(5.25) = 6
  CHECK(c.lr_at(3) == 0.05);
  CHECK(c.lr_at(4) == doctest::Approx(0.005));
  CHECK(c.lr_at(5) == doctest::Approx(0.005));
  CHECK(c.lr_at(6) == doctest::Approx(0.0005));

  c.epochs = 2;  // drops at 1 and 2
  CHECK(c.lr_at(1) == doctest::Approx(0.005));
  CHECK(c.lr_at(2) == doctest::Approx(0.0005));

  c.epochs = 10;
  c.lr_drop_epochs = {2};
  c.lr_drop_factor = 0.5;
  CHECK(c.lr_at(1) == 0.05);
  CHECK(c.lr_at(2) == doctest::Approx(0.025));
  CHECK(c.lr_at(10) == doctest::Approx(0.025));
}

TEST_CASE("sgd heavy-ball recursion") {
  Tensor w = Tensor::from({1}, {1.0}).set_requires_grad(true);
  std::vector<Tensor> params = {w};
  std::vector<Tensor> vel = {Tensor::zeros({1})};

  w.grad()[0] = 1.0;
  sgd_step(params, vel, 0.1, 0.9);
  CHECK(w.data()[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(vel[0].data()[0] == doctest::Approx(1.0).epsilon(1e-12));

  w.grad()[0] = 1.0;  // gradients are re-set, not accumulated, between steps
  sgd_step(params, vel, 0.1, 0.9);
  CHECK(w.data()[0] == doctest::Approx(0.71).epsilon(1e-12));
  CHECK(vel[0].data()[0] == doctest::Approx(1.9).epsilon(1e-12));
}

TEST_CASE("sgd step contract errors") {
  Tensor w = Tensor::from({2}, {1.0, 2.0}).set_requires_grad(true);
  std::vector<Tensor> params = {w};
  std::vector<Tensor> vel = {Tensor::zeros({2})};
  CHECK_THROWS_AS(sgd_step(params, vel, 0.1, 0.9), ContractError);  // no grad yet

  w.grad();
  std::vector<Tensor> vel_short;
  CHECK_THROWS_AS(sgd_step(params, vel_short, 0.1, 0.9), ContractError);
  std::vector<Tensor> vel_bad = {Tensor::zeros({3})};
  CHECK_THROWS_AS(sgd_step(params, vel_bad, 0.1, 0.9), ShapeError);
}

TEST_CASE("synthetic mnist round trips through the idx loader") {
  const std::string dir = testutil::test_dir("synth_mnist");
  synth_mnist(dir, 64, 32, 5);
  for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                           "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"})
    CHECK(testutil::file_exists(dir + "/" + name));

  Dataset d = load_mnist(dir);
  CHECK(d.name == "mnist");
  CHECK(d.channels == 1);
  CHECK(d.height == 28);
  CHECK(d.width == 28);
  CHECK(d.train.count == 64);
  CHECK(d.test.count == 32);
  CHECK(d.train.pixels.size() == 64u * 28 * 28);
  for (int l : d.train.labels) {
    CHECK(l >= 0);
    CHECK(l < 10);
  }

  // normalization parameters come from the train split on the [0,1] scale
  double mean = 0.0;
  for (auto p : d.train.pixels) mean += p / 255.0;
  mean /= double(d.train.pixels.size());
  CHECK(d.mean[0] == doctest::Approx(mean).epsilon(1e-10));
  double var = 0.0;
  for (auto p : d.train.pixels) {
    const double dd = p / 255.0 - mean;
    var += dd * dd;
  }
  var /= double(d.train.pixels.size());
  CHECK(d.stddev[0] == doctest::Approx(std::sqrt(var)).epsilon(1e-8));

  int idx[2] = {0, 5};
  Tensor batch = d.make_batch(d.train, idx, 2);
  REQUIRE(batch.shape() == Shape{2, 1, 28, 28});
  CHECK(batch.data()[0] ==
        doctest::Approx((d.train.pixels[0] / 255.0 - d.mean[0]) / d.stddev[0]).epsilon(1e-10));
  CHECK(d.make_labels(d.train, idx, 2) ==
        std::vector<int>{d.train.labels[0], d.train.labels[5]});

  std::vector<double> s = d.sample(d.train, 5);
  for (int i = 0; i < 28 * 28; ++i) CHECK(s[size_t(i)] == batch.data()[28 * 28 + i]);

  double lo, hi;
  d.normalized_range(0, &lo, &hi);
  CHECK(lo == doctest::Approx((0.0 - d.mean[0]) / d.stddev[0]).epsilon(1e-10));
  CHECK(hi == doctest::Approx((1.0 - d.mean[0]) / d.stddev[0]).epsilon(1e-10));

  // deterministic in the seed
  const std::string dir2 = testutil::test_dir("synth_mnist2");
  synth_mnist(dir2, 64, 32, 5);
  CHECK(testutil::read_file(dir + "/train-images-idx3-ubyte") ==
        testutil::read_file(dir2 + "/train-images-idx3-ubyte"));
  synth_mnist(dir2, 64, 32, 6);
  CHECK(testutil::read_file(dir + "/train-images-idx3-ubyte") !=
        testutil::read_file(dir2 + "/train-images-idx3-ubyte"));

  CHECK_THROWS_AS(load_mnist(dir + "/nope"), FormatError);
}

TEST_CASE("synthetic cifar10 round trips through the batch loader") {
  const std::string dir = testutil::test_dir("synth_cifar");
  synth_cifar10(dir, 50, 20, 3);
  Dataset d = load_cifar10(dir);
  CHECK(d.name == "cifar10");
  CHECK(d.channels == 3);
  CHECK(d.height == 32);
  CHECK(d.width == 32);
  CHECK(d.train.count == 50);
  CHECK(d.test.count == 20);
  CHECK(d.mean.size() == 3);
  for (int c = 0; c < 3; ++c) CHECK(d.stddev[size_t(c)] > 0.0);
}

TEST_CASE("idx double tensors and label lines round trip") {
  const std::string dir = testutil::test_dir("idxdouble");
  Shape shape = {2, 1, 2, 3};
  std::vector<double> v = {0.5, -1.25, 3.0, 1e-300, -0.0, 7.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  save_idx_double(dir + "/t.idx", shape, v);
  auto [s2, v2] = load_idx_double(dir + "/t.idx");
  CHECK(s2 == shape);
  REQUIRE(v2.size() == v.size());
  for (size_t i = 0; i < v.size(); ++i) CHECK(std::memcmp(&v2[i], &v[i], 8) == 0);

  save_int_lines(dir + "/l.txt", {3, 1, 4, 1, 5});
  CHECK(load_int_lines(dir + "/l.txt") == std::vector<int>{3, 1, 4, 1, 5});
  CHECK_THROWS_AS(load_idx_double(dir + "/missing.idx"), FormatError);
}

TEST_CASE("evaluate reports accuracy and gate openness") {
  const std::string dir = testutil::test_dir("trainer_eval");
  synth_mnist(dir, 48, 24, 11);
  Dataset d = load_mnist(dir);

  Network ungated(NetworkSpec::tiny(1, 10, false), 1);
  EvalResult r = evaluate(ungated, d, d.test, 16);
  CHECK(r.accuracy >= 0.0);
  CHECK(r.accuracy <= 1.0);
  CHECK(r.active_fraction == 1.0);

  Network gated(NetworkSpec::tiny(1, 10, true), 1);
  EvalResult g = evaluate(gated, d, d.test, 16);
  CHECK(g.active_fraction >= 0.0);
  CHECK(g.active_fraction <= 1.0);
}

TEST_CASE("training is deterministic and writes metrics") {
  const std::string dir = testutil::test_dir("trainer_train");
  synth_mnist(dir, 96, 32, 21);
  Dataset d = load_mnist(dir);

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.lr = 0.05;
  cfg.seed = 9;
  cfg.weights.lambda_m = 0.005;
  cfg.weights.lambda_k = 1.0;
  cfg.weights.lambda_s = 0.001;
  cfg.metrics_path = dir + "/metrics.csv";

  Network n1(NetworkSpec::tiny(1, 10, true), 4);
  TrainResult r1 = train(n1, d, cfg);
  CHECK(r1.epochs_run == 2);
  REQUIRE(r1.history.size() == 2);
  for (const auto& m : r1.history) {
    CHECK(std::isfinite(m.loss));
    CHECK(m.ce > 0.0);
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 1.0);
  }
  CHECK(r1.history[0].lr == doctest::Approx(0.005));  // epochs=2 drops at 1 and 2

  std::string csv = testutil::read_file(cfg.metrics_path);
  CHECK(csv.find("epoch,lr,loss,ce,mi,kl,sparse,accuracy,active_fraction") == 0);

  Network n2(NetworkSpec::tiny(1, 10, true), 4);
  TrainResult r2 = train(n2, d, cfg);
  REQUIRE(r2.history.size() == 2);
  for (size_t e = 0; e < 2; ++e) {
    CHECK(r1.history[e].loss == r2.history[e].loss);
    CHECK(r1.history[e].accuracy == r2.history[e].accuracy);
  }
  auto p1 = n1.params(), p2 = n2.params();
  for (size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].values() == p2[i].values());

  // epoch callback order and early stop
  int calls = 0;
  TrainConfig stop = cfg;
  stop.early_stop_acc = 0.0;
  stop.metrics_path.clear();
  Network n3(NetworkSpec::tiny(1, 10, true), 4);
  TrainResult r3 = train(n3, d, stop, [&](const EpochMetrics& m) {
    ++calls;
    CHECK(m.epoch == calls);
  });
  CHECK(r3.epochs_run == 1);
  CHECK(calls == 1);
}

TEST_CASE("training aborts on non-finite loss") {
  const std::string dir = testutil::test_dir("trainer_nan");
  synth_mnist(dir, 32, 16, 2);
  Dataset d = load_mnist(dir);
  Network net(NetworkSpec::tiny(1, 10, false), 1);
  // relu squashes a NaN planted in an early conv, so poison the classifier
  net.params().back().data()[0] = std::nan("");
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  CHECK_THROWS_AS(train(net, d, cfg), ContractError);
}

TEST_CASE("checkpoint round trip preserves every bit of state") {
  const std::string dir = testutil::test_dir("ckpt");
  synth_mnist(dir, 32, 16, 8);
  Dataset d = load_mnist(dir);

  Network net(NetworkSpec::tiny(1, 10, true), 12);
  TrainConfig cfg;  // one epoch so running stats move off their init
  cfg.epochs = 1;
  cfg.batch_size = 16;
  train(net, d, cfg);

  const std::string path = dir + "/net.ckpt";
  save_checkpoint(path, net, "seed=12\nepochs=1\n");

  std::string echo;
  Network back = load_checkpoint(path, &echo);
  CHECK(echo == "seed=12\nepochs=1\n");
  CHECK(back.spec().blocks.size() == net.spec().blocks.size());
  CHECK(back.spec().gate_logit_offset == net.spec().gate_logit_offset);

  auto pa = net.params(), pb = back.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].values() == pb[i].values());
  for (size_t b = 0; b < net.conv_blocks().size(); ++b) {
    CHECK(net.conv_blocks()[b].bn.running_mean == back.conv_blocks()[b].bn.running_mean);
    CHECK(net.conv_blocks()[b].bn.running_var == back.conv_blocks()[b].bn.running_var);
  }

  // identical inference
  Tensor x = d.make_batch(d.test, std::vector<int>{0, 1, 2}.data(), 3);
  ForwardTrace ta = net.forward_eval(x), tb = back.forward_eval(x);
  CHECK(ta.logits.values() == tb.logits.values());

  // corruption is detected
  std::string bytes = testutil::read_file(path);
  std::string corrupted = bytes;
  corrupted[bytes.size() / 2] = char(corrupted[bytes.size() / 2] ^ 0x40);
  {
    std::ofstream f(dir + "/bad.ckpt", std::ios::binary);
    f.write(corrupted.data(), std::streamsize(corrupted.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir + "/bad.ckpt"), FormatError);

  {
    std::ofstream f(dir + "/short.ckpt", std::ios::binary);
    f.write(bytes.data(), std::streamsize(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(dir + "/short.ckpt"), FormatError);

  std::string wrong = bytes;
  wrong[0] = 'X';
  {
    std::ofstream f(dir + "/magic.ckpt", std::ios::binary);
    f.write(wrong.data(), std::streamsize(wrong.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir + "/magic.ckpt"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir + "/missing.ckpt"), FormatError);
}
