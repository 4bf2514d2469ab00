#include "pathcnn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "pathcnn/ops.hpp"

namespace pathcnn {

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("momentum must be in [0,1)");
  if (!(lr > 0.0)) throw ContractError("learning rate must be positive");
  if (eval_batch < 1) throw ContractError("eval batch must be >= 1");
  weights.validate();
  for (int e : lr_drop_epochs)
    if (e < 1 || e > epochs) throw ContractError("lr drop epoch outside [1, epochs]");
}

double TrainConfig::lr_at(int e) const {
  std::vector<int> drops = lr_drop_epochs;
  if (drops.empty()) {
    drops.push_back(int((epochs + 1) / 2));       // ceil(0.5 E)
    drops.push_back(int((3 * epochs + 3) / 4));   // ceil(0.75 E)
  }
  double r = lr;
  for (int d : drops)
    if (e >= d) r *= lr_drop_factor;
  return r;
}

void sgd_step(std::vector<Tensor>& params, std::vector<Tensor>& velocities, double lr, double mu) {
  if (params.size() != velocities.size())
    throw ContractError("sgd_step: velocity count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    Tensor& v = velocities[i];
    if (!p.has_grad()) throw ContractError("sgd_step: parameter has no gradient");
    if (!same_shape(p.shape(), v.shape()))
      throw ShapeError("sgd_step: velocity shape mismatch");
    const double* g = p.grad().data();
    double* vd = v.data();
    double* w = p.data();
    std::int64_t n = p.numel();
    for (std::int64_t j = 0; j < n; ++j) {
      vd[j] = mu * vd[j] + g[j];
      w[j] -= lr * vd[j];
    }
  }
}

EvalResult evaluate(Network& net, const Dataset& data, const DataSplit& split, int batch) {
  NoGradGuard ng;
  std::int64_t correct = 0;
  double gate_sum = 0.0;
  std::int64_t gate_total = 0;
  std::vector<int> idx(size_t(batch), 0);
  for (std::int64_t start = 0; start < split.count; start += batch) {
    int n = int(std::min<std::int64_t>(batch, split.count - start));
    for (int i = 0; i < n; ++i) idx[size_t(i)] = int(start + i);
    Tensor x = data.make_batch(split, idx.data(), n);
    ForwardTrace trace = net.forward_eval(x);
    std::vector<int> pred = ops::argmax_rows(trace.logits);
    for (int i = 0; i < n; ++i)
      if (pred[size_t(i)] == split.labels[size_t(start + i)]) ++correct;
    for (const auto& enc : trace.encodings) {
      const double* z = enc.z.data();
      std::int64_t m = enc.z.numel();
      for (std::int64_t j = 0; j < m; ++j) gate_sum += z[j];
      gate_total += m;
    }
  }
  EvalResult r;
  r.accuracy = split.count > 0 ? double(correct) / double(split.count) : 0.0;
  r.active_fraction = gate_total > 0 ? gate_sum / double(gate_total) : 1.0;
  return r;
}

TrainResult train(Network& net, const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  std::vector<Tensor> params = net.params();
  std::vector<Tensor> velocities;
  velocities.reserve(params.size());
  for (auto& p : params) velocities.push_back(Tensor::zeros(p.shape()));

  std::vector<LayerClassifierHead*> heads;
  for (auto& b : net.conv_blocks())
    if (b.gated) heads.push_back(&b.head);

  std::mt19937_64 shuffle_rng(cfg.seed);
  SemhashSampler sampler(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  std::vector<int> order(size_t(data.train.count), 0);
  for (std::int64_t i = 0; i < data.train.count; ++i) order[size_t(i)] = int(i);

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double lr = cfg.lr_at(epoch);
    for (std::int64_t i = data.train.count - 1; i > 0; --i) {
      std::int64_t j = std::int64_t(shuffle_rng() % std::uint64_t(i + 1));
      std::swap(order[size_t(i)], order[size_t(j)]);
    }

    double sum_loss = 0, sum_ce = 0, sum_mi = 0, sum_kl = 0, sum_sp = 0;
    for (std::int64_t start = 0; start < data.train.count; start += cfg.batch_size) {
      int n = int(std::min<std::int64_t>(cfg.batch_size, data.train.count - start));
      Tensor x = data.make_batch(data.train, order.data() + start, n);
      std::vector<int> labels = data.make_labels(data.train, order.data() + start, n);

      ForwardTrace trace = net.forward_train(x, sampler);
      Tensor ce = ops::cross_entropy(trace.logits, labels);
      Tensor mi = mi_loss(trace.encodings, heads, labels);
      Tensor kl = kl_loss(trace.encodings, trace.gate_gaps);
      Tensor sp = sparse_loss(trace.encodings);
      Tensor loss = total_loss(ce, mi, kl, sp, cfg.weights);

      double lv = loss.item();
      if (!std::isfinite(lv)) {
        char msg[160];
        std::snprintf(msg, sizeof(msg),
                      "loss diverged at epoch %d, sample offset %lld (value %g)", epoch,
                      (long long)start, lv);
        throw ContractError(msg);
      }
      sum_loss += lv * n;
      sum_ce += ce.item() * n;
      sum_mi += mi.item() * n;
      sum_kl += kl.item() * n;
      sum_sp += sp.item() * n;

      for (auto& p : params) p.zero_grad();
      backward(loss);
      sgd_step(params, velocities, lr, cfg.momentum);
    }

    EvalResult ev = evaluate(net, data, data.test, cfg.eval_batch);
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    double inv = 1.0 / double(data.train.count);
    m.loss = sum_loss * inv;
    m.ce = sum_ce * inv;
    m.mi = sum_mi * inv;
    m.kl = sum_kl * inv;
    m.sparse = sum_sp * inv;
    m.accuracy = ev.accuracy;
    m.active_fraction = ev.active_fraction;
    result.history.push_back(m);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(m);
    if (cfg.early_stop_acc >= 0.0 && ev.accuracy >= cfg.early_stop_acc) break;
  }

  if (!cfg.metrics_path.empty()) write_metrics_csv(cfg.metrics_path, result.history);
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f << "epoch,lr,loss,ce,mi,kl,sparse,accuracy,active_fraction\n";
  char line[320];
  for (const auto& m : history) {
    std::snprintf(line, sizeof(line), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  m.epoch, m.lr, m.loss, m.ce, m.mi, m.kl, m.sparse, m.accuracy,
                  m.active_fraction);
    f << line;
  }
  if (!f) throw FormatError("short write to " + path);
}

}  // namespace pathcnn
