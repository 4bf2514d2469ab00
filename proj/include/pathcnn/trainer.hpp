#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pathcnn/dataset.hpp"
#include "pathcnn/losses.hpp"
#include "pathcnn/network.hpp"

namespace pathcnn {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double lr_drop_factor = 0.1;
  std::vector<int> lr_drop_epochs;  // empty means ceil(E/2) and ceil(3E/4)
  LossWeights weights;
  std::uint64_t seed = 1;
  double early_stop_acc = -1.0;  // stop once test accuracy reaches this, when >= 0
  int eval_batch = 200;
  std::string metrics_path;  // per-epoch CSV when nonempty

  void validate() const;
  // Learning rate in effect during 1-based epoch e.
  double lr_at(int e) const;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0;
  double loss = 0, ce = 0, mi = 0, kl = 0, sparse = 0;  // train means per sample
  double accuracy = 0;         // test accuracy after the epoch
  double active_fraction = 0;  // mean binary gate openness on test; 1 when ungated
};

struct EvalResult {
  double accuracy = 0;
  double active_fraction = 0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  int epochs_run = 0;
};

// v <- mu*v + g; w <- w - lr*v. Velocities must match params elementwise.
void sgd_step(std::vector<Tensor>& params, std::vector<Tensor>& velocities, double lr, double mu);

EvalResult evaluate(Network& net, const Dataset& data, const DataSplit& split, int batch);

// Full loop: shuffle, train-mode forward, total loss, backward, sgd_step.
// Aborts with a diagnostic if the loss stops being finite. on_epoch (when
// set) runs after each epoch's evaluation.
TrainResult train(Network& net, const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history);

}  // namespace pathcnn
