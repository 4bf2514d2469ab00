#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pathcnn/tensor.hpp"

namespace pathcnn {

struct DataSplit {
  std::vector<std::uint8_t> pixels;  // count * channels * height * width raw bytes
  std::vector<int> labels;
  std::int64_t count = 0;
};

// Image classification dataset with per-channel normalization parameters
// computed over the training split (pixels scaled to [0,1] first).
struct Dataset {
  std::string name;
  int channels = 0, height = 0, width = 0, classes = 10;
  std::vector<double> mean, stddev;
  DataSplit train, test;

  std::int64_t sample_numel() const { return std::int64_t(channels) * height * width; }
  // Normalized batch tensor [n, channels, height, width] for the given
  // sample indices of a split.
  Tensor make_batch(const DataSplit& split, const int* idx, int n) const;
  std::vector<int> make_labels(const DataSplit& split, const int* idx, int n) const;
  std::vector<double> sample(const DataSplit& split, int idx) const;
  // Valid pixel range of channel c in normalized units.
  void normalized_range(int c, double* lo, double* hi) const;
};

// IDX-format MNIST: train-images-idx3-ubyte / train-labels-idx1-ubyte /
// t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte under dir.
Dataset load_mnist(const std::string& dir);

// CIFAR-10 binary batches: data_batch_1..5.bin + test_batch.bin under dir,
// 3073-byte records (1 label + 3*32*32 pixels).
Dataset load_cifar10(const std::string& dir);

// Procedural stand-in datasets written in the exact on-disk formats the
// loaders consume. Digits are glyph renderings with jitter and noise;
// cifar classes are colored texture patterns.
void synth_mnist(const std::string& dir, int train_count, int test_count, std::uint64_t seed);
void synth_cifar10(const std::string& dir, int train_count, int test_count, std::uint64_t seed);

// IDX tensors of doubles (type code 0x0E), used for adversarial batches.
void save_idx_double(const std::string& path, const Shape& shape, const std::vector<double>& v);
std::pair<Shape, std::vector<double>> load_idx_double(const std::string& path);

// Plain one-int-per-line files (labels alongside adversarial batches).
void save_int_lines(const std::string& path, const std::vector<int>& v);
std::vector<int> load_int_lines(const std::string& path);

}  // namespace pathcnn
