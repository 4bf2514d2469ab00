#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pathcnn/ops.hpp"
#include "pathcnn/tensor.hpp"

namespace testutil {

inline std::vector<double> randn_vec(std::mt19937_64& rng, std::int64_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(size_t(n), 0.0);
  for (auto& x : v) x = d(rng);
  return v;
}

inline pathcnn::Tensor randn(const pathcnn::Shape& shape, std::mt19937_64& rng,
                             double scale = 1.0) {
  return pathcnn::Tensor::from(shape, randn_vec(rng, pathcnn::shape_numel(shape), scale));
}

// Magnitudes in [0.5, 1.5] with random sign: safe denominators.
inline pathcnn::Tensor rand_away_from_zero(const pathcnn::Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::vector<double> v(size_t(pathcnn::shape_numel(shape)), 0.0);
  for (auto& x : v) x = ((rng() & 1) ? 1.0 : -1.0) * mag(rng);
  return pathcnn::Tensor::from(shape, v);
}

// Values in [0.3, 2.3]: safe log/sqrt arguments.
inline pathcnn::Tensor rand_positive(const pathcnn::Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.3, 2.3);
  std::vector<double> v(size_t(pathcnn::shape_numel(shape)), 0.0);
  for (auto& x : v) x = mag(rng);
  return pathcnn::Tensor::from(shape, v);
}

inline double weighted(const std::vector<double>& out, const std::vector<double>& w) {
  double s = 0.0;
  for (size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

// Max relative error between the autodiff gradient and central differences,
// over every element of every input. f must rebuild its graph from the input
// values on each call and be deterministic.
template <typename F>
double grad_check(F&& f, std::vector<pathcnn::Tensor> inputs, std::uint64_t wseed = 7,
                  double step = 1e-5) {
  using namespace pathcnn;
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor out = f(inputs);
  std::mt19937_64 wrng(wseed);
  std::vector<double> w = randn_vec(wrng, out.numel());
  Tensor wt = Tensor::from(out.shape(), w);
  backward(ops::sum_all(ops::mul(out, wt)));

  double max_err = 0.0;
  NoGradGuard ng;
  for (auto& t : inputs) {
    const std::vector<double>& g = t.grad();
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      double* v = t.data() + i;
      const double old = *v;
      *v = old + step;
      const double lp = weighted(f(inputs).values(), w);
      *v = old - step;
      const double lm = weighted(f(inputs).values(), w);
      *v = old;
      const double fd = (lp - lm) / (2.0 * step);
      const double a = g[size_t(i)];
      const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      if (err > max_err) max_err = err;
    }
  }
  return max_err;
}

// Fresh scratch directory under the system temp root.
inline std::string test_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / ("pathcnn_test_" + name);
  std::error_code ec;
  fs::remove_all(p, ec);
  fs::create_directories(p);
  return p.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

}  // namespace testutil
