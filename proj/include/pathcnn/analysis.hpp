#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pathcnn/dataset.hpp"
#include "pathcnn/network.hpp"

namespace pathcnn {

// One sample's binary gate decisions from an eval forward pass, one vector
// per gated layer in network order.
struct CalculationPath {
  std::vector<std::vector<double>> z;
  int label = -1;
  int predicted = -1;
};

enum class FilterState { activated, silent, dynamic };

struct LayerCensus {
  std::vector<std::int64_t> counts;  // samples in which each filter fired
  std::int64_t total = 0;
  std::vector<FilterState> states;
  double frac_activated = 0, frac_silent = 0, frac_dynamic = 0;
};

struct FilterStateCensus {
  std::vector<LayerCensus> layers;
  std::int64_t total = 0;
};

// Per-class activation frequencies, same layout as CalculationPath::z.
struct PathProfile {
  int cls = -1;
  std::int64_t count = 0;
  std::vector<std::vector<double>> freq;
};

struct FilterCategoryMatrix {
  int layer = 0;  // gated-layer index
  int classes = 0, filters = 0;
  std::vector<double> w;  // row-major [classes x filters]
};

struct FlopsReport {
  std::vector<std::int64_t> per_sample;  // conv + gate flops
  double mean_flops = 0;                 // with gate overhead
  double mean_conv_flops = 0;            // without
  std::int64_t dense_flops = 0;          // all channels, no gate modules
  std::int64_t gate_flops_per_sample = 0;
  double ratio = 0;            // dense / mean_flops
  double ratio_conv_only = 0;  // dense / mean_conv_flops
};

struct PruneReport {
  std::vector<std::vector<int>> removed;  // per gated layer
  std::int64_t params_before = 0, params_after = 0;
};

// Eval-mode binary paths for every sample of the split, deterministic.
std::vector<CalculationPath> record_encodings(Network& net, const Dataset& data,
                                              const DataSplit& split, int batch = 200);

// Same for an explicit normalized batch; labels may be empty (stored as -1).
std::vector<CalculationPath> record_encodings_batch(Network& net, const Tensor& x,
                                                    const std::vector<int>& labels);

// Exact-threshold filter states: activated iff count == total, silent iff
// count == 0, dynamic otherwise. tolerance > 0 relaxes the extremes to
// count >= (1-tolerance)*total and count <= tolerance*total.
FilterStateCensus census(const std::vector<CalculationPath>& paths, double tolerance = 0.0);

// Frequency profile per class with at least one sample, ordered by class.
std::vector<PathProfile> path_profiles(const std::vector<CalculationPath>& paths, int classes,
                                       bool by_predicted = false);

// Sum over filters of the plug-in mutual information (nats) between each
// binary filter value and the label.
double empirical_mi(const std::vector<std::vector<double>>& values, const std::vector<int>& labels,
                    int classes);

// Per-filter lower-median split: output 1 where the value exceeds that
// filter's median over the rows.
std::vector<std::vector<double>> binarize_at_median(const std::vector<std::vector<double>>& rows);

std::vector<FilterCategoryMatrix> filter_category_matrices(Network& net);

// Per-sample masked-inference cost over the split against the all-channels
// baseline. 2*D^2*|in|*|out|*OH*OW per conv, 2*C*width + 2*width*N per gate.
FlopsReport flops_report(Network& net, const Dataset& data, const DataSplit& split,
                         std::int64_t max_samples = -1);
std::int64_t dense_conv_flops(const NetworkSpec& spec, int h, int w);

// Removes every silent filter found by the census from the network in
// place. Refuses to empty a layer.
PruneReport prune_silent(Network& net, const FilterStateCensus& cs);

// Top-k principal axes of the centered rows via a Jacobi eigensolver.
// axes[i] is the i-th axis (length d); eigenvalues descending.
void pca_axes(const std::vector<std::vector<double>>& rows, int k,
              std::vector<std::vector<double>>& axes, std::vector<double>& eigenvalues);

// 2-D PCA projection of the binary encodings of one gated layer. All-zero
// coordinates when the encodings have no variance.
std::vector<std::pair<double, double>> project_encodings(const std::vector<CalculationPath>& paths,
                                                         int layer);

}  // namespace pathcnn
