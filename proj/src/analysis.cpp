#include "pathcnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pathcnn/ops.hpp"

namespace pathcnn {

std::vector<CalculationPath> record_encodings(Network& net, const Dataset& data,
                                              const DataSplit& split, int batch) {
  NoGradGuard ng;
  std::vector<CalculationPath> paths(size_t(split.count));
  std::vector<int> idx(size_t(batch), 0);
  for (std::int64_t start = 0; start < split.count; start += batch) {
    int n = int(std::min<std::int64_t>(batch, split.count - start));
    for (int i = 0; i < n; ++i) idx[size_t(i)] = int(start + i);
    Tensor x = data.make_batch(split, idx.data(), n);
    ForwardTrace trace = net.forward_eval(x);
    std::vector<int> pred = ops::argmax_rows(trace.logits);
    for (int i = 0; i < n; ++i) {
      CalculationPath& p = paths[size_t(start + i)];
      p.label = split.labels[size_t(start + i)];
      p.predicted = pred[size_t(i)];
      p.z.resize(trace.encodings.size());
      for (size_t l = 0; l < trace.encodings.size(); ++l) {
        const Tensor& z = trace.encodings[l].z;
        int w = z.dim(1);
        p.z[l].assign(z.data() + std::int64_t(i) * w, z.data() + std::int64_t(i + 1) * w);
      }
    }
  }
  return paths;
}

std::vector<CalculationPath> record_encodings_batch(Network& net, const Tensor& x,
                                                    const std::vector<int>& labels) {
  NoGradGuard ng;
  int n = x.dim(0);
  if (!labels.empty() && int(labels.size()) != n)
    throw ShapeError("record_encodings_batch: label count mismatch");
  ForwardTrace trace = net.forward_eval(x);
  std::vector<int> pred = ops::argmax_rows(trace.logits);
  std::vector<CalculationPath> paths;
  paths.resize(size_t(n));
  for (int i = 0; i < n; ++i) {
    CalculationPath& p = paths[size_t(i)];
    p.label = labels.empty() ? -1 : labels[size_t(i)];
    p.predicted = pred[size_t(i)];
    p.z.resize(trace.encodings.size());
    for (size_t l = 0; l < trace.encodings.size(); ++l) {
      const Tensor& z = trace.encodings[l].z;
      int w = z.dim(1);
      p.z[l].assign(z.data() + std::int64_t(i) * w, z.data() + std::int64_t(i + 1) * w);
    }
  }
  return paths;
}

FilterStateCensus census(const std::vector<CalculationPath>& paths, double tolerance) {
  if (paths.empty()) throw ContractError("census: empty path set");
  size_t layers = paths[0].z.size();
  FilterStateCensus cs;
  cs.total = std::int64_t(paths.size());
  cs.layers.resize(layers);
  for (size_t l = 0; l < layers; ++l)
    cs.layers[l].counts.assign(paths[0].z[l].size(), 0);
  for (const auto& p : paths) {
    if (p.z.size() != layers) throw ShapeError("census: inconsistent layer count");
    for (size_t l = 0; l < layers; ++l) {
      auto& counts = cs.layers[l].counts;
      if (p.z[l].size() != counts.size()) throw ShapeError("census: inconsistent layer width");
      for (size_t f = 0; f < counts.size(); ++f)
        if (p.z[l][f] != 0.0) ++counts[f];
    }
  }
  for (auto& lc : cs.layers) {
    lc.total = cs.total;
    lc.states.resize(lc.counts.size());
    std::int64_t lo = std::int64_t(std::floor(tolerance * double(lc.total)));
    std::int64_t hi = lc.total - lo;
    int na = 0, ns = 0;
    for (size_t f = 0; f < lc.counts.size(); ++f) {
      if (lc.counts[f] >= hi) {
        lc.states[f] = FilterState::activated;
        ++na;
      } else if (lc.counts[f] <= lo) {
        lc.states[f] = FilterState::silent;
        ++ns;
      } else {
        lc.states[f] = FilterState::dynamic;
      }
    }
    double w = double(lc.counts.size());
    lc.frac_activated = na / w;
    lc.frac_silent = ns / w;
    lc.frac_dynamic = (w - na - ns) / w;
  }
  return cs;
}

std::vector<PathProfile> path_profiles(const std::vector<CalculationPath>& paths, int classes,
                                       bool by_predicted) {
  std::vector<PathProfile> out;
  for (int c = 0; c < classes; ++c) {
    PathProfile prof;
    prof.cls = c;
    for (const auto& p : paths) {
      int key = by_predicted ? p.predicted : p.label;
      if (key != c) continue;
      if (prof.count == 0) {
        prof.freq.resize(p.z.size());
        for (size_t l = 0; l < p.z.size(); ++l) prof.freq[l].assign(p.z[l].size(), 0.0);
      }
      for (size_t l = 0; l < p.z.size(); ++l)
        for (size_t f = 0; f < p.z[l].size(); ++f)
          if (p.z[l][f] != 0.0) prof.freq[l][f] += 1.0;
      ++prof.count;
    }
    if (prof.count == 0) continue;
    for (auto& layer : prof.freq)
      for (double& f : layer) f /= double(prof.count);
    out.push_back(std::move(prof));
  }
  return out;
}

double empirical_mi(const std::vector<std::vector<double>>& values, const std::vector<int>& labels,
                    int classes) {
  if (values.size() != labels.size()) throw ShapeError("empirical_mi: row/label count mismatch");
  if (values.empty()) throw ContractError("empirical_mi: no samples");
  size_t n = values.size();
  size_t width = values[0].size();
  std::vector<double> pc(size_t(classes), 0.0);
  for (int lab : labels) {
    if (lab < 0 || lab >= classes) throw ContractError("empirical_mi: label out of range");
    pc[size_t(lab)] += 1.0;
  }
  for (double& p : pc) p /= double(n);

  double total = 0.0;
  std::vector<double> joint(size_t(classes) * 2, 0.0);
  for (size_t f = 0; f < width; ++f) {
    std::fill(joint.begin(), joint.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      if (values[i].size() != width) throw ShapeError("empirical_mi: ragged rows");
      int b = values[i][f] != 0.0 ? 1 : 0;
      joint[size_t(labels[i]) * 2 + size_t(b)] += 1.0;
    }
    double pb1 = 0.0;
    for (int c = 0; c < classes; ++c) pb1 += joint[size_t(c) * 2 + 1];
    pb1 /= double(n);
    double pb[2] = {1.0 - pb1, pb1};
    for (int c = 0; c < classes; ++c)
      for (int b = 0; b < 2; ++b) {
        double pj = joint[size_t(c) * 2 + size_t(b)] / double(n);
        if (pj > 0.0) total += pj * std::log(pj / (pc[size_t(c)] * pb[b]));
      }
  }
  return total;
}

std::vector<std::vector<double>> binarize_at_median(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  size_t n = rows.size(), width = rows[0].size();
  std::vector<std::vector<double>> out(n, std::vector<double>(width, 0.0));
  std::vector<double> col(n, 0.0);
  for (size_t f = 0; f < width; ++f) {
    for (size_t i = 0; i < n; ++i) col[i] = rows[i][f];
    std::nth_element(col.begin(), col.begin() + std::ptrdiff_t((n - 1) / 2), col.end());
    double med = col[(n - 1) / 2];
    for (size_t i = 0; i < n; ++i) out[i][f] = rows[i][f] > med ? 1.0 : 0.0;
  }
  return out;
}

std::vector<FilterCategoryMatrix> filter_category_matrices(Network& net) {
  std::vector<FilterCategoryMatrix> out;
  int layer = 0;
  for (auto& b : net.conv_blocks()) {
    if (!b.gated) continue;
    FilterCategoryMatrix m;
    m.layer = layer++;
    m.classes = b.head.cla.out_features();
    m.filters = b.head.cla.in_features();
    const double* w = b.head.cla.weight.data();
    m.w.assign(w, w + std::int64_t(m.classes) * m.filters);
    out.push_back(std::move(m));
  }
  return out;
}

std::int64_t dense_conv_flops(const NetworkSpec& spec, int h, int w) {
  std::int64_t flops = 0;
  int in_c = spec.in_channels;
  for (const auto& b : spec.blocks) {
    std::int64_t oh = (h + 2 * b.pad - b.ksize) / b.stride + 1;
    std::int64_t ow = (w + 2 * b.pad - b.ksize) / b.stride + 1;
    flops += 2ll * b.ksize * b.ksize * in_c * b.out_channels * oh * ow;
    h = int(oh);
    w = int(ow);
    if (b.pool_after) {
      h = (h - spec.pool_size) / spec.pool_stride + 1;
      w = (w - spec.pool_size) / spec.pool_stride + 1;
    }
    in_c = b.out_channels;
  }
  return flops;
}

FlopsReport flops_report(Network& net, const Dataset& data, const DataSplit& split,
                         std::int64_t max_samples) {
  std::int64_t n = split.count;
  if (max_samples >= 0 && max_samples < n) n = max_samples;
  if (n <= 0) throw ContractError("flops_report: no samples");
  FlopsReport r;
  r.per_sample.reserve(size_t(n));
  double sum = 0, sum_conv = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    auto res = net.infer_masked_sample(data.sample(split, int(i)), data.height, data.width);
    r.per_sample.push_back(res.conv_flops + res.gate_flops);
    sum += double(res.conv_flops + res.gate_flops);
    sum_conv += double(res.conv_flops);
    r.gate_flops_per_sample = res.gate_flops;
  }
  r.mean_flops = sum / double(n);
  r.mean_conv_flops = sum_conv / double(n);
  r.dense_flops = dense_conv_flops(net.spec(), data.height, data.width);
  r.ratio = r.mean_flops > 0 ? double(r.dense_flops) / r.mean_flops : 0.0;
  r.ratio_conv_only = r.mean_conv_flops > 0 ? double(r.dense_flops) / r.mean_conv_flops : 0.0;
  return r;
}

PruneReport prune_silent(Network& net, const FilterStateCensus& cs) {
  PruneReport rep;
  rep.params_before = net.param_count();
  int gated_seen = 0;
  for (size_t bi = 0; bi < net.conv_blocks().size(); ++bi) {
    if (!net.conv_blocks()[bi].gated) continue;
    if (size_t(gated_seen) >= cs.layers.size())
      throw ContractError("prune_silent: census has fewer layers than the network");
    const LayerCensus& lc = cs.layers[size_t(gated_seen)];
    std::vector<int> silent;
    for (size_t f = 0; f < lc.states.size(); ++f)
      if (lc.states[f] == FilterState::silent) silent.push_back(int(f));
    rep.removed.push_back(silent);
    if (!silent.empty()) net.remove_filters(int(bi), silent);
    ++gated_seen;
  }
  if (size_t(gated_seen) != cs.layers.size())
    throw ContractError("prune_silent: census has more layers than the network");
  rep.params_after = net.param_count();
  return rep;
}

namespace {

// Cyclic Jacobi rotations on a symmetric matrix, eigenvalues on the
// diagonal and accumulated rotations in v when done.
void jacobi_eigen(std::vector<double>& a, int d, std::vector<double>& v) {
  v.assign(size_t(d) * d, 0.0);
  for (int i = 0; i < d; ++i) v[size_t(i) * d + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) off += a[size_t(p) * d + q] * a[size_t(p) * d + q];
    if (off < 1e-24) break;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) {
        double apq = a[size_t(p) * d + q];
        if (apq == 0.0) continue;
        double app = a[size_t(p) * d + p], aqq = a[size_t(q) * d + q];
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < d; ++k) {
          double akp = a[size_t(k) * d + p], akq = a[size_t(k) * d + q];
          a[size_t(k) * d + p] = c * akp - s * akq;
          a[size_t(k) * d + q] = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          double apk = a[size_t(p) * d + k], aqk = a[size_t(q) * d + k];
          a[size_t(p) * d + k] = c * apk - s * aqk;
          a[size_t(q) * d + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          double vkp = v[size_t(k) * d + p], vkq = v[size_t(k) * d + q];
          v[size_t(k) * d + p] = c * vkp - s * vkq;
          v[size_t(k) * d + q] = s * vkp + c * vkq;
        }
      }
  }
}

}  // namespace

void pca_axes(const std::vector<std::vector<double>>& rows, int k,
              std::vector<std::vector<double>>& axes, std::vector<double>& eigenvalues) {
  if (rows.size() < 2) throw ContractError("pca_axes: need at least 2 rows");
  int n = int(rows.size()), d = int(rows[0].size());
  if (k < 1 || k > d) throw ContractError("pca_axes: bad component count");
  std::vector<double> mean(size_t(d), 0.0);
  for (const auto& r : rows) {
    if (int(r.size()) != d) throw ShapeError("pca_axes: ragged rows");
    for (int j = 0; j < d; ++j) mean[size_t(j)] += r[size_t(j)];
  }
  for (double& m : mean) m /= double(n);

  std::vector<double> cov(size_t(d) * d, 0.0);
  for (const auto& r : rows)
    for (int i = 0; i < d; ++i) {
      double ci = r[size_t(i)] - mean[size_t(i)];
      for (int j = i; j < d; ++j)
        cov[size_t(i) * d + j] += ci * (r[size_t(j)] - mean[size_t(j)]);
    }
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      cov[size_t(i) * d + j] /= double(n - 1);
      cov[size_t(j) * d + i] = cov[size_t(i) * d + j];
    }

  std::vector<double> v;
  jacobi_eigen(cov, d, v);
  std::vector<int> ord(size_t(d), 0);
  for (int i = 0; i < d; ++i) ord[size_t(i)] = i;
  std::sort(ord.begin(), ord.end(), [&](int a, int b) {
    return cov[size_t(a) * d + a] > cov[size_t(b) * d + b];
  });

  axes.assign(size_t(k), std::vector<double>(size_t(d), 0.0));
  eigenvalues.assign(size_t(k), 0.0);
  for (int i = 0; i < k; ++i) {
    int c = ord[size_t(i)];
    eigenvalues[size_t(i)] = cov[size_t(c) * d + c];
    for (int j = 0; j < d; ++j) axes[size_t(i)][size_t(j)] = v[size_t(j) * d + c];
    // Fixed sign: first nonzero component positive.
    for (int j = 0; j < d; ++j) {
      if (axes[size_t(i)][size_t(j)] == 0.0) continue;
      if (axes[size_t(i)][size_t(j)] < 0.0)
        for (int m = 0; m < d; ++m) axes[size_t(i)][size_t(m)] = -axes[size_t(i)][size_t(m)];
      break;
    }
  }
}

std::vector<std::pair<double, double>> project_encodings(const std::vector<CalculationPath>& paths,
                                                         int layer) {
  if (paths.size() < 3) throw ContractError("project_encodings: need at least 3 samples");
  if (layer < 0 || size_t(layer) >= paths[0].z.size())
    throw ContractError("project_encodings: layer index out of range");
  std::vector<std::vector<double>> rows;
  rows.reserve(paths.size());
  for (const auto& p : paths) rows.push_back(p.z[size_t(layer)]);

  int d = int(rows[0].size());
  std::vector<double> mean(size_t(d), 0.0);
  for (const auto& r : rows)
    for (int j = 0; j < d; ++j) mean[size_t(j)] += r[size_t(j)];
  for (double& m : mean) m /= double(rows.size());

  std::vector<std::vector<double>> axes;
  std::vector<double> eig;
  pca_axes(rows, std::min(2, d), axes, eig);

  std::vector<std::pair<double, double>> out(rows.size(), {0.0, 0.0});
  for (size_t i = 0; i < rows.size(); ++i) {
    double x = 0, y = 0;
    for (int j = 0; j < d; ++j) {
      double c = rows[i][size_t(j)] - mean[size_t(j)];
      if (eig.size() > 0 && eig[0] > 1e-18) x += c * axes[0][size_t(j)];
      if (eig.size() > 1 && eig[1] > 1e-18) y += c * axes[1][size_t(j)];
    }
    out[i] = {x, y};
  }
  return out;
}

}  // namespace pathcnn
