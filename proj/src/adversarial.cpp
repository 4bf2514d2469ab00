#include "pathcnn/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "pathcnn/ops.hpp"

namespace pathcnn {

Tensor fgsm(Network& net, const Dataset& data, const Tensor& x, const std::vector<int>& labels,
            double eps) {
  if (eps < 0) throw ContractError("fgsm: epsilon must be nonnegative");
  if (x.shape().size() != 4) throw ShapeError("fgsm: input must be [b, c, h, w]");
  if (eps == 0.0) return Tensor::from(x.shape(), std::vector<double>(
                                                     x.data(), x.data() + x.numel()));

  Tensor input = Tensor::from(x.shape(), std::vector<double>(x.data(), x.data() + x.numel()));
  input.set_requires_grad(true);
  ForwardTrace trace = net.forward_attack(input);
  Tensor ce = ops::cross_entropy(trace.logits, labels);
  backward(ce);
  const double* g = input.grad().data();

  int c = x.dim(1);
  std::int64_t plane = std::int64_t(x.dim(2)) * x.dim(3);
  std::int64_t per_sample = c * plane;
  std::vector<double> lo(size_t(c), 0.0), hi(size_t(c), 0.0);
  for (int ch = 0; ch < c; ++ch) data.normalized_range(ch, &lo[size_t(ch)], &hi[size_t(ch)]);

  std::vector<double> out(x.data(), x.data() + x.numel());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
    int ch = int((i % per_sample) / plane);
    out[size_t(i)] =
        std::min(hi[size_t(ch)], std::max(lo[size_t(ch)], out[size_t(i)] + eps * s));
  }
  return Tensor::from(x.shape(), std::move(out));
}

double path_distance(const CalculationPath& path, const PathProfile& profile) {
  if (path.z.size() != profile.freq.size()) throw ShapeError("path_distance: layer count mismatch");
  double sum = 0;
  std::int64_t total = 0;
  for (size_t l = 0; l < path.z.size(); ++l) {
    if (path.z[l].size() != profile.freq[l].size())
      throw ShapeError("path_distance: layer width mismatch");
    for (size_t f = 0; f < path.z[l].size(); ++f) sum += std::abs(path.z[l][f] - profile.freq[l][f]);
    total += std::int64_t(path.z[l].size());
  }
  if (total == 0) throw ContractError("path_distance: no gated filters");
  return sum / double(total);
}

const PathProfile* DetectionRule::profile_for(int cls) const {
  for (const auto& p : profiles)
    if (p.cls == cls) return &p;
  return nullptr;
}

double DetectionRule::tau_for(int cls) const {
  if (tau_override >= 0.0) return tau_override;
  if (cls < 0 || size_t(cls) >= tau.size()) return std::numeric_limits<double>::quiet_NaN();
  return tau[size_t(cls)];
}

DetectionRule calibrate(const std::vector<CalculationPath>& clean_paths, int classes) {
  if (clean_paths.empty()) throw ContractError("calibrate: no clean paths");
  DetectionRule rule;
  rule.profiles = path_profiles(clean_paths, classes, true);
  rule.tau.assign(size_t(classes), std::numeric_limits<double>::quiet_NaN());
  for (int c = 0; c < classes; ++c) {
    const PathProfile* prof = rule.profile_for(c);
    if (!prof) continue;
    std::vector<double> dist;
    for (const auto& p : clean_paths)
      if (p.predicted == c) dist.push_back(path_distance(p, *prof));
    std::sort(dist.begin(), dist.end());
    size_t idx = size_t(std::ceil(0.95 * double(dist.size())));
    if (idx > 0) --idx;
    if (idx >= dist.size()) idx = dist.size() - 1;
    rule.tau[size_t(c)] = dist[idx];
  }
  return rule;
}

std::vector<Detection> detect(const std::vector<CalculationPath>& paths,
                              const DetectionRule& rule) {
  std::vector<Detection> out(paths.size());
  for (size_t i = 0; i < paths.size(); ++i) {
    const PathProfile* prof = rule.profile_for(paths[i].predicted);
    if (!prof) {
      out[i].has_profile = false;
      continue;
    }
    out[i].score = path_distance(paths[i], *prof);
    out[i].flagged = out[i].score > rule.tau_for(paths[i].predicted);
  }
  return out;
}

void save_detection_rule(const std::string& path, const DetectionRule& rule) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  f << "pathcnn-rule 1\n";
  f << "classes " << rule.tau.size() << "\n";
  f << "tau";
  for (double t : rule.tau) f << " " << (std::isnan(t) ? "nan" : num(t));
  f << "\n";
  f << "override " << num(rule.tau_override) << "\n";
  f << "profiles " << rule.profiles.size() << "\n";
  for (const auto& p : rule.profiles) {
    f << "profile " << p.cls << " " << p.count << " " << p.freq.size() << "\n";
    for (const auto& layer : p.freq) {
      f << "layer " << layer.size();
      for (double v : layer) f << " " << num(v);
      f << "\n";
    }
  }
  if (!f) throw FormatError("short write to " + path);
}

DetectionRule load_detection_rule(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path);
  std::string word;
  int version = 0;
  if (!(f >> word >> version) || word != "pathcnn-rule")
    throw FormatError(path + ": not a detection rule file");
  if (version != 1) throw FormatError(path + ": unsupported rule version");
  DetectionRule rule;
  size_t classes = 0, nprof = 0;
  if (!(f >> word >> classes) || word != "classes")
    throw FormatError(path + ": missing classes line");
  if (!(f >> word) || word != "tau") throw FormatError(path + ": missing tau line");
  rule.tau.assign(classes, std::numeric_limits<double>::quiet_NaN());
  for (size_t i = 0; i < classes; ++i) {
    if (!(f >> word)) throw FormatError(path + ": truncated tau line");
    if (word != "nan") rule.tau[i] = std::stod(word);
  }
  if (!(f >> word >> rule.tau_override) || word != "override")
    throw FormatError(path + ": missing override line");
  if (!(f >> word >> nprof) || word != "profiles")
    throw FormatError(path + ": missing profiles line");
  rule.profiles.resize(nprof);
  for (auto& p : rule.profiles) {
    size_t layers = 0;
    if (!(f >> word >> p.cls >> p.count >> layers) || word != "profile")
      throw FormatError(path + ": bad profile record");
    p.freq.resize(layers);
    for (auto& layer : p.freq) {
      size_t width = 0;
      if (!(f >> word >> width) || word != "layer")
        throw FormatError(path + ": bad layer record");
      layer.assign(width, 0.0);
      for (size_t i = 0; i < width; ++i)
        if (!(f >> layer[i])) throw FormatError(path + ": truncated layer record");
    }
  }
  return rule;
}

double auc(const std::vector<double>& negatives, const std::vector<double>& positives) {
  if (negatives.empty() || positives.empty())
    throw ContractError("auc: need both negatives and positives");
  std::vector<std::pair<double, int>> all;
  all.reserve(negatives.size() + positives.size());
  for (double s : negatives) all.push_back({s, 0});
  for (double s : positives) all.push_back({s, 1});
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midranks over tied scores, then the Mann-Whitney statistic.
  double rank_sum_pos = 0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
    for (size_t k = i; k < j; ++k)
      if (all[k].second == 1) rank_sum_pos += midrank;
    i = j;
  }
  double np = double(positives.size()), nn = double(negatives.size());
  double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

}  // namespace pathcnn
