#pragma once

#include <vector>

#include "pathcnn/analysis.hpp"
#include "pathcnn/dataset.hpp"
#include "pathcnn/network.hpp"

namespace pathcnn {

// x' = clip(x + eps * sign(grad_x CE), per-channel valid pixel range).
// Gradient flows through fixed binary gates (eval semantics); eps = 0
// returns x unchanged bit for bit.
Tensor fgsm(Network& net, const Dataset& data, const Tensor& x, const std::vector<int>& labels,
            double eps);

// Mean over all gated filters of |z_i - freq_i|.
double path_distance(const CalculationPath& path, const PathProfile& profile);

// Clean-path reference profiles keyed by predicted class with per-class
// thresholds. tau_override >= 0 replaces every per-class threshold.
struct DetectionRule {
  std::vector<PathProfile> profiles;
  std::vector<double> tau;  // indexed by class; NaN where no profile exists
  double tau_override = -1.0;

  const PathProfile* profile_for(int cls) const;
  double tau_for(int cls) const;
};

struct Detection {
  double score = 0;
  bool flagged = false;
  bool has_profile = true;  // false when the predicted class lacks a reference
};

// Profiles from the clean paths (by predicted class); tau per class is the
// 95th percentile of member distances to their own profile.
DetectionRule calibrate(const std::vector<CalculationPath>& clean_paths, int classes);

std::vector<Detection> detect(const std::vector<CalculationPath>& paths,
                              const DetectionRule& rule);

// Rank AUC of positives scoring above negatives, ties at half weight.
double auc(const std::vector<double>& negatives, const std::vector<double>& positives);

// Text serialization of a rule (profiles and thresholds); doubles round
// trip exactly.
void save_detection_rule(const std::string& path, const DetectionRule& rule);
DetectionRule load_detection_rule(const std::string& path);

}  // namespace pathcnn
