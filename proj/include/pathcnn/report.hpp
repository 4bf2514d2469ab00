#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pathcnn/adversarial.hpp"
#include "pathcnn/analysis.hpp"

namespace pathcnn {

// Plot-ready CSV emitters. Output is deterministic: fixed headers, stable
// row order, %.10g numbers; empty input produces a header-only file.

// layer,filters,total,frac_activated,frac_silent,frac_dynamic
void write_census_csv(const std::string& path, const FilterStateCensus& cs);
// layer,filter,count,total,state
void write_census_filters_csv(const std::string& path, const FilterStateCensus& cs);
// class,count per profile
void write_profiles_index_csv(const std::string& path, const std::vector<PathProfile>& profiles);
// One row per layer, frequency per filter.
void write_profile_matrix_csv(const std::string& path, const PathProfile& profile);
// layer,mi
void write_mi_csv(const std::string& path, const std::vector<double>& mi_per_layer);
// Single-row summary.
void write_flops_csv(const std::string& path, const FlopsReport& r);
// sample,x,y,label,predicted
void write_projection_csv(const std::string& path,
                          const std::vector<std::pair<double, double>>& xy,
                          const std::vector<CalculationPath>& paths);
// One row per class, weight per filter.
void write_matrix_csv(const std::string& path, const FilterCategoryMatrix& m);
// sample,score,flagged,has_profile,label,predicted
void write_detections_csv(const std::string& path, const std::vector<Detection>& detections,
                          const std::vector<CalculationPath>& paths);
// key=value lines in the given order.
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace pathcnn
