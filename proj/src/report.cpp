#include "pathcnn/report.hpp"

#include <cstdio>
#include <fstream>

namespace pathcnn {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  return f;
}

void close_out(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw FormatError("short write to " + path);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

const char* state_name(FilterState s) {
  switch (s) {
    case FilterState::activated: return "activated";
    case FilterState::silent: return "silent";
    default: return "dynamic";
  }
}

}  // namespace

void write_census_csv(const std::string& path, const FilterStateCensus& cs) {
  auto f = open_out(path);
  f << "layer,filters,total,frac_activated,frac_silent,frac_dynamic\n";
  for (size_t l = 0; l < cs.layers.size(); ++l) {
    const auto& lc = cs.layers[l];
    f << l << "," << lc.counts.size() << "," << lc.total << "," << num(lc.frac_activated) << ","
      << num(lc.frac_silent) << "," << num(lc.frac_dynamic) << "\n";
  }
  close_out(f, path);
}

void write_census_filters_csv(const std::string& path, const FilterStateCensus& cs) {
  auto f = open_out(path);
  f << "layer,filter,count,total,state\n";
  for (size_t l = 0; l < cs.layers.size(); ++l) {
    const auto& lc = cs.layers[l];
    for (size_t j = 0; j < lc.counts.size(); ++j)
      f << l << "," << j << "," << lc.counts[j] << "," << lc.total << ","
        << state_name(lc.states[j]) << "\n";
  }
  close_out(f, path);
}

void write_profiles_index_csv(const std::string& path, const std::vector<PathProfile>& profiles) {
  auto f = open_out(path);
  f << "class,count\n";
  for (const auto& p : profiles) f << p.cls << "," << p.count << "\n";
  close_out(f, path);
}

void write_profile_matrix_csv(const std::string& path, const PathProfile& profile) {
  auto f = open_out(path);
  f << "layer,frequencies\n";
  for (size_t l = 0; l < profile.freq.size(); ++l) {
    f << l;
    for (double v : profile.freq[l]) f << "," << num(v);
    f << "\n";
  }
  close_out(f, path);
}

void write_mi_csv(const std::string& path, const std::vector<double>& mi_per_layer) {
  auto f = open_out(path);
  f << "layer,mi\n";
  for (size_t l = 0; l < mi_per_layer.size(); ++l) f << l << "," << num(mi_per_layer[l]) << "\n";
  close_out(f, path);
}

void write_flops_csv(const std::string& path, const FlopsReport& r) {
  auto f = open_out(path);
  f << "samples,mean_flops,mean_conv_flops,dense_flops,gate_flops_per_sample,ratio,"
       "ratio_conv_only\n";
  f << r.per_sample.size() << "," << num(r.mean_flops) << "," << num(r.mean_conv_flops) << ","
    << r.dense_flops << "," << r.gate_flops_per_sample << "," << num(r.ratio) << ","
    << num(r.ratio_conv_only) << "\n";
  close_out(f, path);
}

void write_projection_csv(const std::string& path,
                          const std::vector<std::pair<double, double>>& xy,
                          const std::vector<CalculationPath>& paths) {
  if (xy.size() != paths.size()) throw ShapeError("write_projection_csv: length mismatch");
  auto f = open_out(path);
  f << "sample,x,y,label,predicted\n";
  for (size_t i = 0; i < xy.size(); ++i)
    f << i << "," << num(xy[i].first) << "," << num(xy[i].second) << "," << paths[i].label << ","
      << paths[i].predicted << "\n";
  close_out(f, path);
}

void write_matrix_csv(const std::string& path, const FilterCategoryMatrix& m) {
  auto f = open_out(path);
  f << "class,weights\n";
  for (int c = 0; c < m.classes; ++c) {
    f << c;
    for (int j = 0; j < m.filters; ++j) f << "," << num(m.w[size_t(c) * size_t(m.filters) + size_t(j)]);
    f << "\n";
  }
  close_out(f, path);
}

void write_detections_csv(const std::string& path, const std::vector<Detection>& detections,
                          const std::vector<CalculationPath>& paths) {
  if (detections.size() != paths.size()) throw ShapeError("write_detections_csv: length mismatch");
  auto f = open_out(path);
  f << "sample,score,flagged,has_profile,label,predicted\n";
  for (size_t i = 0; i < detections.size(); ++i)
    f << i << "," << num(detections[i].score) << "," << (detections[i].flagged ? 1 : 0) << ","
      << (detections[i].has_profile ? 1 : 0) << "," << paths[i].label << ","
      << paths[i].predicted << "\n";
  close_out(f, path);
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
  auto f = open_out(path);
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
  close_out(f, path);
}

}  // namespace pathcnn
