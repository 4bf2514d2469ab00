#include "pathcnn/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"
#include "pathcnn/adversarial.hpp"
#include "pathcnn/analysis.hpp"
#include "pathcnn/checkpoint.hpp"
#include "pathcnn/ops.hpp"
#include "pathcnn/report.hpp"
#include "pathcnn/trainer.hpp"

namespace pathcnn {

const char* kArtifactVersion = "1.0.0";

namespace {

using KV = std::vector<std::pair<std::string, std::string>>;

std::string num_str(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%.10g", v);
  return b;
}

struct Opts {
  std::string data, dataset = "mnist", arch = "vgg-mini", split = "test";
  std::string out, metrics, init, ckpt, input, labels, clean_profiles;
  int epochs = 10, batch = 64, count = 500, train_count = 2000, test_count = 500, layer = 0;
  std::int64_t max_samples = -1;
  double lr = 0.05, momentum = 0.9, lambda_m = 0.0, lambda_k = 0.0, lambda_s = 0.0;
  double epsilon = 0.1, threshold = -1.0, tolerance = 0.0, gate_offset = 0.1, early_stop = -1.0;
  std::uint64_t seed = 1;
  bool no_gates = false, by_predicted = false, calibrate_mode = false;
};

Dataset load_data(const Opts& o) {
  if (o.data.empty()) throw ContractError("--data is required");
  return o.dataset == "cifar10" ? load_cifar10(o.data) : load_mnist(o.data);
}

const DataSplit& pick_split(const Dataset& d, const std::string& split) {
  return split == "train" ? d.train : d.test;
}

KV base_manifest(const std::string& cmd) {
  return {{"artifact_version", kArtifactVersion},
          {"checkpoint_format", "1"},
          {"command", cmd}};
}

std::string manifest_text(const KV& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

void add_common_data(KV& kv, const Opts& o) {
  kv.push_back({"data", o.data});
  kv.push_back({"dataset", o.dataset});
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory " + dir + ": " + ec.message());
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Flat key=value config. Keys mirror the long flag names without the dashes;
// a key never overrides a flag given on the command line.
void apply_config_file(CLI::App* sub, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key == "config")
      throw FormatError(path + ":" + std::to_string(lineno) + ": config cannot nest");
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt)
      throw FormatError(path + ":" + std::to_string(lineno) + ": unknown key " + key);
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

std::string join(const std::string& dir, const std::string& name) { return dir + "/" + name; }

int run_synth(const Opts& o) {
  ensure_dir(o.out);
  if (o.dataset == "cifar10")
    synth_cifar10(o.out, o.train_count, o.test_count, o.seed);
  else
    synth_mnist(o.out, o.train_count, o.test_count, o.seed);
  KV kv = base_manifest("synth");
  kv.push_back({"dataset", o.dataset});
  kv.push_back({"out", o.out});
  kv.push_back({"train_count", std::to_string(o.train_count)});
  kv.push_back({"test_count", std::to_string(o.test_count)});
  kv.push_back({"seed", std::to_string(o.seed)});
  write_manifest(join(o.out, "manifest.txt"), kv);
  std::printf("synth dataset=%s train=%d test=%d out=%s\n", o.dataset.c_str(), o.train_count,
              o.test_count, o.out.c_str());
  return 0;
}

int run_train(const Opts& o) {
  Dataset data = load_data(o);
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.lr = o.lr;
  cfg.momentum = o.momentum;
  cfg.weights.lambda_m = o.lambda_m;
  cfg.weights.lambda_k = o.lambda_k;
  cfg.weights.lambda_s = o.lambda_s;
  cfg.seed = o.seed;
  cfg.early_stop_acc = o.early_stop;
  cfg.metrics_path = o.metrics.empty() ? o.out + ".metrics.csv" : o.metrics;
  cfg.validate();

  Network net;
  if (!o.init.empty()) {
    net = load_checkpoint(o.init);
  } else {
    NetworkSpec spec = o.arch == "tiny"
                           ? NetworkSpec::tiny(data.channels, data.classes, !o.no_gates)
                           : NetworkSpec::vgg_mini(data.channels, data.classes, !o.no_gates);
    spec.gate_logit_offset = o.gate_offset;
    net = Network(spec, o.seed);
  }

  KV kv = base_manifest("train");
  add_common_data(kv, o);
  kv.push_back({"arch", o.arch});
  kv.push_back({"gates", o.no_gates ? "0" : "1"});
  kv.push_back({"gate_offset", num_str(o.gate_offset)});
  kv.push_back({"init", o.init});
  kv.push_back({"epochs", std::to_string(o.epochs)});
  kv.push_back({"batch", std::to_string(o.batch)});
  kv.push_back({"lr", num_str(o.lr)});
  kv.push_back({"momentum", num_str(o.momentum)});
  kv.push_back({"lambda_m", num_str(o.lambda_m)});
  kv.push_back({"lambda_k", num_str(o.lambda_k)});
  kv.push_back({"lambda_s", num_str(o.lambda_s)});
  kv.push_back({"seed", std::to_string(o.seed)});
  kv.push_back({"early_stop", num_str(o.early_stop)});
  kv.push_back({"metrics", cfg.metrics_path});
  kv.push_back({"out", o.out});

  TrainResult res = train(net, data, cfg);
  save_checkpoint(o.out, net, manifest_text(kv));
  write_manifest(o.out + ".manifest", kv);
  const EpochMetrics& m = res.history.back();
  std::printf("trained epochs=%d loss=%.10g accuracy=%.10g active_fraction=%.10g\n",
              res.epochs_run, m.loss, m.accuracy, m.active_fraction);
  return 0;
}

int run_eval(const Opts& o) {
  Network net = load_checkpoint(o.ckpt);
  Dataset data = load_data(o);
  EvalResult ev = evaluate(net, data, pick_split(data, o.split), o.batch);
  ensure_dir(o.out);
  KV kv = base_manifest("eval");
  add_common_data(kv, o);
  kv.push_back({"ckpt", o.ckpt});
  kv.push_back({"split", o.split});
  kv.push_back({"out", o.out});
  write_manifest(join(o.out, "manifest.txt"), kv);
  std::ofstream f(join(o.out, "eval.csv"), std::ios::trunc);
  f << "accuracy,active_fraction\n"
    << num_str(ev.accuracy) << "," << num_str(ev.active_fraction) << "\n";
  std::printf("accuracy=%.10g active_fraction=%.10g\n", ev.accuracy, ev.active_fraction);
  return 0;
}

int run_analyze(const std::string& kind, const Opts& o) {
  Network net = load_checkpoint(o.ckpt);
  Dataset data = load_data(o);
  const DataSplit& split = pick_split(data, o.split);
  std::vector<CalculationPath> paths = record_encodings(net, data, split, o.batch);
  ensure_dir(o.out);

  KV kv = base_manifest("analyze " + kind);
  add_common_data(kv, o);
  kv.push_back({"ckpt", o.ckpt});
  kv.push_back({"split", o.split});
  kv.push_back({"out", o.out});

  if (kind == "census") {
    kv.push_back({"tolerance", num_str(o.tolerance)});
    FilterStateCensus cs = census(paths, o.tolerance);
    write_census_csv(join(o.out, "census.csv"), cs);
    write_census_filters_csv(join(o.out, "census_filters.csv"), cs);
    std::printf("census layers=%zu samples=%lld\n", cs.layers.size(), (long long)cs.total);
  } else if (kind == "paths") {
    kv.push_back({"by_predicted", o.by_predicted ? "1" : "0"});
    auto profiles = path_profiles(paths, data.classes, o.by_predicted);
    write_profiles_index_csv(join(o.out, "profiles.csv"), profiles);
    for (const auto& p : profiles) {
      char name[64];
      std::snprintf(name, sizeof(name), "paths_class_%d.csv", p.cls);
      write_profile_matrix_csv(join(o.out, name), p);
    }
    for (int c = 0, j = 0; c < data.classes; ++c) {
      if (size_t(j) < profiles.size() && profiles[size_t(j)].cls == c) {
        ++j;
        continue;
      }
      std::fprintf(stderr, "warning: class %d has no samples, profile omitted\n", c);
    }
    for (const auto& m : filter_category_matrices(net)) {
      char name[64];
      std::snprintf(name, sizeof(name), "w_cla_layer_%d.csv", m.layer);
      write_matrix_csv(join(o.out, name), m);
    }
    std::printf("paths classes=%zu samples=%zu\n", profiles.size(), paths.size());
  } else if (kind == "mi") {
    size_t layers = paths.empty() ? 0 : paths[0].z.size();
    std::vector<int> labels;
    labels.reserve(paths.size());
    for (const auto& p : paths) labels.push_back(p.label);
    std::vector<double> mi(layers, 0.0);
    for (size_t l = 0; l < layers; ++l) {
      std::vector<std::vector<double>> values;
      values.reserve(paths.size());
      for (const auto& p : paths) values.push_back(p.z[l]);
      mi[l] = empirical_mi(values, labels, data.classes);
    }
    write_mi_csv(join(o.out, "mi.csv"), mi);
    std::printf("mi layers=%zu samples=%zu\n", layers, paths.size());
  } else if (kind == "flops") {
    kv.push_back({"max_samples", std::to_string(o.max_samples)});
    FlopsReport r = flops_report(net, data, split, o.max_samples);
    write_flops_csv(join(o.out, "flops.csv"), r);
    std::printf("flops mean=%.10g dense=%lld ratio=%.10g\n", r.mean_flops,
                (long long)r.dense_flops, r.ratio);
  } else if (kind == "project") {
    kv.push_back({"layer", std::to_string(o.layer)});
    auto xy = project_encodings(paths, o.layer);
    write_projection_csv(join(o.out, "projection.csv"), xy, paths);
    std::printf("projected samples=%zu layer=%d\n", xy.size(), o.layer);
  }
  write_manifest(join(o.out, "manifest.txt"), kv);
  return 0;
}

int run_attack(const Opts& o) {
  Network net = load_checkpoint(o.ckpt);
  Dataset data = load_data(o);
  const DataSplit& split = data.test;
  int n = int(std::min<std::int64_t>(o.count, split.count));
  if (n < 1) throw ContractError("attack: no samples");
  ensure_dir(o.out);

  std::vector<double> adv_values;
  adv_values.reserve(size_t(n) * size_t(data.sample_numel()));
  std::vector<int> all_labels, clean_pred, adv_pred;
  std::vector<int> idx(size_t(o.batch), 0);
  for (int start = 0; start < n; start += o.batch) {
    int b = std::min(o.batch, n - start);
    for (int i = 0; i < b; ++i) idx[size_t(i)] = start + i;
    Tensor x = data.make_batch(split, idx.data(), b);
    std::vector<int> labels = data.make_labels(split, idx.data(), b);
    Tensor adv = fgsm(net, data, x, labels, o.epsilon);
    adv_values.insert(adv_values.end(), adv.data(), adv.data() + adv.numel());
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
    NoGradGuard ng;
    std::vector<int> pc = ops::argmax_rows(net.forward_eval(x).logits);
    std::vector<int> pa = ops::argmax_rows(net.forward_eval(adv).logits);
    clean_pred.insert(clean_pred.end(), pc.begin(), pc.end());
    adv_pred.insert(adv_pred.end(), pa.begin(), pa.end());
  }

  save_idx_double(join(o.out, "adv.idx"), {n, data.channels, data.height, data.width},
                  adv_values);
  save_int_lines(join(o.out, "labels.txt"), all_labels);
  std::ofstream f(join(o.out, "attack.csv"), std::ios::trunc);
  f << "sample,label,clean_pred,adv_pred,flipped\n";
  int correct = 0, flipped = 0;
  for (int i = 0; i < n; ++i) {
    bool was_right = clean_pred[size_t(i)] == all_labels[size_t(i)];
    bool flip = was_right && adv_pred[size_t(i)] != clean_pred[size_t(i)];
    correct += was_right ? 1 : 0;
    flipped += flip ? 1 : 0;
    f << i << "," << all_labels[size_t(i)] << "," << clean_pred[size_t(i)] << ","
      << adv_pred[size_t(i)] << "," << (flip ? 1 : 0) << "\n";
  }
  double flip_rate = correct > 0 ? double(flipped) / double(correct) : 0.0;

  KV kv = base_manifest("attack");
  add_common_data(kv, o);
  kv.push_back({"ckpt", o.ckpt});
  kv.push_back({"epsilon", num_str(o.epsilon)});
  kv.push_back({"count", std::to_string(n)});
  kv.push_back({"out", o.out});
  write_manifest(join(o.out, "manifest.txt"), kv);
  std::printf("attacked n=%d correct=%d flipped=%d flip_rate=%.10g\n", n, correct, flipped,
              flip_rate);
  return 0;
}

int run_detect(const Opts& o) {
  Network net = load_checkpoint(o.ckpt);
  if (o.calibrate_mode) {
    Dataset data = load_data(o);
    auto paths = record_encodings(net, data, data.train, o.batch);
    DetectionRule rule = calibrate(paths, data.classes);
    save_detection_rule(o.out, rule);
    KV kv = base_manifest("detect calibrate");
    add_common_data(kv, o);
    kv.push_back({"ckpt", o.ckpt});
    kv.push_back({"out", o.out});
    write_manifest(o.out + ".manifest", kv);
    std::printf("calibrated classes=%zu profiles=%zu\n", rule.tau.size(), rule.profiles.size());
    return 0;
  }

  if (o.clean_profiles.empty()) throw ContractError("--clean-profiles or --calibrate is required");
  if (o.input.empty()) throw ContractError("--input is required");
  DetectionRule rule = load_detection_rule(o.clean_profiles);
  if (o.threshold >= 0.0) rule.tau_override = o.threshold;

  auto [shape, values] = load_idx_double(o.input);
  if (shape.size() != 4) throw FormatError(o.input + ": expected a 4-d batch tensor");
  std::vector<int> labels;
  if (!o.labels.empty()) labels = load_int_lines(o.labels);
  int n = shape[0];
  std::int64_t numel = shape_numel(shape) / std::max(1, n);

  std::vector<CalculationPath> paths;
  paths.reserve(size_t(n));
  for (int start = 0; start < n; start += o.batch) {
    int b = std::min(o.batch, n - start);
    Shape bs = shape;
    bs[0] = b;
    std::vector<double> sub(values.begin() + std::int64_t(start) * numel,
                            values.begin() + std::int64_t(start + b) * numel);
    Tensor x = Tensor::from(bs, std::move(sub));
    std::vector<int> blab;
    if (!labels.empty())
      blab.assign(labels.begin() + start, labels.begin() + start + b);
    auto bp = record_encodings_batch(net, x, blab);
    paths.insert(paths.end(), bp.begin(), bp.end());
  }

  std::vector<Detection> det = detect(paths, rule);
  ensure_dir(o.out);
  write_detections_csv(join(o.out, "detections.csv"), det, paths);
  KV kv = base_manifest("detect");
  kv.push_back({"ckpt", o.ckpt});
  kv.push_back({"clean_profiles", o.clean_profiles});
  kv.push_back({"input", o.input});
  kv.push_back({"threshold", num_str(o.threshold)});
  kv.push_back({"out", o.out});
  write_manifest(join(o.out, "manifest.txt"), kv);
  int flagged = 0, errors = 0;
  for (const auto& d : det) {
    flagged += d.flagged ? 1 : 0;
    errors += d.has_profile ? 0 : 1;
  }
  std::printf("detected n=%zu flagged=%d missing_profile=%d\n", det.size(), flagged, errors);
  return 0;
}

int run_prune(const Opts& o) {
  Network net = load_checkpoint(o.ckpt);
  Dataset data = load_data(o);
  auto paths = record_encodings(net, data, data.train, o.batch);
  FilterStateCensus cs = census(paths, o.tolerance);
  PruneReport rep = prune_silent(net, cs);

  KV kv = base_manifest("prune");
  add_common_data(kv, o);
  kv.push_back({"ckpt", o.ckpt});
  kv.push_back({"tolerance", num_str(o.tolerance)});
  kv.push_back({"out", o.out});
  kv.push_back({"params_before", std::to_string(rep.params_before)});
  kv.push_back({"params_after", std::to_string(rep.params_after)});
  int removed = 0;
  for (const auto& r : rep.removed) removed += int(r.size());
  kv.push_back({"removed_filters", std::to_string(removed)});
  save_checkpoint(o.out, net, manifest_text(kv));
  write_manifest(o.out + ".manifest", kv);
  std::printf("pruned removed=%d params_before=%lld params_after=%lld\n", removed,
              (long long)rep.params_before, (long long)rep.params_after);
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  Opts o;
  CLI::App app{"Dynamic-path CNN artifact"};
  app.set_version_flag("--version", std::string("pathcnn ") + kArtifactVersion +
                                        " (checkpoint format 1)");
  app.require_subcommand(1);

  std::string config_path;
  auto add_config = [&config_path](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key=value config file");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a procedural dataset");
  synth->add_option("--dataset", o.dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
  synth->add_option("--out", o.out)->required();
  synth->add_option("--train-count", o.train_count);
  synth->add_option("--test-count", o.test_count);
  synth->add_option("--seed", o.seed);
  add_config(synth);

  CLI::App* tr = app.add_subcommand("train", "train a network");
  tr->add_option("--data", o.data);
  tr->add_option("--dataset", o.dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
  tr->add_option("--arch", o.arch)->check(CLI::IsMember({"vgg-mini", "tiny"}));
  tr->add_flag("--no-gates", o.no_gates);
  tr->add_option("--gate-offset", o.gate_offset);
  tr->add_option("--init", o.init);
  tr->add_option("--epochs", o.epochs);
  tr->add_option("--batch", o.batch);
  tr->add_option("--lr", o.lr);
  tr->add_option("--momentum", o.momentum);
  tr->add_option("--lambda-m", o.lambda_m);
  tr->add_option("--lambda-k", o.lambda_k);
  tr->add_option("--lambda-s", o.lambda_s);
  tr->add_option("--seed", o.seed);
  tr->add_option("--early-stop", o.early_stop);
  tr->add_option("--metrics", o.metrics);
  tr->add_option("--out", o.out)->required();
  add_config(tr);

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--ckpt", o.ckpt)->required();
  ev->add_option("--data", o.data);
  ev->add_option("--dataset", o.dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
  ev->add_option("--split", o.split)->check(CLI::IsMember({"test", "train"}));
  ev->add_option("--batch", o.batch);
  ev->add_option("--out", o.out)->required();
  add_config(ev);

  CLI::App* an = app.add_subcommand("analyze", "interpretability reports");
  an->require_subcommand(1);
  std::vector<std::string> kinds = {"census", "paths", "mi", "flops", "project"};
  std::vector<CLI::App*> an_subs;
  for (const auto& kind : kinds) {
    CLI::App* sub = an->add_subcommand(kind);
    sub->add_option("--ckpt", o.ckpt)->required();
    sub->add_option("--data", o.data);
    sub->add_option("--dataset", o.dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
    sub->add_option("--split", o.split)->check(CLI::IsMember({"test", "train"}));
    sub->add_option("--batch", o.batch);
    sub->add_option("--out", o.out)->required();
    if (kind == "census") sub->add_option("--tolerance", o.tolerance);
    if (kind == "paths") sub->add_flag("--by-predicted", o.by_predicted);
    if (kind == "flops") sub->add_option("--max-samples", o.max_samples);
    if (kind == "project") sub->add_option("--layer", o.layer);
    add_config(sub);
    an_subs.push_back(sub);
  }

  CLI::App* at = app.add_subcommand("attack", "FGSM adversarial batch");
  at->add_option("--ckpt", o.ckpt)->required();
  at->add_option("--data", o.data);
  at->add_option("--dataset", o.dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
  at->add_option("--epsilon", o.epsilon);
  at->add_option("--count", o.count);
  at->add_option("--batch", o.batch);
  at->add_option("--out", o.out)->required();
  add_config(at);

  CLI::App* de = app.add_subcommand("detect", "path-divergence detection");
  de->add_option("--ckpt", o.ckpt)->required();
  de->add_option("--data", o.data);
  de->add_option("--dataset", o.dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
  de->add_flag("--calibrate", o.calibrate_mode);
  de->add_option("--clean-profiles", o.clean_profiles);
  de->add_option("--input", o.input);
  de->add_option("--labels", o.labels);
  de->add_option("--threshold", o.threshold);
  de->add_option("--batch", o.batch);
  de->add_option("--out", o.out)->required();
  add_config(de);

  CLI::App* pr = app.add_subcommand("prune", "remove silent filters");
  pr->add_option("--ckpt", o.ckpt)->required();
  pr->add_option("--data", o.data);
  pr->add_option("--dataset", o.dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
  pr->add_option("--tolerance", o.tolerance);
  pr->add_option("--batch", o.batch);
  pr->add_option("--out", o.out)->required();
  add_config(pr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::fputs(app.help().c_str(), stderr);
    return 2;
  }

  auto with_config = [&config_path](CLI::App* sub) {
    if (!config_path.empty()) apply_config_file(sub, config_path);
  };

  try {
    if (synth->parsed()) return with_config(synth), run_synth(o);
    if (tr->parsed()) return with_config(tr), run_train(o);
    if (ev->parsed()) return with_config(ev), run_eval(o);
    if (an->parsed()) {
      for (size_t i = 0; i < an_subs.size(); ++i)
        if (an_subs[i]->parsed()) return with_config(an_subs[i]), run_analyze(kinds[i], o);
      return 2;
    }
    if (at->parsed()) return with_config(at), run_attack(o);
    if (de->parsed()) return with_config(de), run_detect(o);
    if (pr->parsed()) return with_config(pr), run_prune(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(int(argv.size()), argv.data());
}

}  // namespace pathcnn
