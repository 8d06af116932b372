#include "medic/experiment.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "medic/errors.h"

namespace medic {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Typed access to one JSON object; every key read is remembered so finish()
// can reject the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    known_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  double get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(path(key) + " must be a number");
    return v.get<double>();
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return as_u64(j_.at(key), path(key));
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) {
    return static_cast<std::size_t>(get_u64(key, fallback));
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + " must be a boolean");
    return v.get<bool>();
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(path(key) + " must be a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key())) throw ConfigError("unknown key: " + path(it.key()));
    }
  }

  static std::uint64_t as_u64(const json& v, const std::string& where) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
      throw ConfigError(where + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  static int as_int(const json& v, const std::string& where) {
    return static_cast<int>(as_u64(v, where));
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> known_;
};

template <class T, class F>
std::vector<T> read_array(const json& v, const std::string& where, F&& convert) {
  if (!v.is_array()) throw ConfigError(where + " must be an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(convert(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + " must be a number");
  return v.get<double>();
}

SyntheticConfig parse_synthetic(const json& j) {
  ObjectReader r(j, "dataset.synthetic");
  SyntheticConfig c;
  c.num_domains = r.get_size("num_domains", c.num_domains);
  c.num_classes = r.get_size("num_classes", c.num_classes);
  c.samples_per_class_per_domain =
      r.get_size("samples_per_class_per_domain", c.samples_per_class_per_domain);
  c.feature_dim = r.get_size("feature_dim", c.feature_dim);
  c.class_center_radius = r.get_double("class_center_radius", c.class_center_radius);
  c.cluster_std = r.get_double("cluster_std", c.cluster_std);
  c.noise_seed = r.get_u64("noise_seed", c.noise_seed);
  c.validation_fraction = r.get_double("validation_fraction", c.validation_fraction);
  const bool has_rot = r.has("rotations_deg");
  const bool has_tf = r.has("transforms");
  if (has_rot && has_tf) {
    throw ConfigError("dataset.synthetic: give rotations_deg or transforms, not both");
  }
  if (has_rot) {
    auto degrees = read_array<double>(r.raw("rotations_deg"),
                                      r.path("rotations_deg"), as_double);
    c.transforms = rotation_transforms(degrees);
  }
  if (has_tf) {
    c.transforms = read_array<DomainTransform>(
        r.raw("transforms"), r.path("transforms"),
        [](const json& v, const std::string& where) {
          ObjectReader t(v, where);
          DomainTransform tf;
          tf.rotation_deg = t.get_double("rotation_deg", 0.0);
          tf.scale = t.get_double("scale", 1.0);
          if (t.has("translation")) {
            tf.translation = read_array<double>(t.raw("translation"),
                                                t.path("translation"), as_double);
          }
          t.finish();
          return tf;
        });
  }
  r.finish();
  c.validate();
  return c;
}

json synthetic_to_json(const SyntheticConfig& c) {
  json transforms = json::array();
  for (const DomainTransform& t : c.transforms) {
    transforms.push_back({{"rotation_deg", t.rotation_deg},
                          {"scale", t.scale},
                          {"translation", t.translation}});
  }
  return {{"num_domains", c.num_domains},
          {"num_classes", c.num_classes},
          {"samples_per_class_per_domain", c.samples_per_class_per_domain},
          {"feature_dim", c.feature_dim},
          {"class_center_radius", c.class_center_radius},
          {"cluster_std", c.cluster_std},
          {"noise_seed", c.noise_seed},
          {"validation_fraction", c.validation_fraction},
          {"transforms", transforms}};
}

std::string_view objective_name(Objective o) {
  switch (o) {
    case Objective::kCrossEntropy: return "ce";
    case Objective::kOneVsAll: return "ova";
    case Objective::kAll: return "all";
  }
  return "?";
}

Objective parse_objective(const std::string& text) {
  if (text == "ce") return Objective::kCrossEntropy;
  if (text == "ova") return Objective::kOneVsAll;
  if (text == "all") return Objective::kAll;
  throw ConfigError("train.objective must be one of ce, ova, all");
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  ExperimentConfig c;
  ObjectReader r(root, "");

  if (!r.has("dataset")) throw ConfigError("config: missing required key 'dataset'");
  {
    ObjectReader d(r.raw("dataset"), "dataset");
    const bool syn = d.has("synthetic");
    const bool csv = d.has("csv");
    if (syn == csv) throw ConfigError("dataset: exactly one of synthetic, csv is required");
    if (syn) c.synthetic = parse_synthetic(d.raw("synthetic"));
    if (csv) {
      fs::path p = d.get_string("csv", "");
      c.csv_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    c.csv_validation_fraction =
        d.get_double("validation_fraction", c.csv_validation_fraction);
    d.finish();
  }

  if (!r.has("num_known")) throw ConfigError("config: missing required key 'num_known'");
  c.num_known = r.get_size("num_known", 0);

  if (r.has("model")) {
    ObjectReader m(r.raw("model"), "model");
    if (m.has("hidden_dims")) {
      c.hidden_dims = read_array<std::size_t>(
          m.raw("hidden_dims"), "model.hidden_dims",
          [](const json& v, const std::string& w) {
            return static_cast<std::size_t>(ObjectReader::as_u64(v, w));
          });
    }
    c.share_params = m.get_bool("share_params", c.share_params);
    m.finish();
  }

  if (r.has("train")) {
    ObjectReader t(r.raw("train"), "train");
    TrainConfig& tc = c.train;
    tc.strategy = parse_strategy(t.get_string("strategy", std::string(to_string(tc.strategy))));
    tc.alpha = t.get_double("alpha", tc.alpha);
    tc.beta = t.get_double("beta", tc.beta);
    tc.eta = t.get_double("eta", tc.eta);
    tc.iterations = t.get_size("iterations", tc.iterations);
    tc.batch_per_cell = t.get_size("batch_per_cell", tc.batch_per_cell);
    tc.checkpoint_every = t.get_size("checkpoint_every", tc.checkpoint_every);
    tc.diagnostic_every = t.get_size("diagnostic_every", tc.diagnostic_every);
    tc.objective = parse_objective(t.get_string("objective", "all"));
    t.finish();
  }
  c.train.validate();

  if (r.has("eval")) {
    ObjectReader e(r.raw("eval"), "eval");
    if (e.has("modes")) {
      c.eval_modes = read_array<ScoreMode>(
          e.raw("modes"), "eval.modes", [](const json& v, const std::string& w) {
            if (!v.is_string()) throw ConfigError(w + " must be a string");
            return parse_score_mode(v.get<std::string>());
          });
    }
    c.grid_size = e.get_size("grid_size", c.grid_size);
    e.finish();
  }
  if (c.eval_modes.empty()) throw ConfigError("eval.modes must be non-empty");
  if (c.grid_size < 1) throw ConfigError("eval.grid_size must be >= 1");

  if (r.has("seeds")) {
    c.seeds = read_array<std::uint64_t>(r.raw("seeds"), "seeds", ObjectReader::as_u64);
  }
  if (c.seeds.empty()) throw ConfigError("seeds must be non-empty");

  if (r.has("targets")) {
    const json& t = r.raw("targets");
    if (t.is_string()) {
      if (t.get<std::string>() != "all") throw ConfigError("targets: expected \"all\"");
    } else if (t.is_array()) {
      c.targets = read_array<int>(t, "targets", ObjectReader::as_int);
      if (c.targets->empty()) throw ConfigError("targets must be non-empty");
    } else {
      c.targets = std::vector<int>{ObjectReader::as_int(t, "targets")};
    }
  }

  c.output_dir = r.get_string("output_dir", c.output_dir.string());
  c.workers = r.get_size("workers", c.workers);
  if (c.workers < 1) throw ConfigError("workers must be >= 1");

  if (r.has("diag")) {
    ObjectReader g(r.raw("diag"), "diag");
    c.diag.num_quads = g.get_size("num_quads", c.diag.num_quads);
    if (g.has("alphas")) {
      c.diag.alphas = read_array<double>(g.raw("alphas"), "diag.alphas", as_double);
    }
    if (g.has("target")) c.diag.target = ObjectReader::as_int(g.raw("target"), "diag.target");
    g.finish();
  }
  r.finish();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path.parent_path());
}

namespace {

json config_json(const ExperimentConfig& c) {
  json dataset;
  if (c.synthetic) dataset["synthetic"] = synthetic_to_json(*c.synthetic);
  if (c.csv_path) dataset["csv"] = c.csv_path->string();
  dataset["validation_fraction"] = c.csv_validation_fraction;

  json modes = json::array();
  for (ScoreMode m : c.eval_modes) modes.push_back(std::string(to_string(m)));
  json diag = {{"num_quads", c.diag.num_quads}, {"alphas", c.diag.alphas}};
  if (c.diag.target) diag["target"] = *c.diag.target;

  json out = {
      {"dataset", dataset},
      {"num_known", c.num_known},
      {"model", {{"hidden_dims", c.hidden_dims}, {"share_params", c.share_params}}},
      {"train",
       {{"strategy", std::string(to_string(c.train.strategy))},
        {"alpha", c.train.alpha},
        {"beta", c.train.beta},
        {"eta", c.train.eta},
        {"iterations", c.train.iterations},
        {"batch_per_cell", c.train.batch_per_cell},
        {"checkpoint_every", c.train.checkpoint_every},
        {"diagnostic_every", c.train.diagnostic_every},
        {"objective", std::string(objective_name(c.train.objective))}}},
      {"eval", {{"modes", modes}, {"grid_size", c.grid_size}}},
      {"seeds", c.seeds},
      {"diag", diag},
  };
  if (c.targets) {
    out["targets"] = *c.targets;
  } else {
    out["targets"] = "all";
  }
  // output_dir and workers do not affect results and are left out so that
  // manifests compare equal across output locations and worker counts.
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) {
  return config_json(config).dump(2);
}

MultiDomainDataset load_dataset(const ExperimentConfig& config) {
  if (config.synthetic) return generate_synthetic(*config.synthetic);
  if (config.csv_path) return load_csv(*config.csv_path, config.csv_validation_fraction);
  throw ConfigError("config has no dataset source");
}

std::vector<int> resolve_targets(const ExperimentConfig& config,
                                 const MultiDomainDataset& dataset) {
  if (!config.targets) return dataset.domains();
  for (int t : *config.targets) {
    if (!dataset.has_domain(t)) {
      throw DataError("target domain " + std::to_string(t) + " not in dataset");
    }
  }
  return *config.targets;
}

std::uint64_t derive_run_seed(std::uint64_t seed, int target, std::uint64_t stream) {
  // splitmix64 finaliser folded over the three inputs.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(target)));
  h = mix(h ^ stream);
  return h;
}

fs::path cmd_generate(const ExperimentConfig& config, std::ostream& log) {
  if (!config.synthetic) throw ConfigError("generate: config has no synthetic dataset");
  const MultiDomainDataset dataset = generate_synthetic(*config.synthetic);
  fs::create_directories(config.output_dir);
  const fs::path path = config.output_dir / "dataset.csv";
  save_csv(dataset, path);
  log << "wrote " << path.string() << ": " << dataset.size() << " samples, "
      << dataset.classes().size() << " classes, " << dataset.domains().size()
      << " domains\n";
  return path;
}

std::string report_to_json(const EvalReport& report, int target, std::uint64_t seed) {
  json thresholds = json::array(), h = json::array(), ak = json::array(),
       au = json::array();
  for (std::size_t i = 0; i < report.target_sweep.thresholds.size(); ++i) {
    thresholds.push_back(report.target_sweep.thresholds[i]);
    h.push_back(report.target_sweep.values[i].h);
    ak.push_back(report.target_sweep.values[i].acc_known);
    au.push_back(report.target_sweep.values[i].acc_unknown);
  }
  json j = {{"mode", std::string(to_string(report.mode))},
            {"target", target},
            {"seed", seed},
            {"acc", report.acc},
            {"oscr", report.oscr},
            {"h_best", report.target_sweep.best_h},
            {"mu_best", report.target_sweep.best_threshold},
            {"thresholds", thresholds},
            {"h_scores", h},
            {"acc_known", ak},
            {"acc_unknown", au},
            {"source_threshold",
             {{"value", report.best_source_threshold},
              {"h_target", report.h_at_best_source_threshold},
              {"proxy", report.source_threshold_is_proxy}}}};
  return j.dump(2) + "\n";
}

namespace {

struct CellOutcome {
  int target = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::size_t best_iteration = 0;
  double validation_accuracy = 0.0;
  std::map<std::string, std::string> files;
  std::map<std::string, ModeMetrics> metrics;
};

CellOutcome run_cell(const ExperimentConfig& config, const MultiDomainDataset& dataset,
                     int target, std::uint64_t seed) {
  CellOutcome cell;
  cell.target = target;
  cell.seed = seed;
  try {
    const OpenSetProtocol protocol = make_protocol(dataset, target, config.num_known);
    ModelConfig mc{dataset.feature_dim(), config.hidden_dims, config.num_known,
                   config.share_params, derive_run_seed(seed, target, 0)};
    TrainConfig tc = config.train;
    tc.seed = derive_run_seed(seed, target, 1);
    const TrainResult result = train(init_model(mc), dataset, protocol, tc);
    cell.best_iteration = result.best_iteration;
    cell.validation_accuracy = result.best_validation_accuracy;

    const fs::path rel = fs::path("target_" + std::to_string(target)) /
                         ("seed_" + std::to_string(seed));
    const fs::path dir = config.output_dir / rel;
    fs::create_directories(dir);

    save_checkpoint(result.best_net, dir / "checkpoint.txt");
    cell.files["checkpoint"] = (rel / "checkpoint.txt").generic_string();
    {
      std::ofstream out(dir / "steps.csv", std::ios::binary);
      write_steps_csv(result.steps, out);
      if (!out) throw Error("write failed: steps.csv");
    }
    cell.files["steps"] = (rel / "steps.csv").generic_string();

    const std::vector<double> grid = default_threshold_grid(config.grid_size);
    for (ScoreMode mode : config.eval_modes) {
      const std::string name(to_string(mode));
      const EvalReport report = evaluate(result.best_net, protocol, dataset, mode, grid);
      write_text(dir / ("report_" + name + ".json"), report_to_json(report, target, seed));
      std::ofstream curve(dir / ("curve_" + name + ".csv"), std::ios::binary);
      write_curve_csv(report.curve, curve);
      if (!curve) throw Error("write failed: curve csv");
      cell.files["report_" + name] = (rel / ("report_" + name + ".json")).generic_string();
      cell.files["curve_" + name] = (rel / ("curve_" + name + ".csv")).generic_string();
      cell.metrics[name] = {report.acc, report.target_sweep.best_h,
                            report.target_sweep.best_threshold, report.oscr};
    }
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

json metrics_json(const ModeMetrics& m) {
  return {{"acc", m.acc}, {"h_best", m.h_best}, {"mu_best", m.mu_best}, {"oscr", m.oscr}};
}

}  // namespace

RunSummary cmd_run(const ExperimentConfig& config, std::ostream& log) {
  const MultiDomainDataset dataset = load_dataset(config);
  const std::vector<int> targets = resolve_targets(config, dataset);
  fs::create_directories(config.output_dir);

  std::vector<std::pair<int, std::uint64_t>> jobs;
  for (int t : targets) {
    for (std::uint64_t s : config.seeds) jobs.emplace_back(t, s);
  }
  std::vector<CellOutcome> cells(jobs.size());

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      cells[i] = run_cell(config, dataset, jobs[i].first, jobs[i].second);
      std::lock_guard lock(log_mutex);
      log << "target " << cells[i].target << " seed " << cells[i].seed << ": "
          << (cells[i].ok ? "ok" : "FAILED: " + cells[i].error) << "\n";
    }
  };
  const std::size_t n_threads = std::min(config.workers, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  RunSummary summary;
  summary.cells = cells.size();

  json cell_rows = json::array();
  // mode -> target -> per-seed metrics of successful cells
  std::map<std::string, std::map<int, std::vector<ModeMetrics>>> by_mode;
  for (const CellOutcome& c : cells) {
    json row = {{"target", c.target}, {"seed", c.seed}, {"status", c.ok ? "ok" : "error"}};
    if (c.ok) {
      row["best_iteration"] = c.best_iteration;
      row["validation_accuracy"] = c.validation_accuracy;
      row["files"] = c.files;
      json results = json::object();
      for (const auto& [mode, m] : c.metrics) {
        results[mode] = metrics_json(m);
        by_mode[mode][c.target].push_back(m);
      }
      row["results"] = results;
    } else {
      row["error"] = c.error;
      ++summary.failed;
    }
    cell_rows.push_back(row);
  }

  auto mean_of = [](const std::vector<ModeMetrics>& v) {
    ModeMetrics m;
    for (const ModeMetrics& x : v) {
      m.acc += x.acc;
      m.h_best += x.h_best;
      m.mu_best += x.mu_best;
      m.oscr += x.oscr;
    }
    const double n = static_cast<double>(v.size());
    m.acc /= n;
    m.h_best /= n;
    m.mu_best /= n;
    m.oscr /= n;
    return m;
  };

  json aggregate = json::object();
  for (const auto& [mode, per_target] : by_mode) {
    json rows = json::array();
    std::vector<ModeMetrics> target_means;
    for (const auto& [target, runs] : per_target) {
      const ModeMetrics m = mean_of(runs);
      target_means.push_back(m);
      json r = metrics_json(m);
      r["target"] = target;
      r["runs"] = runs.size();
      rows.push_back(r);
    }
    aggregate[mode] = {{"per_target", rows}, {"average", metrics_json(mean_of(target_means))}};
  }

  json manifest = {{"config", config_json(config)},
                   {"cells", cell_rows},
                   {"aggregate", aggregate},
                   {"failed_cells", summary.failed},
                   {"total_cells", summary.cells}};
  summary.manifest = config.output_dir / "manifest.json";
  write_text(summary.manifest, manifest.dump(2) + "\n");
  log << "wrote " << summary.manifest.string() << " (" << summary.cells - summary.failed
      << "/" << summary.cells << " cells ok)\n";
  return summary;
}

DiagOutputs cmd_diag(const ExperimentConfig& config, const fs::path& checkpoint,
                     std::ostream& log) {
  const MultiDomainDataset dataset = load_dataset(config);
  const MedicNet net = load_checkpoint(checkpoint);
  const std::vector<int> targets = resolve_targets(config, dataset);
  const int target = config.diag.target.value_or(targets.front());
  const OpenSetProtocol protocol = make_protocol(dataset, target, config.num_known);
  if (net.config.input_dim != dataset.feature_dim() ||
      net.config.num_known != protocol.num_known()) {
    throw ConfigError("diag: checkpoint (input_dim " + std::to_string(net.config.input_dim) +
                      ", num_known " + std::to_string(net.config.num_known) +
                      ") does not match config (input_dim " +
                      std::to_string(dataset.feature_dim()) + ", num_known " +
                      std::to_string(protocol.num_known()) + ")");
  }

  std::mt19937_64 rng(derive_run_seed(config.seeds.front(), target, 2));
  std::vector<MetaQuad> quads;
  for (std::size_t i = 0; i < std::max<std::size_t>(config.diag.num_quads, 1); ++i) {
    quads.push_back(sample_meta_quad(dataset, protocol, config.train.batch_per_cell, rng));
  }

  fs::create_directories(config.output_dir);
  DiagOutputs outputs{config.output_dir / "diag_gradients.csv",
                      config.output_dir / "diag_taylor.csv"};
  char buf[64];
  {
    std::ofstream out(outputs.gradients_csv, std::ios::binary);
    out << "quad,dot_f1f2,dot_f1g1,dot_g2f2,dot_g2g1,cos_f1f2,cos_f1g1,cos_g2f2,cos_g2g1,"
           "l_reg\n";
    for (std::size_t i = 0; i < config.diag.num_quads; ++i) {
      const GradDiagnostic d = grad_matching_diagnostic(net, quads[i], config.train.objective);
      out << i;
      for (double v : d.dots) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        out << buf;
      }
      for (double v : d.cosines) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        out << buf;
      }
      std::snprintf(buf, sizeof(buf), ",%.17g\n", d.l_reg);
      out << buf;
    }
    if (!out) throw Error("write failed: " + outputs.gradients_csv.string());
  }
  {
    std::ofstream out(outputs.taylor_csv, std::ios::binary);
    out << "alpha,residual\n";
    for (double alpha : config.diag.alphas) {
      const double r = taylor_residual(net, quads.front(), alpha, config.train.objective);
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", alpha, r);
      out << buf;
    }
    if (!out) throw Error("write failed: " + outputs.taylor_csv.string());
  }
  log << "wrote " << outputs.gradients_csv.string() << " and "
      << outputs.taylor_csv.string() << "\n";
  return outputs;
}

}  // namespace medic
