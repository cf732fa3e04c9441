#include "qabias/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "qabias/chimera.hpp"
#include "qabias/io.hpp"
#include "qabias/rng.hpp"
#include "qabias/stats.hpp"
#include "qabias/verify.hpp"

namespace qabias {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double temperature_or_nan(const ScanAnalysis& a, TemperatureMethod method, Diagnostics* diag) {
  try {
    return estimate_device_temperature(a, method, diag);
  } catch (const std::runtime_error& e) {
    if (diag) diag->note(fmt::format("{} temperature unavailable: {}", to_string(method), e.what()));
    return kNaN;
  }
}

IterationRecord make_record(ScanKind kind, int k, const ScanAnalysis& a, const CalibrationOptions& o,
                            Diagnostics* diag) {
  IterationRecord rec;
  rec.kind = kind;
  rec.k = k;
  rec.t_mean = temperature_or_nan(a, TemperatureMethod::mean, diag);
  rec.t_median = temperature_or_nan(a, TemperatureMethod::median, diag);
  rec.temperature = o.temperature_method == TemperatureMethod::mean ? rec.t_mean : rec.t_median;
  if (!(rec.temperature > 0.0)) {
    throw std::runtime_error(fmt::format("{} iteration {}: no usable device temperature", to_string(kind), k));
  }

  std::vector<BiasEstimate> est;
  if (kind == ScanKind::h) {
    const auto m = estimate_h_biases(a, rec.temperature, o.scaling, diag);
    for (const auto& t : a.targets) est.push_back(m.at(t.qubit));
  } else {
    const auto m = estimate_j_biases(a, rec.temperature, o.scaling, diag);
    for (const auto& t : a.targets) est.push_back(m.at(t.edge));
  }

  std::vector<double> values, variances;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (a.targets[i].flagged) continue;
    values.push_back(est[i].value);
    variances.push_back(est[i].variance);
  }
  rec.estimate_std = stats::stddev(values);
  const double mean_var = variances.empty() ? 0.0 : stats::mean(variances);
  rec.predicted_floor = std::sqrt(mean_var);
  // Empirical-Bayes prior: spread of the estimates beyond their own noise.
  if (o.damping) rec.prior_variance = std::max(stats::variance(values) - mean_var, 0.0);

  for (std::size_t i = 0; i < est.size(); ++i) {
    const auto& t = a.targets[i];
    TargetEstimate te;
    te.qubit = t.qubit;
    te.edge = t.edge;
    te.bias = est[i].value;
    te.variance = est[i].variance;
    te.slope = t.fit.slope;
    te.intercept = t.fit.intercept;
    te.flagged = t.flagged;
    if (t.flagged) {
      te.correction = 0.0;
      if (diag) diag->note(fmt::format("{} iteration {}: flagged target left uncorrected", to_string(kind), k));
    } else {
      te.correction = o.damping ? damped_correction(te.bias, te.variance, rec.prior_variance) : te.bias;
    }
    rec.targets.push_back(te);
  }
  return rec;
}

ScanProtocol protocol_for(const ScanSettings& s, int k, std::uint64_t stream) {
  ScanProtocol p;
  p.values = evenly_spaced(-s.window, s.window, s.points);
  p.runs = s.runs;
  p.reads = s.reads;
  p.window = s.window;
  p.iteration = k;
  p.stream = stream;
  return p;
}

template <class Enum>
Enum parse_enum(const std::string& text, std::initializer_list<std::pair<const char*, Enum>> options,
                const char* what) {
  for (const auto& [name, value] : options) {
    if (text == name) return value;
  }
  throw std::invalid_argument(fmt::format("unknown {} '{}'", what, text));
}

/// Reads keys of a config section, rejecting any the schema does not know.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw std::invalid_argument(fmt::format("config section '{}' must be an object", name_));
  }
  ~Section() = default;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(fmt::format("config key {}.{}: {}", name_, key, e.what()));
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  void finish() const {
    for (const auto& [key, v] : j_.items()) {
      if (!seen_.count(key)) throw std::invalid_argument(fmt::format("unknown config key {}.{}", name_, key));
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_scan_settings(const json& j, const std::string& name, ScanSettings& s) {
  Section sec(j, name);
  sec.get("points", s.points);
  sec.get("window", s.window);
  sec.get("runs", s.runs);
  sec.get("reads", s.reads);
  sec.get("iterations", s.max_iterations);
  sec.finish();
}

json scan_settings_json(const ScanSettings& s) {
  return json{{"points", s.points}, {"window", s.window}, {"runs", s.runs}, {"reads", s.reads},
              {"iterations", s.max_iterations}};
}

std::string shape_text(const ChimeraShape& s) { return fmt::format("{}x{},shore={}", s.rows, s.cols, s.shore); }

// --- plot data --------------------------------------------------------------

std::string target_name(const TargetFit& t) {
  return t.qubit != 0 ? std::to_string(t.qubit) : fmt::format("{}:{}", t.edge.i, t.edge.j);
}

std::string alpha_csv(const ScanAnalysis& a) {
  std::string out = "target,programmed_value,alpha,fitted\n";
  for (const auto& t : a.targets) {
    for (const auto& p : t.curve) {
      out += fmt::format("{},{},{},{}\n", target_name(t), p.x, p.y, t.fit.intercept + t.fit.slope * p.x);
    }
  }
  for (const auto& p : a.median_curve) {
    out += fmt::format("median,{},{},{}\n", p.x, p.y, a.median_fit.intercept + a.median_fit.slope * p.x);
  }
  return out;
}

std::string biases_csv(const IterationRecord& rec) {
  std::string out = "target,bias,variance,correction,slope,intercept,flagged\n";
  for (const auto& t : rec.targets) {
    const std::string name = rec.kind == ScanKind::h ? std::to_string(t.qubit) : fmt::format("{}:{}", t.edge.i, t.edge.j);
    out += fmt::format("{},{},{},{},{},{},{}\n", name, t.bias, t.variance, t.correction, t.slope, t.intercept,
                       t.flagged ? 1 : 0);
  }
  return out;
}

std::string histogram_csv(std::vector<double> values, int bins = 40) {
  std::string out = "bin_lo,bin_hi,count\n";
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double lo = values.front();
  const double hi = values.back();
  if (hi == lo) return out + fmt::format("{},{},{}\n", lo, hi, values.size());
  const double width = (hi - lo) / bins;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins));
  for (double v : values) {
    const auto b = std::min(static_cast<std::size_t>((v - lo) / width), counts.size() - 1);
    ++counts[b];
  }
  for (int b = 0; b < bins; ++b) {
    out += fmt::format("{},{},{}\n", lo + b * width, lo + (b + 1) * width, counts[static_cast<std::size_t>(b)]);
  }
  return out;
}

std::string sigma_csv(const NoiseFloor& nf, const std::vector<double>& values) {
  std::string out = "target,programmed_value,sigma\n";
  for (const auto& t : nf.targets) {
    const std::string name = t.qubit != 0 ? std::to_string(t.qubit) : fmt::format("{}:{}", t.edge.i, t.edge.j);
    for (std::size_t v = 0; v < t.sigma.size(); ++v) out += fmt::format("{},{},{}\n", name, values[v], t.sigma[v]);
  }
  return out;
}

DeviceModel load_device(const std::string& path) { return io::device_from_json(io::read_json_file(path)); }

BenchmarkReport report_from_json(const json& j) {
  auto row = [](const json& r) {
    RangeSummary s;
    s.range = r.at("range").get<int>();
    s.instances = r.at("instances").get<int>();
    s.wins = r.at("wins").get<int>();
    s.losses = r.at("losses").get<int>();
    s.ties = r.at("ties").get<int>();
    s.win_probability = r.at("win_probability").get<double>();
    return s;
  };
  BenchmarkReport rep;
  rep.metric = j.at("metric").get<std::string>() == "greedy" ? Metric::greedy : Metric::elite;
  rep.elite_fraction = j.at("elite_fraction").get<double>();
  const std::string c = j.at("corrected").get<std::string>();
  rep.corrected = c == "hJ-corrected" ? Condition::hj_corrected : Condition::h_corrected;
  for (const auto& r : j.at("ranges")) rep.ranges.push_back(row(r));
  rep.pooled = row(j.at("pooled"));
  return rep;
}

std::string iteration_line(const IterationRecord& rec) {
  return fmt::format("{} k={}  T_mean={:.4f}  T_median={:.4f}  std={:.5f}  floor={:.5f}  targets={}", to_string(rec.kind),
                     rec.k, rec.t_mean, rec.t_median, rec.estimate_std, rec.predicted_floor, rec.targets.size());
}

}  // namespace

// --- calibration --------------------------------------------------------------

IterationRecord run_h_iteration(const DeviceModel& device, CalibrationTable& table, const CalibrationOptions& options,
                                IterationArtifacts* artifacts, Diagnostics* diag) {
  const int k = static_cast<int>(table.h_history.size()) + 1;
  const auto protocol =
      protocol_for(options.h, k, derive_seed(options.seed, {label_key("h"), static_cast<std::uint64_t>(k)}));
  ScanData scan = run_h_scan(device, protocol, table.cumulative_h_correction(), diag);
  ScanAnalysis analysis = analyze_scan(scan, options.estimator, diag);
  IterationRecord rec = make_record(ScanKind::h, k, analysis, options, diag);
  if (artifacts) {
    if (scan.runs >= 2) artifacts->noise = noise_floor_stats(scan, rec.temperature, options.estimator, diag);
    artifacts->scan = std::move(scan);
    artifacts->analysis = std::move(analysis);
  }
  table.h_history.push_back(rec);
  return rec;
}

IterationRecord run_j_iteration(const DeviceModel& device, CalibrationTable& table, const CalibrationOptions& options,
                                IterationArtifacts* artifacts, Diagnostics* diag) {
  const int k = static_cast<int>(table.j_history.size()) + 1;
  const auto protocol =
      protocol_for(options.j, k, derive_seed(options.seed, {label_key("J"), static_cast<std::uint64_t>(k)}));
  FieldMap fields;
  if (options.schedule == Schedule::alternating) {
    for (const auto& [q, c] : table.cumulative_h_correction()) fields.emplace(q, -c);
  }
  ScanData scan = run_j_scan(device, protocol, edge_batches(*device.graph), table.cumulative_j_correction(), fields, diag);
  ScanAnalysis analysis = analyze_scan(scan, options.estimator, diag);
  IterationRecord rec = make_record(ScanKind::j, k, analysis, options, diag);
  if (artifacts) {
    if (scan.runs >= 2) artifacts->noise = noise_floor_stats(scan, rec.temperature, options.estimator, diag);
    artifacts->scan = std::move(scan);
    artifacts->analysis = std::move(analysis);
  }
  table.j_history.push_back(rec);
  return rec;
}

bool converged(const IterationRecord& record, const CalibrationOptions& options) {
  return options.stop_on_convergence && record.predicted_floor > 0.0 &&
         record.estimate_std < options.convergence_factor * record.predicted_floor;
}

CalibrationTable calibrate(const DeviceModel& device, const CalibrationOptions& options,
                           const IterationObserver& observer, Diagnostics* diag) {
  CalibrationTable table;
  table.estimator = options.estimator;
  table.temperature_method = options.temperature_method;
  table.scaling = options.scaling;
  table.damping = options.damping;

  bool h_done = options.h.max_iterations == 0;
  bool j_done = options.j.max_iterations == 0;
  auto step_h = [&] {
    IterationArtifacts art;
    const auto rec = run_h_iteration(device, table, options, observer ? &art : nullptr, diag);
    if (observer) observer(rec, art);
    h_done = converged(rec, options) || static_cast<int>(table.h_history.size()) >= options.h.max_iterations;
  };
  auto step_j = [&] {
    IterationArtifacts art;
    const auto rec = run_j_iteration(device, table, options, observer ? &art : nullptr, diag);
    if (observer) observer(rec, art);
    j_done = converged(rec, options) || static_cast<int>(table.j_history.size()) >= options.j.max_iterations;
  };

  if (options.schedule == Schedule::sequential) {
    while (!h_done) step_h();
    while (!j_done) step_j();
  } else {
    while (!h_done || !j_done) {
      if (!h_done) step_h();
      if (!j_done) step_j();
    }
  }
  return table;
}

// --- configuration ------------------------------------------------------------

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  const auto& d = device;
  need(d.shape.rows >= 1 && d.shape.cols >= 1 && d.shape.shore >= 1, "Chimera dimensions must be >= 1");
  const int nominal = 2 * d.shape.rows * d.shape.cols * d.shape.shore;
  need(d.broken_count >= 0 && d.broken_count < nominal, fmt::format("broken_count must be in [0, {})", nominal));
  need(d.synthetic.temperature > 0.0, "device temperature must be > 0");
  need(d.synthetic.h_bias_sd >= 0.0 && d.synthetic.j_bias_sd >= 0.0, "bias sds must be >= 0");
  need(d.synthetic.run_noise_sd_h >= 0.0 && d.synthetic.run_noise_sd_j >= 0.0, "noise sds must be >= 0");
  need(d.synthetic.dac_step >= 0.0, "dac_step must be >= 0");
  need(!d.saturation_lambda || *d.saturation_lambda > 0.0, "saturation lambda must be > 0");
  need(d.sampler.burn_in_sweeps >= 0 && d.sampler.sweeps_between_reads >= 1, "invalid sampler sweeps");
  need(d.sampler.start_temperature_factor >= 1.0, "start_temperature_factor must be >= 1");
  need(d.sampler.anneal_sweeps >= 0, "anneal_sweeps must be >= 0");
  for (const auto* s : {&calibration.h, &calibration.j}) {
    need(s->points >= 2, "scans need at least 2 points");
    need(s->window > 0.0, "scan windows must be > 0");
    need(s->runs >= 1 && s->reads >= 1, "scan runs and reads must be >= 1");
    need(s->max_iterations >= 0, "iterations must be >= 0");
  }
  need(calibration.convergence_factor > 0.0, "convergence_factor must be > 0");
  need(repeat >= 1, "repeat must be >= 1");
  need(!benchmark.ranges.empty(), "benchmark needs at least one range");
  for (int r : benchmark.ranges) need(r >= 1, "ranges must be >= 1");
  need(benchmark.instances_per_range >= 1 && benchmark.gauges >= 1 && benchmark.runs >= 1 && benchmark.reads >= 1,
       "benchmark counts must be >= 1");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Section top(j, "config");
  if (!top.has("seed")) throw std::invalid_argument("a seed is mandatory (config key 'seed' or --seed)");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);

  if (const json* d = top.sub("device")) {
    Section s(*d, "device");
    std::string path;
    if (s.has("path")) {
      s.get("path", path);
      c.device.path = path;
    }
    if (s.has("chimera")) {
      std::string text;
      s.get("chimera", text);
      c.device.shape = io::parse_chimera_flag(text);
    }
    s.get("broken_count", c.device.broken_count);
    s.get("ideal", c.device.ideal);
    s.get("h_bias_sd", c.device.synthetic.h_bias_sd);
    s.get("j_bias_sd", c.device.synthetic.j_bias_sd);
    s.get("temperature", c.device.synthetic.temperature);
    s.get("run_noise_sd_h", c.device.synthetic.run_noise_sd_h);
    s.get("run_noise_sd_j", c.device.synthetic.run_noise_sd_j);
    s.get("dac_step", c.device.synthetic.dac_step);
    if (s.has("noise_mode")) {
      std::string mode;
      s.get("noise_mode", mode);
      c.device.noise_mode = parse_enum<NoiseMode>(mode, {{"per_run", NoiseMode::per_run}, {"per_read", NoiseMode::per_read}},
                                                  "noise_mode");
    }
    if (s.has("saturation_lambda")) {
      double lambda = 0.0;
      s.get("saturation_lambda", lambda);
      c.device.saturation_lambda = lambda;
    }
    s.get("burn_in_sweeps", c.device.sampler.burn_in_sweeps);
    s.get("sweeps_between_reads", c.device.sampler.sweeps_between_reads);
    s.get("start_temperature_factor", c.device.sampler.start_temperature_factor);
    s.get("anneal_sweeps", c.device.sampler.anneal_sweeps);
    s.finish();
  }

  if (const json* cal = top.sub("calibration")) {
    Section s(*cal, "calibration");
    if (const json* h = s.sub("h")) read_scan_settings(*h, "calibration.h", c.calibration.h);
    if (const json* jj = s.sub("j")) read_scan_settings(*jj, "calibration.j", c.calibration.j);
    std::string text;
    if (s.has("estimator")) {
      s.get("estimator", text);
      c.calibration.estimator =
          parse_enum<JEstimator>(text, {{"naive", JEstimator::naive}, {"exact", JEstimator::exact}}, "estimator");
    }
    if (s.has("temperature_method")) {
      s.get("temperature_method", text);
      c.calibration.temperature_method = parse_enum<TemperatureMethod>(
          text, {{"mean", TemperatureMethod::mean}, {"median", TemperatureMethod::median}}, "temperature_method");
    }
    if (s.has("scaling")) {
      s.get("scaling", text);
      c.calibration.scaling = parse_enum<BiasScaling>(
          text, {{"device", BiasScaling::device_temperature}, {"per-target", BiasScaling::per_target_temperature}},
          "scaling");
    }
    if (s.has("schedule")) {
      s.get("schedule", text);
      c.calibration.schedule = parse_enum<Schedule>(
          text, {{"sequential", Schedule::sequential}, {"alternating", Schedule::alternating}}, "schedule");
    }
    s.get("damping", c.calibration.damping);
    s.get("converge", c.calibration.stop_on_convergence);
    s.get("convergence_factor", c.calibration.convergence_factor);
    s.get("repeat", c.repeat);
    s.get("gap_label", c.gap_label);
    s.finish();
  }

  if (const json* b = top.sub("benchmark")) {
    Section s(*b, "benchmark");
    s.get("ranges", c.benchmark.ranges);
    s.get("instances", c.benchmark.instances_per_range);
    s.get("gauges", c.benchmark.gauges);
    s.get("runs", c.benchmark.runs);
    s.get("reads", c.benchmark.reads);
    s.get("correct_j", c.benchmark.correct_j);
    s.get("write_energies", c.write_energies);
    s.finish();
  }
  top.finish();

  c.calibration.seed = c.seed;
  c.benchmark.seed = c.seed;
  c.device.synthetic.seed = c.seed;
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json device{{"path", c.device.path ? json(*c.device.path) : json(nullptr)},
              {"chimera", shape_text(c.device.shape)},
              {"broken_count", c.device.broken_count},
              {"ideal", c.device.ideal},
              {"h_bias_sd", c.device.synthetic.h_bias_sd},
              {"j_bias_sd", c.device.synthetic.j_bias_sd},
              {"temperature", c.device.synthetic.temperature},
              {"run_noise_sd_h", c.device.synthetic.run_noise_sd_h},
              {"run_noise_sd_j", c.device.synthetic.run_noise_sd_j},
              {"dac_step", c.device.synthetic.dac_step},
              {"noise_mode", c.device.noise_mode == NoiseMode::per_run ? "per_run" : "per_read"},
              {"saturation_lambda", c.device.saturation_lambda ? json(*c.device.saturation_lambda) : json(nullptr)},
              {"burn_in_sweeps", c.device.sampler.burn_in_sweeps},
              {"sweeps_between_reads", c.device.sampler.sweeps_between_reads},
              {"start_temperature_factor", c.device.sampler.start_temperature_factor},
              {"anneal_sweeps", c.device.sampler.anneal_sweeps}};
  const auto& cal = c.calibration;
  json calibration{{"h", scan_settings_json(cal.h)},
                   {"j", scan_settings_json(cal.j)},
                   {"estimator", to_string(cal.estimator)},
                   {"temperature_method", to_string(cal.temperature_method)},
                   {"scaling", to_string(cal.scaling)},
                   {"schedule", cal.schedule == Schedule::sequential ? "sequential" : "alternating"},
                   {"damping", cal.damping},
                   {"converge", cal.stop_on_convergence},
                   {"convergence_factor", cal.convergence_factor},
                   {"repeat", c.repeat},
                   {"gap_label", c.gap_label}};
  json benchmark{{"ranges", c.benchmark.ranges},       {"instances", c.benchmark.instances_per_range},
                 {"gauges", c.benchmark.gauges},       {"runs", c.benchmark.runs},
                 {"reads", c.benchmark.reads},         {"correct_j", c.benchmark.correct_j},
                 {"write_energies", c.write_energies}};
  return json{{"seed", c.seed},
              {"output_dir", c.output_dir},
              {"device", device},
              {"calibration", calibration},
              {"benchmark", benchmark}};
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  return io::hash_json(j);
}

std::string default_output_dir() {
  const char* env = std::getenv("QABIAS_OUT");
  return env && *env ? std::string(env) : std::string("qabias-out");
}

// --- commands -----------------------------------------------------------------

DeviceModel build_device(const DeviceSpec& spec, std::uint64_t seed) {
  DeviceModel device;
  if (spec.path) {
    device = load_device(*spec.path);
  } else {
    const auto broken = choose_broken(spec.shape, spec.broken_count, derive_seed(seed, {label_key("broken")}));
    auto graph = build_chimera(spec.shape, broken);
    if (spec.ideal) {
      device = ideal_device(std::move(graph), spec.synthetic.temperature, seed);
    } else {
      SyntheticDeviceOptions opts = spec.synthetic;
      opts.seed = seed;
      device = make_synthetic_device(std::move(graph), opts);
    }
    device.noise_mode = spec.noise_mode;
    if (spec.saturation_lambda) device.saturation = {true, *spec.saturation_lambda};
    device.sampler = spec.sampler;
  }
  device.validate();
  return device;
}

fs::path cmd_make_device(const ExperimentConfig& config, std::ostream& log) {
  DeviceSpec spec = config.device;
  spec.path.reset();
  const DeviceModel device = build_device(spec, config.seed);
  const fs::path out = fs::path(config.output_dir) / "device.json";
  io::write_json_file(out, io::stamped(io::to_json(device), {config_hash(config), config.seed}), config.force);

  std::vector<double> hb, jb;
  for (const auto& [q, v] : device.h_bias) hb.push_back(v);
  for (const auto& [e, v] : device.j_bias) jb.push_back(v);
  log << fmt::format("device: {} active qubits, {} couplers, h bias sd {:.4f}, J bias sd {:.4f}\n",
                     device.graph->active().size(), device.graph->edges().size(), stats::stddev(hb),
                     stats::stddev(jb));
  log << "wrote " << out.string() << "\n";
  return out;
}

std::vector<fs::path> cmd_calibrate(const ExperimentConfig& config, const std::string& device_path, std::ostream& log) {
  const DeviceModel device = load_device(device_path);
  const io::Provenance prov{config_hash(config), config.seed};
  std::vector<fs::path> tables;
  std::vector<CalibrationTable> results;

  for (int rep = 0; rep < config.repeat; ++rep) {
    CalibrationOptions options = config.calibration;
    options.seed = rep == 0 ? config.seed : derive_seed(config.seed, {label_key("repeat"), static_cast<std::uint64_t>(rep)});
    fs::path dir = fs::path(config.output_dir) / "calibration";
    if (config.repeat > 1) dir /= fmt::format("rep{}", rep + 1);

    Diagnostics diag;
    auto observer = [&](const IterationRecord& rec, const IterationArtifacts& art) {
      const std::string stem = fmt::format("{}{}", rec.kind == ScanKind::h ? "h" : "j", rec.k);
      io::write_text_file(dir / (stem + "_scan.csv"), io::csv_stamp(prov) + io::scan_to_csv(art.scan), config.force);
      io::write_json_file(dir / (stem + "_scan.json"), io::stamped(io::scan_metadata(art.scan), prov), config.force);
      io::write_text_file(dir / (stem + "_alpha.csv"), io::csv_stamp(prov) + alpha_csv(art.analysis), config.force);
      io::write_text_file(dir / (stem + "_biases.csv"), io::csv_stamp(prov) + biases_csv(rec), config.force);
      std::vector<double> biases;
      for (const auto& t : rec.targets) {
        if (!t.flagged) biases.push_back(t.bias);
      }
      io::write_text_file(dir / (stem + "_bias_hist.csv"), io::csv_stamp(prov) + histogram_csv(biases), config.force);
      if (art.noise) {
        io::write_text_file(dir / (stem + "_sigma.csv"),
                            io::csv_stamp(prov) + sigma_csv(*art.noise, art.scan.programmed_values), config.force);
        std::vector<double> means;
        for (const auto& t : art.noise->targets) means.push_back(t.mean_sigma);
        io::write_text_file(dir / (stem + "_noise_hist.csv"), io::csv_stamp(prov) + histogram_csv(means), config.force);
        log << fmt::format("{}  noise floor={:.5f}\n", iteration_line(rec), art.noise->grand_mean);
      } else {
        log << iteration_line(rec) << "\n";
      }
    };
    CalibrationTable table = calibrate(device, options, observer, &diag);

    json doc = io::to_json(table);
    // Content hashes rather than paths keep replays into another directory byte-identical.
    doc["device_hash"] = io::hash_json(io::to_json(device));
    doc["calibration_seed"] = options.seed;
    doc["diagnostics"] = {{"clamped", diag.clamped}, {"messages", diag.messages.size()}};
    const fs::path path = dir / "table.json";
    io::write_json_file(path, io::stamped(doc, prov), config.force);
    if (diag.clamped > 0 || !diag.messages.empty()) {
      log << fmt::format("diagnostics: {} clamped probabilities, {} notes\n", diag.clamped, diag.messages.size());
    }
    log << "wrote " << path.string() << "\n";
    tables.push_back(path);
    results.push_back(std::move(table));
  }

  if (config.repeat > 1) {
    json pairs = json::array();
    for (std::size_t a = 0; a < results.size(); ++a) {
      for (std::size_t b = a + 1; b < results.size(); ++b) {
        if (results[a].h_history.empty()) continue;
        const double rho = persistence_correlation(results[a], results[b]);
        pairs.push_back({{"a", a + 1}, {"b", b + 1}, {"correlation", rho}});
        log << fmt::format("persistence rep{} vs rep{} ({}): rho = {:.4f}\n", a + 1, b + 1,
                           config.gap_label.empty() ? "no gap label" : config.gap_label, rho);
      }
    }
    const fs::path path = fs::path(config.output_dir) / "calibration" / "persistence.json";
    io::write_json_file(path, io::stamped(json{{"gap_label", config.gap_label}, {"pairs", pairs}}, prov), config.force);
    log << "wrote " << path.string() << "\n";
  }
  return tables;
}

fs::path cmd_benchmark(const ExperimentConfig& config, const std::string& device_path,
                       const std::optional<std::string>& table_path, std::ostream& log) {
  const DeviceModel device = load_device(device_path);
  CalibrationTable table;
  json table_hash = nullptr;
  if (table_path) {
    const json tj = io::read_json_file(*table_path);
    table = io::table_from_json(tj);
    table_hash = io::hash_json(tj);
  }
  BenchmarkOptions options = config.benchmark;
  options.seed = config.seed;
  const auto records = run_benchmark(device, *device.graph, options, &table);

  std::vector<BenchmarkReport> reports{summarize(records, Metric::greedy), summarize(records, Metric::elite)};
  std::size_t clamped = 0;
  for (const auto& r : records) clamped += r.clamped;
  const io::Provenance prov{config_hash(config), config.seed};
  json doc{{"device_hash", io::hash_json(io::to_json(device))},
           {"table_hash", table_hash},
           {"protocol",
            {{"ranges", options.ranges},
             {"instances", options.instances_per_range},
             {"gauges", options.gauges},
             {"runs", options.runs},
             {"reads", options.reads},
             {"correct_j", options.correct_j}}},
           {"clamped", clamped},
           {"reports", {io::to_json(reports[0]), io::to_json(reports[1])}}};
  const fs::path dir = fs::path(config.output_dir) / "benchmark";
  const fs::path path = dir / "report.json";
  const std::string text = format_table(reports);
  io::write_json_file(path, io::stamped(doc, prov), config.force);
  io::write_text_file(dir / "report.txt", text, config.force);
  if (config.write_energies) {
    io::write_text_file(dir / "energies.csv", io::csv_stamp(prov) + io::records_to_csv(records), config.force);
  }
  log << text << "wrote " << path.string() << "\n";
  return path;
}

int cmd_verify(const ExperimentConfig& config, bool mutate_alpha, std::ostream& out) {
  VerifyOptions options;
  options.seed = config.seed;
  options.mutate_alpha = mutate_alpha;
  const auto results = run_oracle_suite(options);
  json doc = to_json(results);
  out << doc.dump(2) << "\n";
  for (const auto& r : results) {
    if (!r.passed) return kExitOracle;
  }
  return kExitOk;
}

void cmd_report(const std::string& path, std::ostream& out) {
  const json j = io::read_json_file(path);
  if (j.contains("reports")) {
    std::vector<BenchmarkReport> reports;
    for (const auto& r : j.at("reports")) reports.push_back(report_from_json(r));
    out << format_table(reports);
    for (const auto& r : reports) {
      out << fmt::format("{}: {} wins, {} losses, {} ties over {} instances\n", to_string(r.metric), r.pooled.wins,
                         r.pooled.losses, r.pooled.ties, r.pooled.instances);
    }
  } else if (j.contains("h_history")) {
    const CalibrationTable t = io::table_from_json(j);
    out << fmt::format("estimator {}, temperature {}, scaling {}, damping {}\n", to_string(t.estimator),
                       to_string(t.temperature_method), to_string(t.scaling), t.damping ? "on" : "off");
    for (const auto& rec : t.h_history) out << iteration_line(rec) << "\n";
    for (const auto& rec : t.j_history) out << iteration_line(rec) << "\n";
  } else if (j.contains("h_bias")) {
    const DeviceModel d = io::device_from_json(j);
    out << fmt::format("device: {} nominal qubits, {} active, {} couplers, seed {}\n", d.graph->nominal_count(),
                       d.graph->active().size(), d.graph->edges().size(), d.master_seed);
  } else {
    throw std::invalid_argument(fmt::format("{} is not a report, table or device file", path));
  }
}

}  // namespace qabias
