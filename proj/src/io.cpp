#include "qabias/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <sstream>

#include <fmt/format.h>

namespace qabias::io {

namespace {

int parse_int(const std::string& text, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("{} '{}' is not an integer", what, text));
  }
  if (used != text.size() || text.empty() || text[0] == '+' || (text.size() > 1 && text[0] == '0')) {
    throw std::invalid_argument(fmt::format("{} '{}' is not a canonical integer", what, text));
  }
  return v;
}

double parse_double(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("'{}' is not a number", text));
  }
  if (used != text.size()) throw std::invalid_argument(fmt::format("'{}' is not a number", text));
  return v;
}

// JSON has no NaN; non-finite values travel as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json field_map(const FieldMap& m) {
  json out = json::object();
  for (const auto& [q, v] : m) out[std::to_string(q)] = v;
  return out;
}

json coupling_map(const CouplingMap& m) {
  json out = json::object();
  for (const auto& [e, v] : m) out[e.key()] = v;
  return out;
}

FieldMap field_map(const json& j) {
  FieldMap out;
  for (const auto& [key, v] : j.items()) out.emplace(parse_int(key, "qubit"), v.get<double>());
  return out;
}

CouplingMap coupling_map(const json& j) {
  CouplingMap out;
  for (const auto& [key, v] : j.items()) out.emplace(parse_edge_key(key), v.get<double>());
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

constexpr char kCountMagic[] = "QBCOUNT1";

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t at = 0;

  std::uint8_t u8() {
    if (at >= bytes.size()) throw std::invalid_argument("truncated count file");
    return bytes[at++];
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(u8()) << (8 * b);
    return v;
  }
};

}  // namespace

Edge parse_edge_key(const std::string& key) {
  const auto comma = key.find(',');
  if (comma == std::string::npos) throw std::invalid_argument(fmt::format("coupler key '{}' is not 'i,j'", key));
  const int i = parse_int(key.substr(0, comma), "qubit");
  const int j = parse_int(key.substr(comma + 1), "qubit");
  if (i >= j) throw std::invalid_argument(fmt::format("coupler key '{}' must list the smaller qubit first", key));
  return Edge(i, j);
}

json to_json(const IsingInstance& instance) {
  return json{{"n", instance.size()}, {"h", field_map(instance.fields())}, {"J", coupling_map(instance.couplings())}};
}

IsingInstance instance_from_json(const json& j, std::shared_ptr<const CouplingGraph> topology) {
  if (!j.is_object() || !j.contains("n")) throw std::invalid_argument("instance JSON needs an 'n' field");
  const int n = j.at("n").get<int>();
  FieldMap h = j.contains("h") ? field_map(j.at("h")) : FieldMap{};
  CouplingMap couplings = j.contains("J") ? coupling_map(j.at("J")) : CouplingMap{};
  if (topology) {
    if (topology->nominal_count() != n) {
      throw std::invalid_argument(fmt::format("instance has n = {} but the graph has {} qubits", n, topology->nominal_count()));
    }
    return IsingInstance(std::move(topology), std::move(h), std::move(couplings));
  }
  return IsingInstance(n, std::move(h), std::move(couplings));
}

std::string hash_json(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : j.dump()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string instance_id(const IsingInstance& instance) { return hash_json(to_json(instance)); }

json to_json(const GraphConfig& config) {
  return json{{"rows", config.shape.rows},
              {"cols", config.shape.cols},
              {"shore", config.shape.shore},
              {"broken", std::vector<int>(config.broken.begin(), config.broken.end())}};
}

GraphConfig graph_config_from_json(const json& j) {
  GraphConfig c;
  c.shape.rows = j.at("rows").get<int>();
  c.shape.cols = j.at("cols").get<int>();
  c.shape.shore = j.value("shore", 4);
  if (j.contains("broken")) {
    for (int q : j.at("broken").get<std::vector<int>>()) c.broken.insert(q);
  }
  return c;
}

ChimeraShape parse_chimera_flag(const std::string& text) {
  static const std::regex pattern(R"(^(\d+)x(\d+)(,shore=(\d+))?$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) {
    throw std::invalid_argument(fmt::format("--chimera '{}' is not of the form MxN or MxN,shore=K", text));
  }
  ChimeraShape s{std::stoi(m[1].str()), std::stoi(m[2].str()), m[4].matched ? std::stoi(m[4].str()) : 4};
  if (s.rows < 1 || s.cols < 1 || s.shore < 1) throw std::invalid_argument("Chimera dimensions must be >= 1");
  return s;
}

GraphConfig graph_config_of(const CouplingGraph& graph) {
  if (!graph.shape()) throw std::invalid_argument("graph is not a Chimera graph");
  GraphConfig c;
  c.shape = *graph.shape();
  for (int q : graph.broken()) c.broken.insert(q);
  return c;
}

json to_json(const DeviceModel& d) {
  if (!d.graph) throw std::invalid_argument("device model has no graph");
  json graph;
  if (d.graph->shape()) {
    graph = to_json(graph_config_of(*d.graph));
  } else {
    json edges = json::array();
    for (const Edge& e : d.graph->edges()) edges.push_back({e.i, e.j});
    graph = json{{"nominal", d.graph->nominal_count()}, {"active", d.graph->active()}, {"edges", edges}};
  }
  return json{{"graph", graph},
              {"h_bias", field_map(d.h_bias)},
              {"j_bias", coupling_map(d.j_bias)},
              {"qubit_temperature", field_map(d.qubit_temperature)},
              {"coupler_temperature", coupling_map(d.coupler_temperature)},
              {"run_noise_sd_h", d.run_noise_sd_h},
              {"run_noise_sd_j", d.run_noise_sd_j},
              {"dac_step", d.dac_step},
              {"noise_mode", d.noise_mode == NoiseMode::per_run ? "per_run" : "per_read"},
              {"saturation", {{"enabled", d.saturation.enabled}, {"lambda", d.saturation.lambda}}},
              {"sampler",
               {{"burn_in_sweeps", d.sampler.burn_in_sweeps},
                {"sweeps_between_reads", d.sampler.sweeps_between_reads},
                {"start_temperature_factor", d.sampler.start_temperature_factor},
                {"anneal_sweeps", d.sampler.anneal_sweeps}}},
              {"master_seed", d.master_seed}};
}

DeviceModel device_from_json(const json& j) {
  DeviceModel d;
  const json& g = j.at("graph");
  if (g.contains("rows")) {
    const GraphConfig c = graph_config_from_json(g);
    d.graph = build_chimera(c.shape, c.broken);
  } else {
    std::vector<Edge> edges;
    for (const auto& e : g.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    d.graph = std::make_shared<const CouplingGraph>(g.at("nominal").get<int>(), g.at("active").get<std::vector<int>>(),
                                                    std::move(edges));
  }
  d.h_bias = field_map(j.at("h_bias"));
  d.j_bias = coupling_map(j.at("j_bias"));
  d.qubit_temperature = field_map(j.at("qubit_temperature"));
  d.coupler_temperature = coupling_map(j.at("coupler_temperature"));
  d.run_noise_sd_h = j.value("run_noise_sd_h", 0.0);
  d.run_noise_sd_j = j.value("run_noise_sd_j", 0.0);
  d.dac_step = j.value("dac_step", 0.0);
  const std::string mode = j.value("noise_mode", std::string("per_run"));
  if (mode == "per_run") {
    d.noise_mode = NoiseMode::per_run;
  } else if (mode == "per_read") {
    d.noise_mode = NoiseMode::per_read;
  } else {
    throw std::invalid_argument(fmt::format("unknown noise_mode '{}'", mode));
  }
  if (j.contains("saturation")) {
    d.saturation.enabled = j["saturation"].value("enabled", false);
    d.saturation.lambda = j["saturation"].value("lambda", 1.5);
  }
  if (j.contains("sampler")) {
    d.sampler.burn_in_sweeps = j["sampler"].value("burn_in_sweeps", 1000);
    d.sampler.sweeps_between_reads = j["sampler"].value("sweeps_between_reads", 1);
    d.sampler.start_temperature_factor = j["sampler"].value("start_temperature_factor", 1.0);
    d.sampler.anneal_sweeps = j["sampler"].value("anneal_sweeps", 0);
  }
  d.master_seed = j.at("master_seed").get<std::uint64_t>();
  d.validate();
  return d;
}

json scan_metadata(const ScanData& scan) {
  json targets = json::array();
  for (const auto& q : scan.qubits) targets.push_back({{"target", std::to_string(q.qubit)}, {"correction", q.correction}});
  for (const auto& c : scan.couplers) targets.push_back({{"target", c.edge.key()}, {"correction", c.correction}});
  return json{{"kind", to_string(scan.kind)},
              {"iteration", scan.iteration},
              {"runs", scan.runs},
              {"reads_per_run", scan.reads_per_run},
              {"device_seed", scan.device_seed},
              {"stream", scan.stream},
              {"programmed_values", scan.programmed_values},
              {"targets", targets}};
}

std::string scan_to_csv(const ScanData& scan) {
  const double reads = static_cast<double>(scan.reads_per_run);
  std::string out;
  if (scan.kind == ScanKind::h) {
    out += "kind,iteration,target,programmed_value,run_id,p_up\n";
    for (const auto& q : scan.qubits) {
      for (std::size_t v = 0; v < scan.programmed_values.size(); ++v) {
        for (std::size_t r = 0; r < static_cast<std::size_t>(scan.runs); ++r) {
          out += fmt::format("h,{},{},{},{},{}\n", scan.iteration, q.qubit, scan.programmed_values[v], r,
                             q.up_counts[v][r] / reads);
        }
      }
    }
  } else {
    // Coupler targets are written "i:j" to keep the CSV comma-separated.
    out += "kind,iteration,target,programmed_value,run_id,p_uu,p_ud,p_du,p_dd\n";
    for (const auto& c : scan.couplers) {
      for (std::size_t v = 0; v < scan.programmed_values.size(); ++v) {
        for (std::size_t r = 0; r < static_cast<std::size_t>(scan.runs); ++r) {
          const auto& k = c.counts[v][r];
          out += fmt::format("J,{},{}:{},{},{},{},{},{},{}\n", scan.iteration, c.edge.i, c.edge.j,
                             scan.programmed_values[v], r, k[0] / reads, k[2] / reads, k[1] / reads, k[3] / reads);
        }
      }
    }
  }
  return out;
}

ScanData scan_from_csv(const std::string& csv, const json& meta) {
  ScanData scan;
  const std::string kind = meta.at("kind").get<std::string>();
  if (kind != "h" && kind != "J") throw std::invalid_argument(fmt::format("unknown scan kind '{}'", kind));
  scan.kind = kind == "h" ? ScanKind::h : ScanKind::j;
  scan.iteration = meta.at("iteration").get<int>();
  scan.runs = meta.at("runs").get<int>();
  scan.reads_per_run = meta.at("reads_per_run").get<int>();
  scan.device_seed = meta.at("device_seed").get<std::uint64_t>();
  scan.stream = meta.at("stream").get<std::uint64_t>();
  scan.programmed_values = meta.at("programmed_values").get<std::vector<double>>();
  const auto values = scan.programmed_values.size();
  const auto runs = static_cast<std::size_t>(scan.runs);

  std::map<std::string, std::size_t> slot;
  for (const auto& t : meta.at("targets")) {
    const std::string name = t.at("target").get<std::string>();
    const double corr = t.at("correction").get<double>();
    if (scan.kind == ScanKind::h) {
      slot.emplace(name, scan.qubits.size());
      scan.qubits.push_back({parse_int(name, "qubit"), corr, std::vector<std::vector<std::uint32_t>>(values, std::vector<std::uint32_t>(runs))});
    } else {
      const Edge e = parse_edge_key(name);
      slot.emplace(fmt::format("{}:{}", e.i, e.j), scan.couplers.size());
      scan.couplers.push_back(
          {e, corr, std::vector<std::vector<std::array<std::uint32_t, 4>>>(values, std::vector<std::array<std::uint32_t, 4>>(runs))});
    }
  }

  const double reads = static_cast<double>(scan.reads_per_run);
  auto count = [&](const std::string& cell) {
    const double p = parse_double(cell);
    if (p < 0.0 || p > 1.0) throw std::invalid_argument(fmt::format("probability {} outside [0, 1]", p));
    return static_cast<std::uint32_t>(std::llround(p * reads));
  };

  std::istringstream in(csv);
  std::string line;
  bool header = true;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto cells = split(line, ',');
    const std::size_t width = scan.kind == ScanKind::h ? 6 : 9;
    if (cells.size() != width) throw std::invalid_argument(fmt::format("scan CSV row has {} cells: {}", cells.size(), line));
    const auto t = slot.find(cells[2]);
    if (t == slot.end()) throw std::invalid_argument(fmt::format("scan CSV names unknown target {}", cells[2]));
    const double x = parse_double(cells[3]);
    const auto vit = std::find(scan.programmed_values.begin(), scan.programmed_values.end(), x);
    if (vit == scan.programmed_values.end()) throw std::invalid_argument(fmt::format("unknown programmed value {}", x));
    const auto v = static_cast<std::size_t>(vit - scan.programmed_values.begin());
    const auto r = static_cast<std::size_t>(parse_int(cells[4], "run_id"));
    if (r >= runs) throw std::invalid_argument(fmt::format("run_id {} out of range", r));
    if (scan.kind == ScanKind::h) {
      scan.qubits[t->second].up_counts[v][r] = count(cells[5]);
    } else {
      // Columns are uu, ud, du, dd; storage order is uu, du, ud, dd.
      scan.couplers[t->second].counts[v][r] = {count(cells[5]), count(cells[7]), count(cells[6]), count(cells[8])};
    }
    ++rows;
  }
  const std::size_t targets = scan.kind == ScanKind::h ? scan.qubits.size() : scan.couplers.size();
  if (rows != targets * values * runs) {
    throw std::invalid_argument(fmt::format("scan CSV has {} rows, expected {}", rows, targets * values * runs));
  }
  scan.validate();
  return scan;
}

namespace {

json to_json(const IterationRecord& it) {
  json targets = json::array();
  for (const auto& t : it.targets) {
    json row{{"bias", number(t.bias)},           {"variance", number(t.variance)}, {"correction", t.correction},
             {"slope", number(t.slope)},         {"intercept", number(t.intercept)}, {"flagged", t.flagged}};
    if (it.kind == ScanKind::h) {
      row["qubit"] = t.qubit;
    } else {
      row["edge"] = t.edge.key();
    }
    targets.push_back(std::move(row));
  }
  return json{{"kind", to_string(it.kind)},
              {"k", it.k},
              {"t_mean", number(it.t_mean)},
              {"t_median", number(it.t_median)},
              {"temperature", number(it.temperature)},
              {"estimate_std", number(it.estimate_std)},
              {"predicted_floor", number(it.predicted_floor)},
              {"prior_variance", number(it.prior_variance)},
              {"targets", targets}};
}

IterationRecord iteration_from_json(const json& j) {
  IterationRecord it;
  it.kind = j.at("kind").get<std::string>() == "h" ? ScanKind::h : ScanKind::j;
  it.k = j.at("k").get<int>();
  it.t_mean = number(j.at("t_mean"));
  it.t_median = number(j.at("t_median"));
  it.temperature = number(j.at("temperature"));
  it.estimate_std = number(j.at("estimate_std"));
  it.predicted_floor = number(j.at("predicted_floor"));
  it.prior_variance = number(j.at("prior_variance"));
  for (const auto& row : j.at("targets")) {
    TargetEstimate t;
    if (it.kind == ScanKind::h) {
      t.qubit = row.at("qubit").get<int>();
    } else {
      t.edge = parse_edge_key(row.at("edge").get<std::string>());
    }
    t.bias = number(row.at("bias"));
    t.variance = number(row.at("variance"));
    t.correction = row.at("correction").get<double>();
    t.slope = number(row.at("slope"));
    t.intercept = number(row.at("intercept"));
    t.flagged = row.at("flagged").get<bool>();
    it.targets.push_back(t);
  }
  return it;
}

}  // namespace

json to_json(const CalibrationTable& table) {
  json h = json::array();
  json j = json::array();
  for (const auto& it : table.h_history) h.push_back(to_json(it));
  for (const auto& it : table.j_history) j.push_back(to_json(it));
  return json{{"estimator", to_string(table.estimator)},
              {"temperature_method", to_string(table.temperature_method)},
              {"scaling", to_string(table.scaling)},
              {"damping", table.damping},
              {"h_history", h},
              {"j_history", j}};
}

CalibrationTable table_from_json(const json& j) {
  CalibrationTable t;
  t.estimator = j.at("estimator").get<std::string>() == "naive" ? JEstimator::naive : JEstimator::exact;
  t.temperature_method = j.at("temperature_method").get<std::string>() == "mean" ? TemperatureMethod::mean
                                                                                 : TemperatureMethod::median;
  t.scaling = j.at("scaling").get<std::string>() == "device" ? BiasScaling::device_temperature
                                                             : BiasScaling::per_target_temperature;
  t.damping = j.at("damping").get<bool>();
  for (const auto& it : j.at("h_history")) t.h_history.push_back(iteration_from_json(it));
  for (const auto& it : j.at("j_history")) t.j_history.push_back(iteration_from_json(it));
  return t;
}

json to_json(const BenchmarkReport& report) {
  auto row = [](const RangeSummary& s) {
    return json{{"range", s.range},   {"instances", s.instances}, {"wins", s.wins},
                {"losses", s.losses}, {"ties", s.ties},           {"win_probability", s.win_probability}};
  };
  json ranges = json::array();
  for (const auto& s : report.ranges) ranges.push_back(row(s));
  return json{{"metric", to_string(report.metric)},
              {"elite_fraction", report.elite_fraction},
              {"corrected", to_string(report.corrected)},
              {"ranges", ranges},
              {"pooled", row(report.pooled)}};
}

std::string records_to_csv(const std::vector<EnergyRecord>& records) {
  std::string out = "instance_id,range,instance_index,condition,gauge,run,read,energy\n";
  for (const auto& rec : records) {
    std::size_t k = 0;
    for (int g = 0; g < rec.gauges; ++g) {
      for (int r = 0; r < rec.runs; ++r) {
        for (int s = 0; s < rec.reads; ++s) {
          out += fmt::format("{},{},{},{},{},{},{},{}\n", rec.instance_id, rec.range, rec.instance_index,
                             to_string(rec.condition), g, r, s, rec.energies.at(k++));
        }
      }
    }
  }
  return out;
}

std::string samples_to_csv(const std::vector<SampleSet>& sets) {
  std::string out = "run_id,read_id,spins\n";
  for (const auto& set : sets) {
    for (std::size_t r = 0; r < set.reads.size(); ++r) {
      std::string spins;
      spins.reserve(set.reads[r].spins.size());
      for (Spin s : set.reads[r].spins) spins.push_back(s > 0 ? '+' : '-');
      out += fmt::format("{},{},{}\n", set.run_id, r, spins);
    }
  }
  return out;
}

std::vector<std::uint8_t> counts_to_binary(const std::vector<RunCounts>& runs) {
  std::vector<std::uint8_t> out(kCountMagic, kCountMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(runs.size()));
  for (const auto& run : runs) {
    put_u32(out, static_cast<std::uint32_t>(run.run_id));
    put_u32(out, static_cast<std::uint32_t>(run.components.size()));
    for (const auto& piece : run.components) {
      if (piece.qubits.empty() || piece.qubits.size() > 2) throw std::invalid_argument("count pieces hold one or two qubits");
      out.push_back(static_cast<std::uint8_t>(piece.qubits.size()));
      for (int q : piece.qubits) put_u32(out, static_cast<std::uint32_t>(q));
      for (std::size_t k = 0; k < (std::size_t{1} << piece.qubits.size()); ++k) put_u32(out, piece.counts[k]);
    }
  }
  return out;
}

std::vector<RunCounts> counts_from_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || !std::equal(bytes.begin(), bytes.begin() + 8, kCountMagic)) {
    throw std::invalid_argument("not a count file (bad magic)");
  }
  Reader in{bytes, 8};
  std::vector<RunCounts> out(in.u32());
  for (auto& run : out) {
    run.run_id = static_cast<int>(in.u32());
    run.components.resize(in.u32());
    for (auto& piece : run.components) {
      const std::uint8_t size = in.u8();
      if (size < 1 || size > 2) throw std::invalid_argument("count piece of unsupported size");
      for (int b = 0; b < size; ++b) piece.qubits.push_back(static_cast<int>(in.u32()));
      for (std::size_t k = 0; k < (std::size_t{1} << size); ++k) piece.counts[k] = in.u32();
    }
  }
  if (in.at != bytes.size()) throw std::invalid_argument("trailing bytes in count file");
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text, bool force) {
  std::error_code ec;
  if (std::filesystem::exists(path, ec) && !force) {
    throw IoError(fmt::format("{} exists; pass --force to overwrite", path.string()));
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", path.parent_path().string(), ec.message()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out.flush()) throw IoError(fmt::format("write to {} failed", path.string()));
}

void write_json_file(const std::filesystem::path& path, const json& j, bool force) {
  write_text_file(path, j.dump(2) + "\n", force);
}

void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, bool force) {
  write_text_file(path, std::string(bytes.begin(), bytes.end()), force);
}

json stamped(json j, const Provenance& provenance) {
  j["provenance"] = {{"config_hash", provenance.config_hash}, {"seed", provenance.seed}};
  return j;
}

std::string csv_stamp(const Provenance& provenance) {
  return fmt::format("# config_hash={},seed={}\n", provenance.config_hash, provenance.seed);
}

}  // namespace qabias::io
