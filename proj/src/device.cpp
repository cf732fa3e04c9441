#include "qabias/device.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "qabias/rng.hpp"

namespace qabias {

namespace {

constexpr std::uint64_t kNoiseKey = 0x6e6f697365ULL;   // "noise"
constexpr std::uint64_t kSampleKey = 0x73616d706cULL;  // "sampl"

std::uint64_t run_seed(const DeviceModel& model, const SampleRequest& request, int run) {
  return derive_seed(model.master_seed, {request.stream, static_cast<std::uint64_t>(run)});
}

void check_request(const SampleRequest& request) {
  if (request.runs < 1 || request.reads_per_run < 1) {
    throw std::invalid_argument(
        fmt::format("runs and reads must be >= 1 (got {} x {})", request.runs, request.reads_per_run));
  }
}

void check_programmed(const DeviceModel& model, const IsingInstance& programmed) {
  if (!model.graph) throw std::invalid_argument("device model has no graph");
  const auto& topo = programmed.topology();
  if (!topo || (topo != model.graph && !(*topo == *model.graph))) {
    throw std::invalid_argument("programmed instance does not match the device graph");
  }
}

/// Pieces of the active qubit set joined by programmed couplers, ordered by
/// smallest member.
std::vector<std::vector<int>> components(const IsingInstance& programmed) {
  const auto& graph = *programmed.topology();
  std::vector<int> parent(static_cast<std::size_t>(graph.nominal_count()) + 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      auto& p = parent[static_cast<std::size_t>(x)];
      p = parent[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  };
  for (const auto& [e, value] : programmed.couplings()) {
    const int a = find(e.i);
    const int b = find(e.j);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
  std::vector<std::vector<int>> groups;
  std::vector<int> slot(parent.size(), -1);
  for (int q : graph.active()) {
    const int root = find(q);
    auto& s = slot[static_cast<std::size_t>(root)];
    if (s < 0) {
      s = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(s)].push_back(q);
  }
  return groups;
}

/// Boltzmann weights of a one- or two-qubit piece under reduced parameters.
std::array<double, 4> piece_probabilities(const DenseIsing& reduced, const std::vector<int>& qubits) {
  std::array<double, 4> p{};
  if (qubits.size() == 1) {
    const double h = reduced.h[static_cast<std::size_t>(qubits[0] - 1)];
    // p(up) = e^{-h} / (e^{h} + e^{-h})
    p[0] = 1.0 / (1.0 + std::exp(2.0 * h));
    p[1] = 1.0 - p[0];
    return p;
  }
  const int a = qubits[0] - 1;
  const int b = qubits[1] - 1;
  double j = 0.0;
  for (std::size_t k = reduced.row_start[static_cast<std::size_t>(a)];
       k < reduced.row_start[static_cast<std::size_t>(a) + 1]; ++k) {
    if (reduced.neighbor[k] == b) j = reduced.weight[k];
  }
  const double ha = reduced.h[static_cast<std::size_t>(a)];
  const double hb = reduced.h[static_cast<std::size_t>(b)];
  std::array<double, 4> e{};
  for (int state = 0; state < 4; ++state) {
    const double sa = (state & 1) ? -1.0 : 1.0;
    const double sb = (state & 2) ? -1.0 : 1.0;
    e[static_cast<std::size_t>(state)] = ha * sa + hb * sb + j * sa * sb;
  }
  const double e_min = *std::min_element(e.begin(), e.end());
  double z = 0.0;
  for (int s = 0; s < 4; ++s) {
    p[static_cast<std::size_t>(s)] = std::exp(-(e[static_cast<std::size_t>(s)] - e_min));
    z += p[static_cast<std::size_t>(s)];
  }
  for (double& v : p) v /= z;
  return p;
}

int draw_outcome(const std::array<double, 4>& p, std::size_t outcomes, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  for (std::size_t k = 0; k + 1 < outcomes; ++k) {
    if (u < p[k]) return static_cast<int>(k);
    u -= p[k];
  }
  return static_cast<int>(outcomes - 1);
}

void write_outcome(std::vector<Spin>& spins, const std::vector<int>& qubits, int outcome) {
  for (std::size_t b = 0; b < qubits.size(); ++b) {
    spins[static_cast<std::size_t>(qubits[b] - 1)] = ((outcome >> b) & 1) ? -1 : 1;
  }
}

std::uint32_t binomial(std::uint32_t n, double p, Rng& rng) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<std::uint32_t> dist(n, p);
  return dist(rng);
}

/// Multinomial draw by sequential conditional binomials.
std::array<std::uint32_t, 4> multinomial(std::uint32_t n, const std::array<double, 4>& p, std::size_t outcomes,
                                         Rng& rng) {
  std::array<std::uint32_t, 4> c{};
  double rest = 1.0;
  std::uint32_t left = n;
  for (std::size_t k = 0; k + 1 < outcomes; ++k) {
    const double q = rest > 0.0 ? std::clamp(p[k] / rest, 0.0, 1.0) : 0.0;
    c[k] = binomial(left, q, rng);
    left -= c[k];
    rest -= p[k];
  }
  c[outcomes - 1] = left;
  return c;
}

/// `beta_scale` < 1 runs the sweep hotter than the device temperature.
/// Spins are visited in a fresh random order: a fixed order lets zero-cost
/// flips cycle with period two on bipartite plateaus and never mix.
void metropolis_sweep(const DenseIsing& d, std::vector<int>& order, std::vector<Spin>& s, Rng& rng,
                      double beta_scale = 1.0) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int i : order) {
    // Energy change of flipping spin i: -2 s_i (h_i + sum_j J_ij s_j).
    const double delta = -2.0 * beta_scale * s[static_cast<std::size_t>(i)] * d.local_field(i, s);
    if (delta <= 0.0 || unit(rng) < std::exp(-delta)) {
      s[static_cast<std::size_t>(i)] = static_cast<Spin>(-s[static_cast<std::size_t>(i)]);
    }
  }
}

}  // namespace

void DeviceModel::validate() const {
  if (!graph) throw std::invalid_argument("device model has no graph");
  for (int q : graph->active()) {
    if (!h_bias.contains(q)) throw std::invalid_argument(fmt::format("missing field bias for qubit {}", q));
    auto t = qubit_temperature.find(q);
    if (t == qubit_temperature.end() || !(t->second > 0.0)) {
      throw std::invalid_argument(fmt::format("qubit {} needs a positive temperature", q));
    }
  }
  if (h_bias.size() != graph->active().size() || qubit_temperature.size() != graph->active().size()) {
    throw std::invalid_argument("field biases/temperatures defined on inactive qubits");
  }
  for (const Edge& e : graph->edges()) {
    if (!j_bias.contains(e)) throw std::invalid_argument(fmt::format("missing coupler bias for ({})", e.key()));
    auto t = coupler_temperature.find(e);
    if (t == coupler_temperature.end() || !(t->second > 0.0)) {
      throw std::invalid_argument(fmt::format("coupler ({}) needs a positive temperature", e.key()));
    }
  }
  if (j_bias.size() != graph->edges().size() || coupler_temperature.size() != graph->edges().size()) {
    throw std::invalid_argument("coupler biases/temperatures defined on non-edges");
  }
  if (run_noise_sd_h < 0.0 || run_noise_sd_j < 0.0) throw std::invalid_argument("noise sd must be >= 0");
  if (dac_step < 0.0) throw std::invalid_argument("dac step must be >= 0");
  if (saturation.enabled && !(saturation.lambda > 0.0)) throw std::invalid_argument("saturation lambda must be > 0");
  if (sampler.burn_in_sweeps < 0 || sampler.sweeps_between_reads < 1 || !(sampler.start_temperature_factor >= 1.0) ||
      sampler.anneal_sweeps < 0) {
    throw std::invalid_argument(
        "sampler needs burn_in >= 0, sweeps_between_reads >= 1, start_temperature_factor >= 1, anneal_sweeps >= 0");
  }
}

double DeviceModel::temperature(int qubit) const {
  auto it = qubit_temperature.find(qubit);
  if (it == qubit_temperature.end()) throw std::out_of_range(fmt::format("no temperature for qubit {}", qubit));
  return it->second;
}

double DeviceModel::temperature(const Edge& e) const {
  auto it = coupler_temperature.find(e);
  if (it == coupler_temperature.end()) throw std::out_of_range(fmt::format("no temperature for ({})", e.key()));
  return it->second;
}

DeviceModel ideal_device(std::shared_ptr<const CouplingGraph> graph, double temperature, std::uint64_t seed) {
  if (!graph) throw std::invalid_argument("null graph");
  DeviceModel m;
  m.graph = std::move(graph);
  for (int q : m.graph->active()) {
    m.h_bias.emplace(q, 0.0);
    m.qubit_temperature.emplace(q, temperature);
  }
  for (const Edge& e : m.graph->edges()) {
    m.j_bias.emplace(e, 0.0);
    m.coupler_temperature.emplace(e, temperature);
  }
  m.master_seed = seed;
  m.validate();
  return m;
}

DeviceModel make_synthetic_device(std::shared_ptr<const CouplingGraph> graph, const SyntheticDeviceOptions& options) {
  DeviceModel m = ideal_device(std::move(graph), options.temperature, options.seed);
  Rng rng = make_rng(options.seed, {label_key("device-biases")});
  std::normal_distribution<double> h_dist(0.0, 1.0);
  for (auto& [q, b] : m.h_bias) b = options.h_bias_sd * h_dist(rng);
  for (auto& [e, b] : m.j_bias) b = options.j_bias_sd * h_dist(rng);
  m.run_noise_sd_h = options.run_noise_sd_h;
  m.run_noise_sd_j = options.run_noise_sd_j;
  m.dac_step = options.dac_step;
  m.validate();
  return m;
}

double quantize_dac(double value, double step) {
  if (step < 0.0) throw std::invalid_argument(fmt::format("dac step must be >= 0 (got {})", step));
  if (step == 0.0) return value;
  return std::floor(value / step + 0.5) * step;
}

IsingInstance effective_instance(const DeviceModel& model, const IsingInstance& programmed, std::uint64_t noise_seed) {
  check_programmed(model, programmed);
  Rng rng(noise_seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  FieldMap h;
  for (const auto& [q, bias] : model.h_bias) {
    const double noise = model.run_noise_sd_h > 0.0 ? model.run_noise_sd_h * unit(rng) : 0.0;
    h.emplace(q, quantize_dac(programmed.field(q), model.dac_step) + bias + noise);
  }
  CouplingMap j;
  for (const auto& [e, value] : programmed.couplings()) {
    const double noise = model.run_noise_sd_j > 0.0 ? model.run_noise_sd_j * unit(rng) : 0.0;
    j.emplace(e, quantize_dac(value, model.dac_step) + model.j_bias.at(e) + noise);
  }
  return IsingInstance(model.graph, std::move(h), std::move(j), RangeCheck::none);
}

DenseIsing thermal_parameters(const DeviceModel& model, const IsingInstance& effective) {
  DenseIsing d(effective);
  auto squash = [&](double x) {
    return model.saturation.enabled ? model.saturation.lambda * std::tanh(x / model.saturation.lambda) : x;
  };
  for (int q : model.graph->active()) {
    auto& v = d.h[static_cast<std::size_t>(q - 1)];
    v = squash(v / model.temperature(q));
  }
  for (std::size_t k = 0; k < d.edge_w.size(); ++k) {
    d.edge_w[k] = squash(d.edge_w[k] / model.temperature(Edge(d.edge_a[k] + 1, d.edge_b[k] + 1)));
  }
  for (int a = 0; a < d.n; ++a) {
    for (std::size_t k = d.row_start[static_cast<std::size_t>(a)]; k < d.row_start[static_cast<std::size_t>(a) + 1]; ++k) {
      d.weight[k] = squash(d.weight[k] / model.temperature(Edge(a + 1, d.neighbor[k] + 1)));
    }
  }
  return d;
}

bool is_pair_decomposable(const IsingInstance& programmed) {
  if (!programmed.topology()) throw std::invalid_argument("instance has no topology");
  for (const auto& c : components(programmed)) {
    if (c.size() > 2) return false;
  }
  return true;
}

std::vector<SampleSet> sample(const DeviceModel& model, const IsingInstance& programmed, const SampleRequest& request) {
  check_request(request);
  check_programmed(model, programmed);
  const auto pieces = components(programmed);
  bool exact = true;
  for (const auto& c : pieces) exact = exact && c.size() <= 2;

  const int n = programmed.size();
  std::vector<int> order;
  for (int q : model.graph->active()) order.push_back(q - 1);

  std::vector<SampleSet> out;
  out.reserve(static_cast<std::size_t>(request.runs));
  for (int run = 0; run < request.runs; ++run) {
    const std::uint64_t seed = run_seed(model, request, run);
    Rng rng(derive_seed(seed, {kSampleKey}));
    SampleSet set{run, request.instance_id, programmed, {}};
    set.reads.reserve(static_cast<std::size_t>(request.reads_per_run));

    auto reduced_for = [&](int read) {
      const std::uint64_t noise_seed = model.noise_mode == NoiseMode::per_run
                                           ? derive_seed(seed, {kNoiseKey})
                                           : derive_seed(seed, {kNoiseKey, static_cast<std::uint64_t>(read)});
      return thermal_parameters(model, effective_instance(model, programmed, noise_seed));
    };

    std::vector<Spin> spins(static_cast<std::size_t>(n), 1);
    if (exact) {
      std::vector<std::array<double, 4>> probs;
      for (int read = 0; read < request.reads_per_run; ++read) {
        if (read == 0 || model.noise_mode == NoiseMode::per_read) {
          const DenseIsing reduced = reduced_for(read);
          probs.clear();
          for (const auto& c : pieces) probs.push_back(piece_probabilities(reduced, c));
        }
        for (std::size_t k = 0; k < pieces.size(); ++k) {
          write_outcome(spins, pieces[k], draw_outcome(probs[k], std::size_t{1} << pieces[k].size(), rng));
        }
        set.reads.emplace_back(spins);
      }
    } else {
      std::bernoulli_distribution coin(0.5);
      const double beta0 = 1.0 / model.sampler.start_temperature_factor;
      // Cools linearly in beta from start_temperature_factor * T to T.
      auto anneal = [&](const DenseIsing& reduced, int sweeps) {
        for (int sweep = 0; sweep < sweeps; ++sweep) {
          const double frac = sweeps > 1 ? static_cast<double>(sweep) / (sweeps - 1) : 1.0;
          metropolis_sweep(reduced, order, spins, rng, beta0 + (1.0 - beta0) * frac);
        }
      };
      auto randomize = [&] {
        for (int i : order) spins[static_cast<std::size_t>(i)] = coin(rng) ? 1 : -1;
      };
      DenseIsing reduced = reduced_for(0);
      if (model.sampler.anneal_sweeps > 0) {
        for (int read = 0; read < request.reads_per_run; ++read) {
          if (model.noise_mode == NoiseMode::per_read && read > 0) reduced = reduced_for(read);
          randomize();
          anneal(reduced, model.sampler.anneal_sweeps);
          set.reads.emplace_back(spins);
        }
      } else {
        randomize();
        anneal(reduced, model.sampler.burn_in_sweeps);
        for (int read = 0; read < request.reads_per_run; ++read) {
          if (model.noise_mode == NoiseMode::per_read && read > 0) reduced = reduced_for(read);
          for (int sweep = 0; sweep < model.sampler.sweeps_between_reads; ++sweep) {
            metropolis_sweep(reduced, order, spins, rng);
          }
          set.reads.emplace_back(spins);
        }
      }
    }
    out.push_back(std::move(set));
  }
  return out;
}

std::vector<RunCounts> sample_counts(const DeviceModel& model, const IsingInstance& programmed,
                                     const SampleRequest& request) {
  check_request(request);
  check_programmed(model, programmed);
  const auto pieces = components(programmed);
  for (const auto& c : pieces) {
    if (c.size() > 2) {
      throw std::invalid_argument("sample_counts needs pieces of at most two qubits; use sample()");
    }
  }
  const auto reads = static_cast<std::uint32_t>(request.reads_per_run);

  std::vector<RunCounts> out;
  out.reserve(static_cast<std::size_t>(request.runs));
  for (int run = 0; run < request.runs; ++run) {
    const std::uint64_t seed = run_seed(model, request, run);
    Rng rng(derive_seed(seed, {kSampleKey}));
    RunCounts rc{run, {}};
    rc.components.reserve(pieces.size());
    for (const auto& c : pieces) rc.components.push_back({c, {}});

    if (model.noise_mode == NoiseMode::per_run) {
      const DenseIsing reduced = thermal_parameters(model, effective_instance(model, programmed, derive_seed(seed, {kNoiseKey})));
      for (auto& piece : rc.components) {
        piece.counts = multinomial(reads, piece_probabilities(reduced, piece.qubits),
                                   std::size_t{1} << piece.qubits.size(), rng);
      }
    } else {
      for (std::uint32_t read = 0; read < reads; ++read) {
        const DenseIsing reduced = thermal_parameters(
            model, effective_instance(model, programmed, derive_seed(seed, {kNoiseKey, read})));
        for (auto& piece : rc.components) {
          const auto p = piece_probabilities(reduced, piece.qubits);
          ++piece.counts[static_cast<std::size_t>(draw_outcome(p, std::size_t{1} << piece.qubits.size(), rng))];
        }
      }
    }
    out.push_back(std::move(rc));
  }
  return out;
}

}  // namespace qabias
