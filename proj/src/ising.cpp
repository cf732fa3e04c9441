#include "qabias/ising.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace qabias {

namespace {

void check_spins(std::span<const Spin> values, const char* what) {
  for (Spin v : values) {
    if (v != 1 && v != -1) {
      throw std::invalid_argument(fmt::format("{} entries must be +1 or -1", what));
    }
  }
}

void check_size(int expected, int got, const char* what) {
  if (expected != got) {
    throw std::invalid_argument(
        fmt::format("{} has length {} but the instance has {} qubits", what, got, expected));
  }
}

constexpr double kRangeSlack = 1e-12;

}  // namespace

SpinConfig::SpinConfig(std::vector<Spin> values) : spins(std::move(values)) {
  check_spins(spins, "spin configuration");
}

SpinConfig SpinConfig::from_state(std::uint64_t state, int n) {
  if (n < 0 || n > 64) throw std::invalid_argument("state decoding supports at most 64 qubits");
  std::vector<Spin> s(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) s[static_cast<std::size_t>(b)] = ((state >> b) & 1U) ? -1 : 1;
  return SpinConfig(std::move(s));
}

std::uint64_t SpinConfig::to_state() const {
  if (spins.size() > 64) throw std::invalid_argument("state encoding supports at most 64 qubits");
  std::uint64_t state = 0;
  for (std::size_t b = 0; b < spins.size(); ++b) {
    if (spins[b] < 0) state |= (std::uint64_t{1} << b);
  }
  return state;
}

Gauge::Gauge(std::vector<Spin> values) : signs(std::move(values)) { check_spins(signs, "gauge"); }

Gauge Gauge::identity(int n) { return Gauge(std::vector<Spin>(static_cast<std::size_t>(n), 1)); }

IsingInstance::IsingInstance(int n, FieldMap h, CouplingMap j, RangeCheck check)
    : n_(n), h_(std::move(h)), j_(std::move(j)) {
  validate(check);
}

IsingInstance::IsingInstance(std::shared_ptr<const CouplingGraph> topology, FieldMap h,
                             CouplingMap j, RangeCheck check)
    : n_(topology ? topology->nominal_count() : 0),
      h_(std::move(h)),
      j_(std::move(j)),
      topology_(std::move(topology)) {
  if (!topology_) throw std::invalid_argument("null topology");
  validate(check);
}

void IsingInstance::validate(RangeCheck check) const {
  if (n_ < 1) throw std::invalid_argument("instance needs at least one qubit");
  for (const auto& [q, value] : h_) {
    if (q < 1 || q > n_) throw std::out_of_range(fmt::format("field index {} outside 1..{}", q, n_));
    if (topology_ && !topology_->is_active(q)) {
      throw std::invalid_argument(fmt::format("field on inactive qubit {}", q));
    }
    if (!std::isfinite(value)) throw std::invalid_argument(fmt::format("field h_{} is not finite", q));
    if (check == RangeCheck::programmable && std::abs(value) > kMaxField + kRangeSlack) {
      throw std::out_of_range(fmt::format("|h_{}| = {} exceeds {}", q, std::abs(value), kMaxField));
    }
  }
  for (const auto& [e, value] : j_) {
    if (e.i < 1 || e.j > n_) {
      throw std::out_of_range(fmt::format("coupler ({}) outside 1..{}", e.key(), n_));
    }
    if (topology_ && !topology_->has_edge(e)) {
      throw std::invalid_argument(fmt::format("coupler ({}) is not an edge of the topology", e.key()));
    }
    if (!std::isfinite(value)) throw std::invalid_argument(fmt::format("J_{} is not finite", e.key()));
    if (check == RangeCheck::programmable && std::abs(value) > kMaxCoupling + kRangeSlack) {
      throw std::out_of_range(
          fmt::format("|J_{}| = {} exceeds {}", e.key(), std::abs(value), kMaxCoupling));
    }
  }
}

double IsingInstance::field(int q) const {
  auto it = h_.find(q);
  return it == h_.end() ? 0.0 : it->second;
}

double IsingInstance::coupling(const Edge& e) const {
  auto it = j_.find(e);
  return it == j_.end() ? 0.0 : it->second;
}

DenseIsing::DenseIsing(const IsingInstance& instance)
    : n(instance.size()), h(static_cast<std::size_t>(n), 0.0), row_start(static_cast<std::size_t>(n) + 1, 0) {
  for (const auto& [q, value] : instance.fields()) h[static_cast<std::size_t>(q - 1)] = value;
  std::vector<std::size_t> degree(static_cast<std::size_t>(n), 0);
  for (const auto& [e, value] : instance.couplings()) {
    edge_a.push_back(e.i - 1);
    edge_b.push_back(e.j - 1);
    edge_w.push_back(value);
    ++degree[static_cast<std::size_t>(e.i - 1)];
    ++degree[static_cast<std::size_t>(e.j - 1)];
  }
  for (std::size_t q = 0; q < degree.size(); ++q) row_start[q + 1] = row_start[q] + degree[q];
  neighbor.resize(row_start.back());
  weight.resize(row_start.back());
  std::vector<std::size_t> fill(row_start.begin(), row_start.end() - 1);
  for (std::size_t k = 0; k < edge_w.size(); ++k) {
    auto a = static_cast<std::size_t>(edge_a[k]);
    auto b = static_cast<std::size_t>(edge_b[k]);
    neighbor[fill[a]] = edge_b[k];
    weight[fill[a]++] = edge_w[k];
    neighbor[fill[b]] = edge_a[k];
    weight[fill[b]++] = edge_w[k];
  }
}

double DenseIsing::energy(std::span<const Spin> s) const {
  double e = 0.0;
  for (int q = 0; q < n; ++q) e += h[static_cast<std::size_t>(q)] * s[static_cast<std::size_t>(q)];
  for (std::size_t k = 0; k < edge_w.size(); ++k) {
    e += edge_w[k] * s[static_cast<std::size_t>(edge_a[k])] * s[static_cast<std::size_t>(edge_b[k])];
  }
  return e;
}

double DenseIsing::local_field(int i, std::span<const Spin> s) const {
  auto q = static_cast<std::size_t>(i);
  double f = h[q];
  for (std::size_t k = row_start[q]; k < row_start[q + 1]; ++k) {
    f += weight[k] * s[static_cast<std::size_t>(neighbor[k])];
  }
  return f;
}

double energy(const IsingInstance& instance, const SpinConfig& s) {
  check_size(instance.size(), s.size(), "spin configuration");
  double e = 0.0;
  for (const auto& [q, value] : instance.fields()) e += value * s[q];
  for (const auto& [edge, value] : instance.couplings()) e += value * s[edge.i] * s[edge.j];
  return e;
}

IsingInstance apply_gauge(const IsingInstance& instance, const Gauge& g) {
  check_size(instance.size(), g.size(), "gauge");
  FieldMap h;
  for (const auto& [q, value] : instance.fields()) h.emplace(q, g[q] * value);
  CouplingMap j;
  for (const auto& [e, value] : instance.couplings()) j.emplace(e, g[e.i] * g[e.j] * value);
  if (instance.topology()) return {instance.topology(), std::move(h), std::move(j), RangeCheck::none};
  return {instance.size(), std::move(h), std::move(j), RangeCheck::none};
}

SpinConfig ungauge_sample(const SpinConfig& s, const Gauge& g) {
  if (s.size() != g.size()) {
    throw std::invalid_argument(
        fmt::format("sample length {} does not match gauge length {}", s.size(), g.size()));
  }
  std::vector<Spin> out(s.spins.size());
  for (std::size_t q = 0; q < out.size(); ++q) out[q] = static_cast<Spin>(s.spins[q] * g.signs[q]);
  return SpinConfig(std::move(out));
}

namespace {

std::vector<double> enumerate_energies(const IsingInstance& instance, int max_qubits, const char* what) {
  const int n = instance.size();
  if (n > max_qubits) {
    throw std::length_error(fmt::format("{}: {} qubits exceeds the enumeration bound {}", what, n, max_qubits));
  }
  const DenseIsing dense(instance);
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<double> energies(count);
  std::vector<Spin> s(static_cast<std::size_t>(n));
  for (std::uint64_t state = 0; state < count; ++state) {
    for (int b = 0; b < n; ++b) s[static_cast<std::size_t>(b)] = ((state >> b) & 1U) ? -1 : 1;
    energies[state] = dense.energy(s);
  }
  return energies;
}

bool same_level(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

}  // namespace

std::vector<EnergyLevel> brute_force_spectrum(const IsingInstance& instance, int max_qubits) {
  const auto energies = enumerate_energies(instance, max_qubits, "brute_force_spectrum");
  std::vector<std::uint64_t> order(energies.size());
  for (std::uint64_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint64_t a, std::uint64_t b) { return energies[a] < energies[b]; });
  std::vector<EnergyLevel> levels;
  for (std::uint64_t state : order) {
    const double e = energies[state];
    if (!levels.empty() && same_level(levels.back().energy, e)) {
      auto& level = levels.back();
      ++level.degeneracy;
      level.first_state = std::min(level.first_state, state);
    } else {
      levels.push_back({e, 1, state});
    }
  }
  return levels;
}

std::vector<double> boltzmann_probs(const IsingInstance& instance, double temperature, int max_qubits) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument(fmt::format("temperature must be positive (got {})", temperature));
  }
  auto weights = enumerate_energies(instance, max_qubits, "boltzmann_probs");
  double e_min = weights.front();
  for (double e : weights) e_min = std::min(e_min, e);
  double z = 0.0;
  for (double& w : weights) {
    w = std::exp(-(w - e_min) / temperature);
    z += w;
  }
  for (double& w : weights) w /= z;
  return weights;
}

}  // namespace qabias
