#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "qabias/graph.hpp"

namespace qabias {

using Spin = std::int8_t;
using FieldMap = std::map<int, double>;
using CouplingMap = std::map<Edge, double>;

/// Programmable ranges of the hardware parameters.
inline constexpr double kMaxField = 2.0;
inline constexpr double kMaxCoupling = 1.0;

/// A full assignment of n spins, entry q-1 holding qubit q.
struct SpinConfig {
  std::vector<Spin> spins;

  SpinConfig() = default;
  explicit SpinConfig(std::vector<Spin> values);

  /// Decode a basis-state index: bit b set means qubit b+1 is spin down (-1).
  static SpinConfig from_state(std::uint64_t state, int n);
  [[nodiscard]] std::uint64_t to_state() const;

  [[nodiscard]] int size() const { return static_cast<int>(spins.size()); }
  [[nodiscard]] Spin operator[](int qubit) const { return spins[static_cast<std::size_t>(qubit - 1)]; }

  bool operator==(const SpinConfig&) const = default;
};

/// Per-qubit sign flips (spin-reversal transform).
struct Gauge {
  std::vector<Spin> signs;

  Gauge() = default;
  explicit Gauge(std::vector<Spin> values);
  static Gauge identity(int n);

  [[nodiscard]] int size() const { return static_cast<int>(signs.size()); }
  [[nodiscard]] Spin operator[](int qubit) const { return signs[static_cast<std::size_t>(qubit - 1)]; }
};

enum class RangeCheck { programmable, none };

/// Ising problem over qubits 1..n: E(s) = sum_i h_i s_i + sum_{i<j} J_ij s_i s_j.
///
/// A coupler present in the coupling map is "in use" even when its value is
/// zero; absent couplers are disconnected. The device simulator relies on that
/// distinction when deciding which persistent coupler biases act on a run.
class IsingInstance {
 public:
  IsingInstance(int n, FieldMap h, CouplingMap j, RangeCheck check = RangeCheck::programmable);
  IsingInstance(std::shared_ptr<const CouplingGraph> topology, FieldMap h, CouplingMap j,
                RangeCheck check = RangeCheck::programmable);

  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] const FieldMap& fields() const { return h_; }
  [[nodiscard]] const CouplingMap& couplings() const { return j_; }
  [[nodiscard]] const std::shared_ptr<const CouplingGraph>& topology() const { return topology_; }

  [[nodiscard]] double field(int q) const;
  [[nodiscard]] double coupling(const Edge& e) const;

  bool operator==(const IsingInstance& other) const {
    return n_ == other.n_ && h_ == other.h_ && j_ == other.j_;
  }

 private:
  void validate(RangeCheck check) const;

  int n_;
  FieldMap h_;
  CouplingMap j_;
  std::shared_ptr<const CouplingGraph> topology_;
};

/// Flat array form of an instance (0-based) for inner loops.
struct DenseIsing {
  int n = 0;
  std::vector<double> h;
  std::vector<std::size_t> row_start;  // CSR adjacency, size n+1
  std::vector<int> neighbor;
  std::vector<double> weight;
  std::vector<int> edge_a, edge_b;  // each coupler once, a < b
  std::vector<double> edge_w;

  explicit DenseIsing(const IsingInstance& instance);

  [[nodiscard]] double energy(std::span<const Spin> s) const;
  /// Sum_j J_ij s_j + h_i.
  [[nodiscard]] double local_field(int i, std::span<const Spin> s) const;
};

[[nodiscard]] double energy(const IsingInstance& instance, const SpinConfig& s);

[[nodiscard]] IsingInstance apply_gauge(const IsingInstance& instance, const Gauge& g);
[[nodiscard]] SpinConfig ungauge_sample(const SpinConfig& s, const Gauge& g);

struct EnergyLevel {
  double energy = 0.0;
  std::uint64_t degeneracy = 0;
  std::uint64_t first_state = 0;  // lowest state index at this energy
};

inline constexpr int kMaxSpectrumQubits = 24;
inline constexpr int kMaxBoltzmannQubits = 20;

/// Exact spectrum by enumeration, ascending. Energies within 1e-9 (relative)
/// are one level.
[[nodiscard]] std::vector<EnergyLevel> brute_force_spectrum(const IsingInstance& instance,
                                                            int max_qubits = kMaxSpectrumQubits);

/// Boltzmann probabilities indexed by basis state (see SpinConfig::from_state).
[[nodiscard]] std::vector<double> boltzmann_probs(const IsingInstance& instance, double temperature,
                                                  int max_qubits = kMaxBoltzmannQubits);

}  // namespace qabias
