#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qabias/graph.hpp"
#include "qabias/ising.hpp"

namespace qabias {

/// When the run-to-run parameter noise is redrawn.
enum class NoiseMode { per_run, per_read };

/// Optional model violation for robustness studies: every reduced parameter
/// x = value/T is replaced by lambda * tanh(x / lambda) before sampling.
struct Saturation {
  bool enabled = false;
  double lambda = 1.5;
};

/// Metropolis settings for instances that do not split into independent
/// one- and two-qubit pieces. Each run is one chain: a random start, a
/// burn-in that cools from start_temperature_factor * T down to T, then
/// reads spaced by sweeps_between_reads at T.
struct SamplerSettings {
  int burn_in_sweeps = 1000;
  int sweeps_between_reads = 1;
  double start_temperature_factor = 1.0;  ///< 1 keeps the burn-in at T
  /// When positive, every read is an independent anneal of this many sweeps
  /// from a random state, cooling from start_temperature_factor * T to T.
  /// Zero samples one equilibrium chain per run instead.
  int anneal_sweeps = 0;
};

/// Simulated annealer in the thermal regime. The biases, temperatures and
/// noise levels are the ground truth that calibration tries to recover.
struct DeviceModel {
  std::shared_ptr<const CouplingGraph> graph;
  FieldMap h_bias;              ///< persistent field bias, one per active qubit
  CouplingMap j_bias;           ///< persistent coupler bias, one per edge
  FieldMap qubit_temperature;   ///< T_i, one per active qubit
  CouplingMap coupler_temperature;  ///< T_ij, one per edge
  double run_noise_sd_h = 0.0;
  double run_noise_sd_j = 0.0;
  double dac_step = 0.0;  ///< 0 disables quantization
  NoiseMode noise_mode = NoiseMode::per_run;
  Saturation saturation;
  SamplerSettings sampler;
  std::uint64_t master_seed = 0;

  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;

  [[nodiscard]] double temperature(int qubit) const;
  [[nodiscard]] double temperature(const Edge& e) const;
};

/// Bias-free, noise-free device at a uniform temperature.
[[nodiscard]] DeviceModel ideal_device(std::shared_ptr<const CouplingGraph> graph, double temperature,
                                       std::uint64_t seed);

struct SyntheticDeviceOptions {
  double h_bias_sd = 0.05;
  double j_bias_sd = 0.035;
  double temperature = 0.25;
  double run_noise_sd_h = 0.015;
  double run_noise_sd_j = 0.01;
  double dac_step = 0.0;
  std::uint64_t seed = 1;
};

/// Device with Gaussian persistent biases h_b ~ N(0, h_bias_sd), J_b ~ N(0, j_bias_sd).
[[nodiscard]] DeviceModel make_synthetic_device(std::shared_ptr<const CouplingGraph> graph,
                                                const SyntheticDeviceOptions& options);

/// Nearest multiple of `step`, ties toward +infinity; step 0 returns value.
[[nodiscard]] double quantize_dac(double value, double step);

/// Parameters actually realized on the device for one run:
/// quantize(programmed) + persistent bias + run noise drawn from `noise_seed`.
/// Every active qubit carries its field bias; only couplers present in the
/// programmed instance carry theirs.
[[nodiscard]] IsingInstance effective_instance(const DeviceModel& model, const IsingInstance& programmed,
                                               std::uint64_t noise_seed);

/// Dimensionless parameters h_i/T_i and J_ij/T_ij (saturated when enabled)
/// that define the Boltzmann weights exp(-E_reduced(s)).
[[nodiscard]] DenseIsing thermal_parameters(const DeviceModel& model, const IsingInstance& effective);

struct SampleRequest {
  int runs = 1;
  int reads_per_run = 1;
  std::uint64_t stream = 0;  ///< experiment key; distinct streams give independent runs
  std::string instance_id;
};

struct SampleSet {
  int run_id = 0;
  std::string instance_id;
  IsingInstance programmed;
  std::vector<SpinConfig> reads;
};

/// Outcome counts of one independent piece (one or two qubits) of a run.
/// Outcome index: bit b set means qubits[b] ended spin down.
struct ComponentCounts {
  std::vector<int> qubits;
  std::array<std::uint32_t, 4> counts{};
};

struct RunCounts {
  int run_id = 0;
  std::vector<ComponentCounts> components;
};

/// True when the programmed couplers split the active qubits into pieces of
/// at most two qubits (every calibration experiment has this shape).
[[nodiscard]] bool is_pair_decomposable(const IsingInstance& programmed);

/// Runs x reads samples. Pair-decomposable instances are sampled exactly;
/// anything else goes through Metropolis with model.sampler settings.
/// Deterministic given model.master_seed and request.stream.
[[nodiscard]] std::vector<SampleSet> sample(const DeviceModel& model, const IsingInstance& programmed,
                                            const SampleRequest& request);

/// Exact per-piece outcome counts, distributed as if the reads were drawn and
/// tallied. Requires a pair-decomposable instance.
[[nodiscard]] std::vector<RunCounts> sample_counts(const DeviceModel& model, const IsingInstance& programmed,
                                                   const SampleRequest& request);

}  // namespace qabias
