#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qabias/chimera.hpp"
#include "qabias/device.hpp"
#include "qabias/graph.hpp"

namespace qabias {

enum class ScanKind { h, j };
enum class JEstimator { naive, exact };
enum class TemperatureMethod { mean, median };
/// How an intercept is turned into a bias: by one device temperature, or by
/// each target's own fitted temperature.
enum class BiasScaling { device_temperature, per_target_temperature };

/// Outcome probabilities of a coupled pair; the first arrow is the lower-index qubit.
struct PairProbs {
  double uu = 0.25;
  double ud = 0.25;
  double du = 0.25;
  double dd = 0.25;
};

/// Counts of one field-scan target: up_counts[value][run].
struct QubitSeries {
  int qubit = 0;
  double correction = 0.0;  ///< offset subtracted from every programmed value
  std::vector<std::vector<std::uint32_t>> up_counts;
};

/// Counts of one coupler-scan target: counts[value][run] in outcome order
/// (uu, du, ud, dd), i.e. bit 0 = lower qubit down, bit 1 = upper qubit down.
struct CouplerSeries {
  Edge edge;
  double correction = 0.0;
  std::vector<std::vector<std::array<std::uint32_t, 4>>> counts;
};

/// Raw outcome of one calibration experiment.
struct ScanData {
  ScanKind kind = ScanKind::h;
  int iteration = 1;
  int runs = 0;
  int reads_per_run = 0;
  std::uint64_t device_seed = 0;
  std::uint64_t stream = 0;
  std::vector<double> programmed_values;
  std::vector<QubitSeries> qubits;
  std::vector<CouplerSeries> couplers;

  [[nodiscard]] double p_up(const QubitSeries& q, std::size_t value, std::size_t run) const;
  [[nodiscard]] PairProbs pair_probs(const CouplerSeries& c, std::size_t value, std::size_t run) const;
  [[nodiscard]] const QubitSeries& qubit(int q) const;
  [[nodiscard]] const CouplerSeries& coupler(const Edge& e) const;
  void validate() const;
};

/// Collects clamping events and other non-fatal findings of an analysis.
struct Diagnostics {
  std::size_t clamped = 0;
  std::vector<std::string> messages;

  void note(std::string message);
};

/// alpha(p) = (1/2) ln((1-p)/p); requires 0 < p < 1.
[[nodiscard]] double alpha_from_prob(double p);

/// Empirical p in {0, 1} is moved to 1/(2 reads) or 1 - 1/(2 reads).
[[nodiscard]] double clamp_probability(double p, int reads, Diagnostics* diag = nullptr);

/// Coupler log-odds assuming no field biases (aligned-pair probability only).
[[nodiscard]] double alpha_ij_naive(double p_aligned);

/// (1/4) ln(p_ud p_du / (p_uu p_dd)); equals J_ij/T_ij for Boltzmann
/// statistics whatever the fields on the two qubits.
[[nodiscard]] double alpha_ij_exact(const PairProbs& p);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Median over runs of the outcome probability, mapped through alpha, for
/// every programmed value.
[[nodiscard]] std::vector<Point> median_alpha(const ScanData& scan, int qubit, Diagnostics* diag = nullptr);
/// Coupler variant. The exact estimator takes the median of each of the four
/// outcome probabilities separately.
[[nodiscard]] std::vector<Point> median_alpha(const ScanData& scan, const Edge& coupler, JEstimator estimator,
                                              Diagnostics* diag = nullptr);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rss = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares. Standard errors use rss/(n-2) and are zero for two points.
[[nodiscard]] LineFit fit_line(std::span<const Point> points);

struct TargetFit {
  int qubit = 0;
  Edge edge;
  std::vector<Point> curve;
  LineFit fit;
  bool flagged = false;  ///< non-positive slope, no usable temperature
};

struct ScanAnalysis {
  ScanKind kind = ScanKind::h;
  JEstimator estimator = JEstimator::exact;
  std::vector<TargetFit> targets;
  std::vector<Point> median_curve;  ///< median over targets of the alpha curves
  LineFit median_fit;
};

[[nodiscard]] ScanAnalysis analyze_scan(const ScanData& scan, JEstimator estimator = JEstimator::exact,
                                        Diagnostics* diag = nullptr);

/// mean: average of 1/slope over unflagged targets. median: 1/slope of the
/// line through the median curve.
[[nodiscard]] double estimate_device_temperature(const ScanAnalysis& analysis, TemperatureMethod method,
                                                 Diagnostics* diag = nullptr);
[[nodiscard]] double estimate_device_temperature(const ScanData& scan, TemperatureMethod method,
                                                 JEstimator estimator = JEstimator::exact);

struct BiasEstimate {
  double value = 0.0;
  double variance = 0.0;  ///< sampling variance of `value` from the fit
};

/// intercept * temperature (device scaling) or intercept / slope (per-target).
[[nodiscard]] std::map<int, BiasEstimate> estimate_h_biases(const ScanAnalysis& analysis, double temperature,
                                                            BiasScaling scaling = BiasScaling::device_temperature,
                                                            Diagnostics* diag = nullptr);
[[nodiscard]] std::map<Edge, BiasEstimate> estimate_j_biases(const ScanAnalysis& analysis, double temperature,
                                                             BiasScaling scaling = BiasScaling::device_temperature,
                                                             Diagnostics* diag = nullptr);

/// desired - sum of the corrections applied in completed iterations.
template <class Key>
[[nodiscard]] std::map<Key, double> iterate_correction(std::span<const std::map<Key, double>> applied,
                                                       const std::map<Key, double>& desired) {
  std::map<Key, double> out = desired;
  for (const auto& step : applied) {
    for (const auto& [key, value] : step) {
      auto it = out.find(key);
      if (it == out.end()) throw std::invalid_argument("correction history names a target without a desired value");
      it->second -= value;
    }
  }
  return out;
}

/// Shrinks an estimate by prior_variance / (prior_variance + estimate_variance).
/// A certain estimate (zero variance) is applied in full.
[[nodiscard]] double damped_correction(double estimate, double estimate_variance, double prior_variance);

struct TargetNoise {
  int qubit = 0;
  Edge edge;
  std::vector<double> sigma;  ///< per programmed value, sd over runs
  double mean_sigma = 0.0;
};

struct NoiseFloor {
  std::vector<TargetNoise> targets;
  double grand_mean = 0.0;
};

/// Run-to-run spread of the per-run parameter estimates alpha(p_r) * T.
[[nodiscard]] NoiseFloor noise_floor_stats(const ScanData& scan, double temperature,
                                           JEstimator estimator = JEstimator::exact, Diagnostics* diag = nullptr);

// --- experiments ------------------------------------------------------------

struct ScanProtocol {
  std::vector<double> values;
  int runs = 100;
  int reads = 1000;
  double window = 0.1;  ///< |programmed value| bound of the thermal window
  int iteration = 1;
  std::uint64_t stream = 0;
};

[[nodiscard]] std::vector<double> evenly_spaced(double lo, double hi, int count);

/// All active qubits at once with field value - prior_corrections[q], no couplers.
[[nodiscard]] ScanData run_h_scan(const DeviceModel& device, const ScanProtocol& protocol,
                                  const FieldMap& prior_corrections = {}, Diagnostics* diag = nullptr);

/// One batch of couplers at a time at value - prior_corrections[e]; the rest
/// of the couplers stay disconnected. Fields are programmed from
/// `field_program` (absent qubits at zero).
[[nodiscard]] ScanData run_j_scan(const DeviceModel& device, const ScanProtocol& protocol,
                                  const CouplerBatches& batches, const CouplingMap& prior_corrections = {},
                                  const FieldMap& field_program = {}, Diagnostics* diag = nullptr);

// --- calibration table ------------------------------------------------------

struct TargetEstimate {
  int qubit = 0;
  Edge edge;
  double bias = 0.0;        ///< raw estimate of the residual bias
  double variance = 0.0;    ///< its sampling variance
  double correction = 0.0;  ///< amount added to the cumulative correction
  double slope = 0.0;
  double intercept = 0.0;
  bool flagged = false;
};

struct IterationRecord {
  ScanKind kind = ScanKind::h;
  int k = 1;
  double t_mean = 0.0;
  double t_median = 0.0;
  double temperature = 0.0;  ///< the one used for bias scaling
  double estimate_std = 0.0;
  double predicted_floor = 0.0;  ///< rms of the per-target standard errors
  double prior_variance = 0.0;   ///< damping prior, 0 when damping is off
  std::vector<TargetEstimate> targets;
};

struct CalibrationTable {
  JEstimator estimator = JEstimator::exact;
  TemperatureMethod temperature_method = TemperatureMethod::median;
  BiasScaling scaling = BiasScaling::device_temperature;
  bool damping = false;
  std::vector<IterationRecord> h_history;
  std::vector<IterationRecord> j_history;

  /// Per-iteration applied corrections, oldest first.
  [[nodiscard]] std::vector<FieldMap> h_corrections() const;
  [[nodiscard]] std::vector<CouplingMap> j_corrections() const;
  /// Sum of all applied corrections.
  [[nodiscard]] FieldMap cumulative_h_correction() const;
  [[nodiscard]] CouplingMap cumulative_j_correction() const;
  [[nodiscard]] std::map<int, double> h_bias_vector(int iteration = 1) const;
};

/// Pearson correlation of the field-bias estimates of two tables at `iteration`.
[[nodiscard]] double persistence_correlation(const CalibrationTable& a, const CalibrationTable& b, int iteration = 1);

[[nodiscard]] const char* to_string(ScanKind kind);
[[nodiscard]] const char* to_string(JEstimator estimator);
[[nodiscard]] const char* to_string(TemperatureMethod method);
[[nodiscard]] const char* to_string(BiasScaling scaling);

}  // namespace qabias
