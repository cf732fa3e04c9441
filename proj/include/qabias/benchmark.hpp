#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qabias/calibration.hpp"
#include "qabias/device.hpp"

namespace qabias {

enum class Condition { uncorrected, h_corrected, hj_corrected };

/// Energies (against the original, ungauged instance) of every read of one
/// instance under one condition, ordered gauge-major then run then read.
struct EnergyRecord {
  std::string instance_id;
  int range = 0;
  int instance_index = 0;
  Condition condition = Condition::uncorrected;
  int gauges = 0;
  int runs = 0;
  int reads = 0;
  std::size_t clamped = 0;  ///< programmed values pushed back into range
  std::vector<double> energies;

  [[nodiscard]] std::span<const double> gauge_energies(int gauge) const;
};

struct BenchmarkOptions {
  std::vector<int> ranges{1, 2, 4, 8, 16};
  int instances_per_range = 100;
  int gauges = 10;
  int runs = 2;
  int reads = 1000;
  bool correct_j = false;
  std::uint64_t seed = 1;
};

/// Uncorrected and (when a table is given) corrected runs of the range-r
/// ensemble. Both conditions share instance, gauge and run seeds, so a table
/// of zeros reproduces the uncorrected records exactly. Corrections stay in
/// the hardware frame: the gauged instance is programmed minus the cumulative
/// correction, which cancels a frame-fixed bias in every gauge.
[[nodiscard]] std::vector<EnergyRecord> run_benchmark(const DeviceModel& device, const CouplingGraph& graph,
                                                      const BenchmarkOptions& options,
                                                      const CalibrationTable* calibration);

enum class Winner { first, second, tie };

/// Lower minimum energy wins; equal energies are decided by the higher count,
/// then the next distinct energy, and so on.
[[nodiscard]] Winner greedy_compare(const EnergyRecord& a, const EnergyRecord& b);

/// Mean of the lowest ceil(fraction * N) energies.
[[nodiscard]] double elite_mean(std::span<const double> energies, double fraction);
[[nodiscard]] double elite_mean(const EnergyRecord& record, double fraction);

inline constexpr double kEliteFraction = 0.02;

enum class Metric { greedy, elite };

struct RangeSummary {
  int range = 0;
  int instances = 0;
  int wins = 0;  ///< corrected better
  int losses = 0;
  int ties = 0;
  double win_probability = 0.0;
};

struct BenchmarkReport {
  Metric metric = Metric::elite;
  double elite_fraction = kEliteFraction;
  Condition corrected = Condition::h_corrected;
  std::vector<RangeSummary> ranges;
  RangeSummary pooled;
};

/// Pairs each corrected record with the uncorrected one of the same instance.
[[nodiscard]] BenchmarkReport summarize(const std::vector<EnergyRecord>& records, Metric metric,
                                        double elite_fraction = kEliteFraction);

/// Aligned text table with one column per range and one row per report.
[[nodiscard]] std::string format_table(std::span<const BenchmarkReport> reports);

[[nodiscard]] const char* to_string(Condition condition);
[[nodiscard]] const char* to_string(Metric metric);

}  // namespace qabias
