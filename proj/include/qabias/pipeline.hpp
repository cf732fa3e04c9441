#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qabias/benchmark.hpp"
#include "qabias/calibration.hpp"
#include "qabias/device.hpp"

namespace qabias {

enum class Schedule { sequential, alternating };

struct ScanSettings {
  int points = 41;
  double window = 0.1;
  int runs = 100;
  int reads = 1000;
  int max_iterations = 3;
};

struct CalibrationOptions {
  ScanSettings h{41, 0.1, 100, 1000, 3};
  ScanSettings j{21, 0.1, 100, 1000, 3};
  JEstimator estimator = JEstimator::exact;
  TemperatureMethod temperature_method = TemperatureMethod::median;
  BiasScaling scaling = BiasScaling::device_temperature;
  bool damping = false;
  /// Stop a parameter's iterations once the estimate spread falls below
  /// convergence_factor times the predicted noise floor.
  bool stop_on_convergence = true;
  double convergence_factor = 1.5;
  Schedule schedule = Schedule::sequential;
  std::uint64_t seed = 1;
};

/// Everything one iteration produced besides its table entry.
struct IterationArtifacts {
  ScanData scan;
  ScanAnalysis analysis;
  std::optional<NoiseFloor> noise;  ///< absent for single-run scans
};

/// One h or J iteration: scan with the table's cumulative corrections,
/// estimate residual biases and append the record to the table.
IterationRecord run_h_iteration(const DeviceModel& device, CalibrationTable& table, const CalibrationOptions& options,
                                IterationArtifacts* artifacts = nullptr, Diagnostics* diag = nullptr);
IterationRecord run_j_iteration(const DeviceModel& device, CalibrationTable& table, const CalibrationOptions& options,
                                IterationArtifacts* artifacts = nullptr, Diagnostics* diag = nullptr);

/// Whether a record meets the convergence rule of `options`.
[[nodiscard]] bool converged(const IterationRecord& record, const CalibrationOptions& options);

using IterationObserver = std::function<void(const IterationRecord&, const IterationArtifacts&)>;

/// Field iterations, then coupler iterations (sequential schedule), or the two
/// interleaved with coupler scans programming the current field corrections
/// (alternating schedule).
[[nodiscard]] CalibrationTable calibrate(const DeviceModel& device, const CalibrationOptions& options,
                                         const IterationObserver& observer = {}, Diagnostics* diag = nullptr);

// --- configuration ---------------------------------------------------------

struct DeviceSpec {
  std::optional<std::string> path;  ///< load instead of synthesizing
  ChimeraShape shape{8, 8, 4};
  int broken_count = 0;
  bool ideal = false;
  SyntheticDeviceOptions synthetic;
  NoiseMode noise_mode = NoiseMode::per_run;
  std::optional<double> saturation_lambda;
  SamplerSettings sampler;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir;
  bool force = false;
  DeviceSpec device;
  CalibrationOptions calibration;
  int repeat = 1;
  std::string gap_label;
  BenchmarkOptions benchmark;
  bool write_energies = false;

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

/// Defaults filled in, unknown keys rejected.
[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& config);
/// Hash of everything that influences results (not output_dir or force).
[[nodiscard]] std::string config_hash(const ExperimentConfig& config);

/// Output directory used when none is configured: $QABIAS_OUT or "qabias-out".
[[nodiscard]] std::string default_output_dir();

// --- commands --------------------------------------------------------------

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitOracle = 2;
inline constexpr int kExitIo = 3;

[[nodiscard]] DeviceModel build_device(const DeviceSpec& spec, std::uint64_t seed);

/// Writes <out>/device.json.
std::filesystem::path cmd_make_device(const ExperimentConfig& config, std::ostream& log);
/// Writes <out>/calibration/..., one table per repetition.
std::vector<std::filesystem::path> cmd_calibrate(const ExperimentConfig& config, const std::string& device_path,
                                                 std::ostream& log);
/// Writes <out>/benchmark/report.json and report.txt. Without a table the
/// corrected condition uses zero corrections.
std::filesystem::path cmd_benchmark(const ExperimentConfig& config, const std::string& device_path,
                                    const std::optional<std::string>& table_path, std::ostream& log);
/// Runs the oracle suite; returns kExitOk or kExitOracle.
int cmd_verify(const ExperimentConfig& config, bool mutate_alpha, std::ostream& out);
/// Prints a summary of a report, table or device file.
void cmd_report(const std::string& path, std::ostream& out);

}  // namespace qabias
