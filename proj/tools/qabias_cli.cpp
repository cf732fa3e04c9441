// Command-line front end: make-device, calibrate, benchmark, verify, report.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "qabias/io.hpp"
#include "qabias/pipeline.hpp"

using nlohmann::json;

namespace {

/// Flag values collected during parsing, merged over the config file afterwards.
struct Overrides {
  json patch = json::object();

  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    return app->add_option_function<T>(
        flag, [this, pointer](const T& v) { patch[json::json_pointer(pointer)] = v; }, help);
  }
  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& pointer, bool value,
                    const std::string& help) {
    return app->add_flag_callback(
        name, [this, pointer, value] { patch[json::json_pointer(pointer)] = value; }, help);
  }
};

void device_flags(CLI::App* app, Overrides& o) {
  o.option<std::string>(app, "--chimera", "/device/chimera", "Chimera grid, MxN or MxN,shore=K");
  o.option<int>(app, "--broken-count", "/device/broken_count", "Number of randomly removed qubits");
  o.flag(app, "--ideal", "/device/ideal", true, "Bias-free, noise-free device");
  o.option<double>(app, "--h-bias-sd", "/device/h_bias_sd", "Field bias standard deviation");
  o.option<double>(app, "--j-bias-sd", "/device/j_bias_sd", "Coupler bias standard deviation");
  o.option<double>(app, "--temperature", "/device/temperature", "Device temperature (energy units)");
  o.option<double>(app, "--noise-h", "/device/run_noise_sd_h", "Run-to-run field noise sd");
  o.option<double>(app, "--noise-j", "/device/run_noise_sd_j", "Run-to-run coupler noise sd");
  o.option<double>(app, "--dac-step", "/device/dac_step", "DAC quantization step, 0 disables");
  o.option<std::string>(app, "--noise-mode", "/device/noise_mode", "per_run or per_read");
  o.option<double>(app, "--saturation", "/device/saturation_lambda", "Enable tanh saturation with this lambda");
  o.option<int>(app, "--burn-in", "/device/burn_in_sweeps", "Metropolis burn-in sweeps per run");
  o.option<int>(app, "--sweeps-between-reads", "/device/sweeps_between_reads", "Metropolis sweeps between reads");
  o.option<double>(app, "--start-temperature-factor", "/device/start_temperature_factor",
                   "Burn-in starts at this multiple of T and cools to T");
  o.option<int>(app, "--anneal-sweeps", "/device/anneal_sweeps", "Anneal every read independently for this many sweeps");
}

void calibration_flags(CLI::App* app, Overrides& o) {
  for (const std::string kind : {"h", "j"}) {
    o.option<int>(app, "--" + kind + "-points", "/calibration/" + kind + "/points", "Programmed values per scan");
    o.option<double>(app, "--" + kind + "-window", "/calibration/" + kind + "/window", "Scan window half-width");
    o.option<int>(app, "--" + kind + "-runs", "/calibration/" + kind + "/runs", "Runs per programmed value");
    o.option<int>(app, "--" + kind + "-reads", "/calibration/" + kind + "/reads", "Reads per run");
    o.option<int>(app, "--" + kind + "-iterations", "/calibration/" + kind + "/iterations", "Maximum iterations");
  }
  o.option<std::string>(app, "--estimator", "/calibration/estimator", "Coupler estimator: exact or naive");
  o.option<std::string>(app, "--temperature-method", "/calibration/temperature_method", "mean or median");
  o.option<std::string>(app, "--scaling", "/calibration/scaling", "device or per-target");
  o.option<std::string>(app, "--schedule", "/calibration/schedule", "sequential or alternating");
  o.flag(app, "--damping", "/calibration/damping", true, "Variance-weighted corrections");
  o.flag(app, "--no-converge", "/calibration/converge", false, "Always run the maximum number of iterations");
  o.option<int>(app, "--repeat", "/calibration/repeat", "Independent calibrations with fresh noise");
  o.option<std::string>(app, "--gap-label", "/calibration/gap_label", "Label recorded with the persistence result");
}

void benchmark_flags(CLI::App* app, Overrides& o) {
  o.option<std::vector<int>>(app, "--ranges", "/benchmark/ranges", "Comma-separated ranges")->delimiter(',');
  o.option<int>(app, "--instances", "/benchmark/instances", "Instances per range");
  o.option<int>(app, "--gauges", "/benchmark/gauges", "Gauges per instance");
  o.option<int>(app, "--runs", "/benchmark/runs", "Runs per gauge");
  o.option<int>(app, "--reads", "/benchmark/reads", "Reads per run");
  o.flag(app, "--correct-j", "/benchmark/correct_j", true, "Apply coupler corrections too");
  o.flag(app, "--energies", "/benchmark/write_energies", true, "Write every energy to energies.csv");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persistent-bias calibration toolkit for simulated quantum annealers"};
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path;
  bool force = false;
  app.add_option("--config", config_path, "JSON experiment config; flags override it");
  overrides.option<std::uint64_t>(&app, "--seed", "/seed", "Master seed");
  overrides.option<std::string>(&app, "--out", "/output_dir", "Output directory (default $QABIAS_OUT)");
  app.add_flag("--force", force, "Overwrite existing outputs");

  auto* make = app.add_subcommand("make-device", "Synthesize a device model");
  device_flags(make, overrides);

  std::string device_path;
  auto* cal = app.add_subcommand("calibrate", "Run field and coupler calibration");
  cal->add_option("--device", device_path, "Device file (default <out>/device.json)");
  calibration_flags(cal, overrides);

  std::optional<std::string> table_path;
  auto* bench = app.add_subcommand("benchmark", "Compare corrected and uncorrected runs");
  bench->add_option("--device", device_path, "Device file (default <out>/device.json)");
  bench->add_option_function<std::string>("--table", [&](const std::string& p) { table_path = p; },
                                          "Calibration table; omitted means zero corrections");
  benchmark_flags(bench, overrides);

  bool mutate = false;
  auto* verify = app.add_subcommand("verify", "Run the oracle suite");
  verify->add_flag("--mutate-alpha", mutate, "Corrupt the alpha estimator to exercise the harness");

  std::string report_path;
  auto* report = app.add_subcommand("report", "Summarize a report, table or device file");
  report->add_option("path", report_path, "JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? qabias::kExitOk : qabias::kExitValidation;
  }

  try {
    if (report->parsed()) {
      qabias::cmd_report(report_path, std::cout);
      return qabias::kExitOk;
    }
    json cfg = config_path.empty() ? json::object() : qabias::io::read_json_file(config_path);
    if (cfg.contains("provenance")) cfg.erase("provenance");
    cfg.merge_patch(overrides.patch);
    if (verify->parsed() && !cfg.contains("seed")) cfg["seed"] = 1;
    qabias::ExperimentConfig config = qabias::config_from_json(cfg);
    config.force = force;
    if (config.output_dir.empty()) config.output_dir = qabias::default_output_dir();
    const std::string device = device_path.empty() ? config.output_dir + "/device.json" : device_path;

    if (make->parsed()) {
      qabias::cmd_make_device(config, std::cout);
    } else if (cal->parsed()) {
      qabias::cmd_calibrate(config, device, std::cout);
    } else if (bench->parsed()) {
      qabias::cmd_benchmark(config, device, table_path, std::cout);
    } else if (verify->parsed()) {
      return qabias::cmd_verify(config, mutate, std::cout);
    }
    return qabias::kExitOk;
  } catch (const qabias::io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qabias::kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qabias::kExitValidation;
  }
}
