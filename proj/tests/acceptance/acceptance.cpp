// Acceptance runner: one PASS/FAIL line per criterion, detail lines indented.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "../oracles.hpp"
#include "json.hpp"
#include "qabias/benchmark.hpp"
#include "qabias/calibration.hpp"
#include "qabias/chimera.hpp"
#include "qabias/device.hpp"
#include "qabias/io.hpp"
#include "qabias/ising.hpp"
#include "qabias/pipeline.hpp"
#include "qabias/stats.hpp"

using namespace qabias;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = false;
  std::vector<std::string> details;
  void note(std::string s) { details.push_back(std::move(s)); }
};

int failures = 0;

void report(const std::string& id, const std::string& title, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.passed = false;
    o.note(fmt::format("exception: {}", e.what()));
  }
  std::cout << fmt::format("{} {} {} ({:.1f} s)\n", id, o.passed ? "PASS" : "FAIL", title, seconds_since(start));
  for (const auto& d : o.details) std::cout << "    " << d << "\n";
  std::cout.flush();
  if (!o.passed) ++failures;
}

std::shared_ptr<const CouplingGraph> chimera(int rows, int cols) { return build_chimera(rows, cols, 4); }

DeviceModel synthetic(int rows, int cols, std::uint64_t seed) {
  SyntheticDeviceOptions o;
  o.seed = seed;
  return make_synthetic_device(chimera(rows, cols), o);
}

std::vector<double> values_of(const std::map<int, double>& m) {
  std::vector<double> out;
  for (const auto& [k, v] : m) out.push_back(v);
  return out;
}

// --- 1 ---------------------------------------------------------------------

Outcome estimator_exactness() {
  Outcome o;
  const auto start = Clock::now();
  const double t = 0.25;
  double worst_exact = 0.0;
  double worst_naive_zero = 0.0;
  double least_naive_off = 1e9;
  for (int a = 0; a < 25; ++a) {
    const double hb = -0.5 + a / 24.0;
    for (int b = 0; b < 9; ++b) {
      const double ratio = -0.4 + 0.1 * b;
      // Both qubits carry a field bias; the second one a different share of it.
      const auto p = oracle::pair(hb, 0.6 * hb, ratio * t, t);
      const double exact = alpha_ij_exact({p[0], p[1], p[2], p[3]});
      const double naive = alpha_ij_naive(p[0] + p[3]);
      worst_exact = std::max(worst_exact, std::abs(exact - ratio));
      if (a == 12) {
        worst_naive_zero = std::max(worst_naive_zero, std::abs(naive - ratio));
      } else {
        least_naive_off = std::min(least_naive_off, std::abs(naive - ratio));
      }
    }
  }
  const double elapsed = seconds_since(start);
  o.note(fmt::format("exact: max |alpha - J/T| = {:.3g} over 25 x 9 grid", worst_exact));
  o.note(fmt::format("naive: max error on zero-field slice {:.3g}, min error off it {:.3g}", worst_naive_zero,
                     least_naive_off));
  o.passed = worst_exact < 1e-12 && worst_naive_zero < 1e-12 && least_naive_off > 1e-6 && elapsed < 1.0;
  return o;
}

// --- 2, 4, 8 share the full-size field calibration ------------------------------

struct FieldRun {
  DeviceModel device;
  CalibrationTable table;
  IterationArtifacts first;
  double seconds = 0.0;
};

FieldRun field_calibration(const DeviceModel& device, ScanSettings scan, std::uint64_t seed, int iterations) {
  FieldRun out{device, {}, {}, 0.0};
  CalibrationOptions opt;
  opt.h = scan;
  opt.seed = seed;
  const auto start = Clock::now();
  for (int k = 1; k <= iterations; ++k) {
    IterationArtifacts art;
    (void)run_h_iteration(device, out.table, opt, &art);
    if (k == 1) out.first = std::move(art);
  }
  out.seconds = seconds_since(start);
  return out;
}

double residual_std(const DeviceModel& d, const CalibrationTable& t) {
  const auto corr = t.cumulative_h_correction();
  std::vector<double> r;
  for (const auto& [q, b] : d.h_bias) r.push_back(b - corr.at(q));
  return stats::stddev(r);
}

Outcome bias_recovery(const FieldRun& full) {
  Outcome o;
  const auto est = values_of(full.table.h_bias_vector(1));
  const auto truth = values_of(full.device.h_bias);
  const double r = stats::pearson(truth, est);
  const double before = stats::stddev(truth);
  FieldRun one = full;
  one.table.h_history.resize(1);
  const double after = residual_std(full.device, one.table);
  const double measured2 = full.table.h_history[1].estimate_std;
  o.note(fmt::format("8x8, 41 x 100 x 1000: corr = {:.4f}, injected std {:.4f} -> residual std {:.4f} "
                     "(ratio {:.3f}); measured std at k=2 {:.4f}; {:.0f} s for two iterations",
                     r, before, after, after / before, measured2, full.seconds));

  const auto reduced = field_calibration(full.device, {21, 0.1, 20, 200, 1}, 77, 1);
  const double r2 = stats::pearson(truth, values_of(reduced.table.h_bias_vector(1)));
  o.note(fmt::format("reduced 21 x 20 x 200: corr = {:.4f} in {:.1f} s", r2, reduced.seconds));
  o.passed = r > 0.95 && after <= 0.5 * before && full.seconds < 900 && r2 > 0.85 && reduced.seconds < 60;
  return o;
}

// --- 3 ---------------------------------------------------------------------

Outcome coupler_narrowing() {
  Outcome o;
  const DeviceModel d = synthetic(8, 8, 5);
  CalibrationOptions opt;
  opt.h.max_iterations = 0;
  opt.j.max_iterations = 3;
  opt.stop_on_convergence = false;
  opt.damping = true;
  opt.seed = 5;
  const auto damped = calibrate(d, opt);
  bool decreasing = damped.j_history.size() == 3;
  std::string stds;
  for (std::size_t k = 0; k < damped.j_history.size(); ++k) {
    stds += fmt::format(" {:.5f}", damped.j_history[k].estimate_std);
    if (k > 0) decreasing = decreasing && damped.j_history[k].estimate_std < damped.j_history[k - 1].estimate_std;
  }
  o.note("damped estimate std, k = 1..3:" + stds);

  bool offset = false;
  for (std::uint64_t seed = 101; seed <= 105; ++seed) {
    CalibrationOptions u = opt;
    u.damping = false;
    u.j.max_iterations = 2;
    u.seed = seed;
    const DeviceModel dev = synthetic(8, 8, seed);
    const auto table = calibrate(dev, u);
    std::vector<double> est;
    for (const auto& t : table.j_history[1].targets) {
      if (!t.flagged) est.push_back(t.bias);
    }
    const double se = stats::stddev(est) / std::sqrt(static_cast<double>(est.size()));
    const double z = stats::mean(est) / se;
    offset = offset || std::abs(z) > 2.0;
    // True residual left by the first correction, for comparison.
    const auto first = table.j_corrections().front();
    std::vector<double> truth;
    for (const auto& [e, c] : first) truth.push_back(dev.j_bias.at(e) - c);
    const double z_true = stats::mean(truth) / (stats::stddev(truth) / std::sqrt(static_cast<double>(truth.size())));
    o.note(fmt::format("undamped seed {}: k=2 mean {:+.6f}, se {:.6f}, mean/se {:+.2f} (true residual {:+.2f})", seed,
                       stats::mean(est), se, z, z_true));
  }
  o.passed = decreasing && offset;
  return o;
}

// --- 4 ---------------------------------------------------------------------

Outcome noise_floor(const FieldRun& full) {
  Outcome o;
  const auto& scan = full.first.scan;
  const double sd = full.device.run_noise_sd_h;
  const double reads = scan.reads_per_run;
  double expect = 0.0;
  std::size_t cells = 0;
  for (const auto& q : scan.qubits) {
    const double t = full.device.temperature(q.qubit);
    for (double v : scan.programmed_values) {
      const double p = oracle::p_up(v + full.device.h_bias.at(q.qubit), t);
      const double binomial = t / (2.0 * std::sqrt(reads * p * (1.0 - p)));
      expect += std::hypot(sd, binomial);
      ++cells;
    }
  }
  expect /= static_cast<double>(cells);
  const double t = full.device.temperature(1);
  const double simple = std::hypot(sd, t / std::sqrt(reads));
  const double measured = full.first.noise->grand_mean;
  o.note(fmt::format("grand mean sigma {:.5f}; quadrature prediction {:.5f} (at p = 1/2: {:.5f}); ratio {:.3f}",
                     measured, expect, simple, measured / expect));
  o.passed = std::abs(measured / expect - 1.0) < 0.2;
  return o;
}

// --- 5 ---------------------------------------------------------------------

struct Linearity {
  double chi2 = 0.0;
  double dof = 0.0;
  double p = 0.0;
};

// Weighted line fit of the device median alpha curve; per-point errors come
// from a bootstrap over runs.
Linearity linearity(const ScanData& scan, std::uint64_t seed) {
  const auto a = analyze_scan(scan);
  const std::size_t nv = scan.programmed_values.size();
  const auto runs = static_cast<std::size_t>(scan.runs);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, runs - 1);
  const int boots = 200;
  std::vector<std::vector<double>> boot(nv);
  std::vector<double> ps(runs), ys(scan.qubits.size());
  for (int b = 0; b < boots; ++b) {
    for (std::size_t v = 0; v < nv; ++v) {
      for (std::size_t t = 0; t < scan.qubits.size(); ++t) {
        for (auto& p : ps) p = scan.p_up(scan.qubits[t], v, pick(rng));
        ys[t] = alpha_from_prob(clamp_probability(stats::median(ps), scan.reads_per_run));
      }
      boot[v].push_back(stats::median(ys));
    }
  }
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  std::vector<double> w(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    w[v] = 1.0 / stats::variance(boot[v]);
    const double x = a.median_curve[v].x, y = a.median_curve[v].y;
    sw += w[v];
    swx += w[v] * x;
    swy += w[v] * y;
    swxx += w[v] * x * x;
    swxy += w[v] * x * y;
  }
  const double slope = (sw * swxy - swx * swy) / (sw * swxx - swx * swx);
  const double icpt = (swy - slope * swx) / sw;
  Linearity out;
  for (std::size_t v = 0; v < nv; ++v) {
    const double r = a.median_curve[v].y - (slope * a.median_curve[v].x + icpt);
    out.chi2 += w[v] * r * r;
  }
  out.dof = static_cast<double>(nv) - 2.0;
  out.p = stats::chi2_sf(out.chi2, out.dof);
  return out;
}

Outcome thermal_linearity() {
  Outcome o;
  DeviceModel d = synthetic(4, 4, 9);
  ScanProtocol p;
  p.values = evenly_spaced(-0.1, 0.1, 41);
  p.runs = 100;
  p.reads = 1000;
  p.stream = 1;
  const auto narrow = linearity(run_h_scan(d, p), 1);
  o.note(fmt::format("plain device, [-0.1, 0.1]: chi2 {:.1f} / {} dof, p = {:.3f}", narrow.chi2, narrow.dof, narrow.p));

  d.saturation = {true, 1.5};
  p.values = evenly_spaced(-0.35, 0.35, 41);
  p.window = 0.35;
  p.stream = 2;
  const auto wide = linearity(run_h_scan(d, p), 2);
  o.note(fmt::format("saturating device, [-0.35, 0.35]: chi2 {:.1f} / {} dof, p = {:.3g}", wide.chi2, wide.dof,
                     wide.p));
  o.passed = narrow.p > 0.01 && wide.p <= 0.01;
  return o;
}

// --- 6 ---------------------------------------------------------------------

BenchmarkReport desk_benchmark(DeviceModel device, std::uint64_t seed, Outcome& o, const std::string& label) {
  device.sampler = {0, 1, 20.0, 3};
  CalibrationOptions opt;
  opt.j.max_iterations = 0;
  opt.seed = seed;
  const auto table = calibrate(device, opt);
  BenchmarkOptions b;
  b.ranges = {1, 4, 16};
  b.instances_per_range = 40;
  b.gauges = 4;
  b.runs = 20;
  b.reads = 500;
  b.seed = seed;
  const auto records = run_benchmark(device, *device.graph, b, &table);
  const auto rep = summarize(records, Metric::elite);
  std::string per_range;
  for (const auto& r : rep.ranges) per_range += fmt::format(" r={}: {}/{}/{}", r.range, r.wins, r.losses, r.ties);
  o.note(fmt::format("{} ({} field iterations): elite wins/losses/ties{}; pooled {}/{}/{}", label,
                     table.h_history.size(), per_range, rep.pooled.wins, rep.pooled.losses, rep.pooled.ties));
  return rep;
}

Outcome benchmark_improvement() {
  Outcome o;
  const auto start = Clock::now();
  const auto biased = desk_benchmark(synthetic(2, 4, 7), 7, o, "synthetic");
  const long n = biased.pooled.instances;
  const long wins = biased.pooled.wins;
  const double rate = static_cast<double>(wins) / static_cast<double>(n);
  const double p = stats::binomial_upper_tail(wins, n, 0.5);
  o.note(fmt::format("synthetic: win rate {:.3f} ({} of {}), one-sided binomial p = {:.2g}", rate, wins, n, p));

  const auto ideal = desk_benchmark(ideal_device(chimera(2, 4), 0.25, 7), 7, o, "ideal");
  const long decided = ideal.pooled.wins + ideal.pooled.losses;
  const double p_ideal = decided > 0 ? stats::binomial_two_sided(ideal.pooled.wins, decided, 0.5) : 1.0;
  o.note(fmt::format("ideal: {} wins of {} decided, two-sided binomial p = {:.3f}", ideal.pooled.wins, decided,
                     p_ideal));
  const double elapsed = seconds_since(start);
  o.passed = rate > 0.55 && p < 0.05 && p_ideal > 0.0027 && elapsed < 1800;
  return o;
}

// --- 7 ---------------------------------------------------------------------

Outcome oracle_equivalence() {
  Outcome o;
  const auto start = Clock::now();
  const auto pair_graph = build_chimera(1, 1, 1);  // two qubits, one coupler
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> hd(-1.0, 1.0), jd(-1.0, 1.0), td(0.2, 1.0);
  const int reads = 100000;
  int pair_failures = 0;
  double total = 0.0;
  double worst_p = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double h1 = hd(rng), h2 = hd(rng), j = jd(rng), t = td(rng);
    const DeviceModel d = ideal_device(pair_graph, t, static_cast<std::uint64_t>(trial));
    const IsingInstance prog(pair_graph, {{1, h1}, {2, h2}}, {{Edge(1, 2), j}});
    const auto counts = sample_counts(d, prog, {1, reads, 1, "pair"});
    const auto& c = counts.at(0).components.at(0);
    const auto probs = boltzmann_probs(prog, t);
    double chi2 = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      const double e = probs[k] * reads;
      chi2 += (c.counts[k] - e) * (c.counts[k] - e) / e;
    }
    const double p = stats::chi2_sf(chi2, 3.0);
    worst_p = std::min(worst_p, p);
    total += chi2;
    pair_failures += p < 0.0027 ? 1 : 0;
  }
  o.note(fmt::format("pairs: {} of 50 outside 3 sigma; smallest p {:.4f}; pooled chi2 {:.1f} / 150 dof (p = {:.3f})",
                     pair_failures, worst_p, total, stats::chi2_sf(total, 150.0)));

  const auto cell = build_chimera(1, 1, 4);  // eight qubits
  double worst_tv = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    FieldMap h;
    CouplingMap jm;
    for (int q : cell->active()) h[q] = 0.5 * hd(rng);
    for (const auto& e : cell->edges()) jm[e] = jd(rng);
    const double t = 0.5 + 0.1 * trial;
    DeviceModel d = ideal_device(cell, t, 40 + static_cast<std::uint64_t>(trial));
    d.sampler = {1000, 2, 1.0, 0};
    const IsingInstance prog(cell, h, jm);
    const auto sets = sample(d, prog, {100, 5000, 3, "metropolis"});
    std::vector<double> freq(256, 0.0);
    double n = 0;
    for (const auto& s : sets) {
      for (const auto& r : s.reads) {
        freq[r.to_state()] += 1.0;
        n += 1.0;
      }
    }
    oracle::Problem p{8, h, {}};
    for (const auto& [e, v] : jm) p.j[{e.i, e.j}] = v;
    const auto exact = oracle::boltzmann(p, t);
    double tv = 0.0;
    for (std::size_t s = 0; s < 256; ++s) tv += 0.5 * std::abs(freq[s] / n - exact[s]);
    worst_tv = std::max(worst_tv, tv);
  }
  o.note(fmt::format("Metropolis, five 8-qubit instances x 500000 reads: worst TV distance {:.4f}", worst_tv));
  o.passed = pair_failures == 0 && worst_tv < 0.02 && seconds_since(start) < 300;
  return o;
}

// --- 8 ---------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_text_file(e.path());
  }
  return out;
}

std::map<std::string, std::string> replay_once(const fs::path& dir) {
  fs::remove_all(dir);
  nlohmann::json j{{"seed", 8},
                   {"output_dir", dir.string()},
                   {"device", {{"chimera", "2x2"}, {"broken_count", 2}, {"anneal_sweeps", 3},
                               {"start_temperature_factor", 20.0}}},
                   {"calibration",
                    {{"h", {{"points", 11}, {"runs", 10}, {"reads", 200}, {"iterations", 2}}},
                     {"j", {{"points", 7}, {"runs", 10}, {"reads", 200}, {"iterations", 2}}},
                     {"repeat", 2}}},
                   {"benchmark",
                    {{"ranges", {1, 4}}, {"instances", 3}, {"gauges", 2}, {"runs", 2}, {"reads", 50},
                     {"write_energies", true}}}};
  const auto config = config_from_json(j);
  std::ostringstream log;
  const auto device = cmd_make_device(config, log);
  const auto tables = cmd_calibrate(config, device.string(), log);
  (void)cmd_benchmark(config, device.string(), tables.front().string(), log);
  auto snap = snapshot(dir);
  fs::remove_all(dir);
  return snap;
}

Outcome determinism_and_persistence(const FieldRun& full) {
  Outcome o;
  const auto base = fs::temp_directory_path() / "qabias_acceptance_replay";
  const auto a = replay_once(base / "a");
  const auto b = replay_once(base / "b");
  fs::remove_all(base);
  const bool identical = a == b && !a.empty();
  o.note(fmt::format("replay: {} files, {}", a.size(), identical ? "byte-identical" : "DIFFERENT"));

  const auto second = field_calibration(full.device, {41, 0.1, 100, 1000, 1}, 4242, 1);
  const double r = persistence_correlation(full.table, second.table, 1);
  o.note(fmt::format("persistence: bias-vector correlation between noise seeds {:.4f}", r));
  o.passed = identical && r > 0.9;
  return o;
}

}  // namespace

int main() {
  std::cout << "acceptance criteria\n";
  report("AC1", "coupler estimator exactness", estimator_exactness);

  FieldRun full;
  bool have_full = false;
  auto need_full = [&]() -> const FieldRun& {
    if (!have_full) {
      full = field_calibration(synthetic(8, 8, 2), {41, 0.1, 100, 1000, 2}, 2, 2);
      have_full = true;
    }
    return full;
  };
  report("AC2", "field-bias recovery and narrowing", [&] { return bias_recovery(need_full()); });
  report("AC3", "coupler-iteration narrowing and overcorrection", coupler_narrowing);
  report("AC4", "noise-floor statistic", [&] { return noise_floor(need_full()); });
  report("AC5", "thermal-model linearity", thermal_linearity);
  report("AC6", "desk-scale benchmark improvement", benchmark_improvement);
  report("AC7", "sampler oracle equivalence", oracle_equivalence);
  report("AC8", "determinism and persistence", [&] { return determinism_and_persistence(need_full()); });

  std::cout << (failures == 0 ? "all criteria passed\n" : fmt::format("{} criteria failed\n", failures));
  return failures == 0 ? 0 : 1;
}
