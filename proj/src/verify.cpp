#include "qabias/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <fmt/format.h>

#include "qabias/benchmark.hpp"
#include "qabias/calibration.hpp"
#include "qabias/chimera.hpp"
#include "qabias/device.hpp"
#include "qabias/ising.hpp"
#include "qabias/rng.hpp"
#include "qabias/stats.hpp"

namespace qabias {

namespace {

using AlphaFn = std::function<double(double)>;

// Corrupted estimator for the mutation harness: drops the factor 1/2.
double mutated_alpha(double p) { return std::log((1.0 - p) / p); }

/// Closed-form two-spin Boltzmann probabilities in the order (uu, ud, du, dd).
std::array<double, 4> pair_oracle(double hi, double hj, double jij, double t) {
  const double w[4] = {std::exp(-(hi + hj + jij) / t), std::exp(-(hi - hj - jij) / t), std::exp(-(-hi + hj - jij) / t),
                       std::exp(-(-hi - hj + jij) / t)};
  const double z = w[0] + w[1] + w[2] + w[3];
  return {w[0] / z, w[1] / z, w[2] / z, w[3] / z};
}

CheckResult check(std::string name, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail)};
}

CheckResult alpha_roundtrip(const AlphaFn& alpha, std::uint64_t seed) {
  Rng rng = make_rng(seed, {label_key("verify-alpha")});
  std::uniform_real_distribution<double> u(0.01, 0.99);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double p = u(rng);
    worst = std::max(worst, std::abs(1.0 / (1.0 + std::exp(2.0 * alpha(p))) - p));
  }
  return check("alpha_roundtrip", worst < 1e-12, fmt::format("max |p - p'| = {:.3g}", worst));
}

CheckResult single_spin_closed_form(const AlphaFn& alpha) {
  // p(up) = 1 / (1 + e^{2h/T}) so alpha(p(up)) = h/T.
  double worst = 0.0;
  for (double x : {-1.5, -0.4, 0.0, 0.3, 1.0, 2.0}) worst = std::max(worst, std::abs(alpha(1.0 / (1.0 + std::exp(2.0 * x))) - x));
  return check("alpha_single_spin", worst < 1e-12, fmt::format("max error {:.3g}", worst));
}

CheckResult exact_estimator_sweep() {
  double worst = 0.0;
  const double t = 0.25;
  for (int a = 0; a < 25; ++a) {
    const double hb = -0.5 + a * (1.0 / 24.0);
    for (int b = 0; b < 9; ++b) {
      const double beta_j = -0.4 + b * 0.1;
      for (double hb2 : {-0.3, 0.0, 0.2}) {
        const auto p = pair_oracle(hb, hb2, beta_j * t, t);
        worst = std::max(worst, std::abs(alpha_ij_exact({p[0], p[1], p[2], p[3]}) - beta_j));
      }
    }
  }
  return check("alpha_ij_exact_oracle", worst < 1e-12, fmt::format("max |alpha - J/T| = {:.3g}", worst));
}

CheckResult naive_reduction() {
  double worst_zero = 0.0;
  double best_biased = 0.0;
  for (int b = 0; b < 9; ++b) {
    const double beta_j = -0.4 + b * 0.1;
    const auto p0 = pair_oracle(0.0, 0.0, beta_j, 1.0);
    worst_zero = std::max(worst_zero, std::abs(alpha_ij_naive(p0[0] + p0[3]) - beta_j));
    const auto p1 = pair_oracle(0.3, -0.2, beta_j, 1.0);
    best_biased = std::max(best_biased, std::abs(alpha_ij_naive(p1[0] + p1[3]) - beta_j));
  }
  return check("naive_matches_only_without_fields", worst_zero < 1e-12 && best_biased > 1e-3,
               fmt::format("h=0 error {:.3g}, biased error {:.3g}", worst_zero, best_biased));
}

CheckResult symmetric_identity(std::uint64_t seed) {
  Rng rng = make_rng(seed, {label_key("verify-symmetric")});
  std::uniform_real_distribution<double> u(0.01, 0.49);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double a = u(rng);
    const double b = 0.5 - a;
    worst = std::max(worst, std::abs(alpha_ij_exact({a, b, b, a}) - alpha_ij_naive(2.0 * a)));
  }
  return check("exact_equals_naive_on_symmetric", worst < 1e-12, fmt::format("max difference {:.3g}", worst));
}

IsingInstance random_small(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FieldMap h;
  CouplingMap j;
  for (int q = 1; q <= n; ++q) h.emplace(q, u(rng));
  for (int a = 1; a <= n; ++a) {
    for (int b = a + 1; b <= n; ++b) {
      if (u(rng) > 0.0) j.emplace(Edge(a, b), u(rng));
    }
  }
  return IsingInstance(n, std::move(h), std::move(j));
}

CheckResult energy_oracle(std::uint64_t seed) {
  const auto inst = random_small(8, derive_seed(seed, {label_key("verify-energy")}));
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 256; ++s) {
    const auto cfg = SpinConfig::from_state(s, 8);
    double e = 0.0;
    for (const auto& [q, v] : inst.fields()) e += v * cfg[q];
    for (const auto& [edge, v] : inst.couplings()) e += v * cfg[edge.i] * cfg[edge.j];
    worst = std::max(worst, std::abs(e - energy(inst, cfg)));
  }
  return check("energy_matches_direct_sum", worst < 1e-12, fmt::format("max error {:.3g}", worst));
}

CheckResult gauge_invariance(std::uint64_t seed) {
  const auto inst = random_small(10, derive_seed(seed, {label_key("verify-gauge")}));
  Rng rng = make_rng(seed, {label_key("verify-gauge-signs")});
  std::vector<Spin> signs(10);
  for (auto& s : signs) s = (rng() & 1U) ? 1 : -1;
  const Gauge g(signs);
  const auto a = brute_force_spectrum(inst);
  const auto b = brute_force_spectrum(apply_gauge(inst, g));
  bool same = a.size() == b.size();
  for (std::size_t k = 0; same && k < a.size(); ++k) {
    same = std::abs(a[k].energy - b[k].energy) < 1e-9 && a[k].degeneracy == b[k].degeneracy;
  }
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 1024; s += 7) {
    const auto cfg = SpinConfig::from_state(s, 10);
    std::vector<Spin> gs(10);
    for (int q = 0; q < 10; ++q) gs[static_cast<std::size_t>(q)] = static_cast<Spin>(cfg.spins[static_cast<std::size_t>(q)] * signs[static_cast<std::size_t>(q)]);
    worst = std::max(worst, std::abs(energy(inst, cfg) - energy(apply_gauge(inst, g), SpinConfig(gs))));
  }
  return check("gauge_preserves_spectrum", same && worst < 1e-12,
               fmt::format("{} levels, max energy difference {:.3g}", a.size(), worst));
}

CheckResult boltzmann_oracle() {
  const IsingInstance inst(2, FieldMap{{1, 0.3}, {2, -0.2}}, CouplingMap{{Edge(1, 2), 0.1}});
  const auto p = boltzmann_probs(inst, 0.25);
  // State index bit 0 is qubit 1 down, so (uu, du, ud, dd) = states 0, 1, 2, 3.
  const auto q = pair_oracle(0.3, -0.2, 0.1, 0.25);
  const double err = std::max({std::abs(p[0] - q[0]), std::abs(p[1] - q[2]), std::abs(p[2] - q[1]), std::abs(p[3] - q[3])});
  return check("boltzmann_matches_closed_form", err < 1e-12, fmt::format("max error {:.3g}", err));
}

CheckResult chimera_counts() {
  const auto g = build_chimera(8, 8, 4);
  const auto batches = edge_batches(*g);
  const auto defect = validate_batches(*g, batches);
  const auto broken = build_chimera(ChimeraShape{8, 8, 4}, choose_broken({8, 8, 4}, 3, 7));
  const bool ok = g->active().size() == 512 && g->edges().size() == 1472 && g->max_degree() == 6 &&
                  batches.batches.size() == 6 && defect.empty() && broken->active().size() == 509;
  return check("chimera_structure", ok,
               fmt::format("{} qubits, {} couplers, degree {}, {} batches{}, {} active with 3 broken",
                           g->active().size(), g->edges().size(), g->max_degree(), batches.batches.size(),
                           defect.empty() ? "" : " (" + defect + ")", broken->active().size()));
}

CheckResult line_fit_oracle() {
  std::vector<Point> pts;
  for (int k = 0; k < 11; ++k) {
    const double x = -0.1 + 0.02 * k;
    pts.push_back({x, 4.0 * x + 0.12});
  }
  const auto f = fit_line(pts);
  const double err = std::max(std::abs(f.slope - 4.0), std::abs(f.intercept - 0.12));
  return check("line_fit_exact", err < 1e-12, fmt::format("slope {} intercept {}", f.slope, f.intercept));
}

CheckResult correction_algebra() {
  const std::map<int, double> desired{{1, 0.0}};
  const std::vector<std::map<int, double>> none;
  const std::vector<std::map<int, double>> two{{{1, 0.03}}, {{1, -0.005}}};
  const double k0 = iterate_correction<int>(none, desired).at(1);
  const double k1 = iterate_correction<int>(std::span(two).first(1), desired).at(1);
  const double k2 = iterate_correction<int>(two, desired).at(1);
  const bool damp = damped_correction(0.2, 0.0, 0.01) == 0.2 && std::abs(damped_correction(0.2, 0.01, 0.01) - 0.1) < 1e-15;
  const bool ok = k0 == 0.0 && std::abs(k1 + 0.03) < 1e-15 && std::abs(k2 + 0.025) < 1e-15 && damp;
  return check("iterative_and_damped_correction", ok, fmt::format("k=0 {}, k=1 {}, k=2 {}", k0, k1, k2));
}

CheckResult scoring_rules() {
  std::vector<double> e(100, 0.0);
  e[0] = -3.0;
  e[1] = -3.0;
  e[2] = -1.0;
  const bool elite = elite_mean(e, 0.02) == -3.0 && std::abs(elite_mean(e, 1.0) + 0.07) < 1e-12;
  EnergyRecord a, b;
  a.instance_id = b.instance_id = "x";
  a.energies.assign(50, -5.0);
  b.energies.assign(30, -5.0);
  a.energies.resize(100, 0.0);
  b.energies.resize(100, 0.0);
  const bool greedy = greedy_compare(a, b) == Winner::first && greedy_compare(b, a) == Winner::second &&
                      greedy_compare(a, a) == Winner::tie;
  return check("elite_and_greedy_scoring", elite && greedy, elite && greedy ? "" : "scoring rule mismatch");
}

CheckResult pair_sampler(std::uint64_t seed) {
  // Fixed pair on a tiny graph; chi-squared (3 dof) against the closed form.
  auto g = std::make_shared<const CouplingGraph>(2, std::vector<int>{1, 2}, std::vector<Edge>{Edge(1, 2)});
  DeviceModel d = ideal_device(g, 0.5, seed);
  d.h_bias[1] = 0.05;
  const IsingInstance prog(g, FieldMap{{1, 0.1}, {2, -0.05}}, CouplingMap{{Edge(1, 2), 0.2}});
  SampleRequest req;
  req.runs = 1;
  req.reads_per_run = 100000;
  req.stream = label_key("verify-pair");
  const auto counts = sample_counts(d, prog, req).at(0).components.at(0).counts;
  const auto p = pair_oracle(0.15, -0.05, 0.2, 0.5);
  const double expected[4] = {p[0], p[2], p[1], p[3]};
  double chi2 = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double e = expected[k] * req.reads_per_run;
    chi2 += (counts[static_cast<std::size_t>(k)] - e) * (counts[static_cast<std::size_t>(k)] - e) / e;
  }
  const double pv = stats::chi2_sf(chi2, 3.0);
  return check("pair_sampler_matches_boltzmann", pv > 0.0027, fmt::format("chi2 {:.3f}, p = {:.4f}", chi2, pv));
}

CheckResult zero_correction_equivalence(std::uint64_t seed) {
  auto g = build_chimera(1, 1, 4);
  DeviceModel d = make_synthetic_device(g, SyntheticDeviceOptions{});
  d.sampler.burn_in_sweeps = 50;
  d.master_seed = seed;
  BenchmarkOptions o;
  o.ranges = {2};
  o.instances_per_range = 2;
  o.gauges = 2;
  o.runs = 2;
  o.reads = 50;
  o.seed = seed;
  CalibrationTable zero;
  IterationRecord rec;
  for (int q : g->active()) {
    TargetEstimate t;
    t.qubit = q;
    rec.targets.push_back(t);
  }
  zero.h_history.push_back(rec);
  const auto records = run_benchmark(d, *g, o, &zero);
  bool same = true;
  for (std::size_t k = 0; k + 1 < records.size(); k += 2) same = same && records[k].energies == records[k + 1].energies;
  return check("zero_correction_reproduces_uncorrected", same, fmt::format("{} paired records", records.size() / 2));
}

CheckResult scan_determinism(std::uint64_t seed) {
  auto g = build_chimera(1, 1, 4);
  SyntheticDeviceOptions so;
  so.seed = seed;
  const DeviceModel d = make_synthetic_device(g, so);
  ScanProtocol p;
  p.values = evenly_spaced(-0.1, 0.1, 5);
  p.runs = 5;
  p.reads = 200;
  p.stream = 11;
  const auto a = run_h_scan(d, p);
  const auto b = run_h_scan(d, p);
  bool same = a.qubits.size() == b.qubits.size();
  for (std::size_t k = 0; same && k < a.qubits.size(); ++k) same = a.qubits[k].up_counts == b.qubits[k].up_counts;
  return check("replay_determinism", same, "");
}

CheckResult elite_bound(std::uint64_t seed) {
  const auto inst = random_small(10, derive_seed(seed, {label_key("verify-elite")}));
  const double ground = brute_force_spectrum(inst).front().energy;
  const auto p = boltzmann_probs(inst, 0.05);
  Rng rng = make_rng(seed, {label_key("verify-elite-draws")});
  std::discrete_distribution<std::size_t> draw(p.begin(), p.end());
  std::vector<double> e;
  for (int k = 0; k < 2000; ++k) e.push_back(energy(inst, SpinConfig::from_state(draw(rng), 10)));
  const double m = elite_mean(e, 0.02);
  return check("elite_mean_above_ground", m >= ground - 1e-9 && m - ground < 0.5,
               fmt::format("elite {:.4f}, ground {:.4f}", m, ground));
}

}  // namespace

std::vector<CheckResult> run_oracle_suite(const VerifyOptions& options) {
  const AlphaFn alpha = options.mutate_alpha ? AlphaFn(mutated_alpha) : AlphaFn(alpha_from_prob);
  const std::vector<std::function<CheckResult()>> checks{
      [&] { return alpha_roundtrip(alpha, options.seed); },
      [&] { return single_spin_closed_form(alpha); },
      [] { return exact_estimator_sweep(); },
      [] { return naive_reduction(); },
      [&] { return symmetric_identity(options.seed); },
      [&] { return energy_oracle(options.seed); },
      [&] { return gauge_invariance(options.seed); },
      [] { return boltzmann_oracle(); },
      [] { return chimera_counts(); },
      [] { return line_fit_oracle(); },
      [] { return correction_algebra(); },
      [] { return scoring_rules(); },
      [&] { return pair_sampler(options.seed); },
      [&] { return zero_correction_equivalence(options.seed); },
      [&] { return scan_determinism(options.seed); },
      [&] { return elite_bound(options.seed); },
  };
  std::vector<CheckResult> out;
  for (const auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"exception", false, e.what()});
    }
  }
  return out;
}

nlohmann::json to_json(const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    checks.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    all = all && r.passed;
  }
  return {{"passed", all}, {"checks", checks}};
}

}  // namespace qabias
