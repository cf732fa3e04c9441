#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qabias/calibration.hpp"
#include "qabias/chimera.hpp"
#include "qabias/stats.hpp"

using namespace qabias;

TEST_CASE("alpha of a probability") {
  CHECK(alpha_from_prob(0.5) == 0.0);
  CHECK(alpha_from_prob(0.3) == doctest::Approx(0.42364893019360184));
  CHECK(alpha_from_prob(0.7) == doctest::Approx(-0.42364893019360184));
  CHECK_THROWS(alpha_from_prob(0.0));
  CHECK_THROWS(alpha_from_prob(1.0));
  // A single spin at field h has alpha = h / T.
  for (double h : {-0.3, -0.05, 0.0, 0.12, 0.4}) {
    CHECK(alpha_from_prob(oracle::p_up(h, 0.25)) == doctest::Approx(h / 0.25));
  }
}

TEST_CASE("probability clamping") {
  Diagnostics diag;
  CHECK(clamp_probability(0.0, 1000, &diag) == doctest::Approx(0.0005));
  CHECK(clamp_probability(1.0, 1000, &diag) == doctest::Approx(0.9995));
  CHECK(clamp_probability(0.4, 1000, &diag) == 0.4);
  CHECK(diag.clamped == 2);
}

TEST_CASE("coupler estimators against the closed form") {
  // Frozen from the closed-form pair distribution at h = (0.1, -0.05), J = 0.2, T = 0.25.
  const PairProbs p{0.05939964305206811, 0.1972137601016817, 0.6547727423100993, 0.08861385453615088};
  CHECK(alpha_ij_exact(p) == doctest::Approx(0.8));
  CHECK(alpha_ij_naive(p.uu + p.dd) == doctest::Approx(0.8751336074690393));

  // Exact estimator is field independent; the naive one only agrees at zero field.
  for (double h1 : {-0.2, 0.0, 0.15}) {
    for (double h2 : {-0.1, 0.0, 0.3}) {
      for (double j : {-0.4, 0.05, 0.3}) {
        const auto r = oracle::pair(h1, h2, j, 0.3);
        CHECK(alpha_ij_exact({r[0], r[1], r[2], r[3]}) == doctest::Approx(j / 0.3));
        if (h1 == 0.0 && h2 == 0.0) CHECK(alpha_ij_naive(r[0] + r[3]) == doctest::Approx(j / 0.3));
      }
    }
  }
}

TEST_CASE("line fit matches the normal equations") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<Point> pts;
  std::vector<double> x, y;
  for (int i = 0; i < 25; ++i) {
    const double xi = -0.1 + 0.2 * i / 24.0;
    pts.push_back({xi, 4.0 * xi + 0.2 + noise(rng)});
    x.push_back(xi);
    y.push_back(pts.back().y);
  }
  const auto fit = fit_line(pts);
  const auto [slope, intercept] = oracle::line(x, y);
  CHECK(fit.slope == doctest::Approx(slope));
  CHECK(fit.intercept == doctest::Approx(intercept));
  CHECK(fit.points == 25);
  CHECK(fit.slope_se > 0.0);

  const std::vector<Point> exact{{0, 1}, {1, 3}, {2, 5}};
  const auto f = fit_line(exact);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.rss == doctest::Approx(0.0));
}

TEST_CASE("iterative correction subtracts the applied history") {
  const std::map<int, double> desired{{1, 0.0}, {2, 0.5}};
  const std::vector<std::map<int, double>> applied{{{1, 0.1}, {2, -0.05}}, {{1, 0.02}}};
  const auto out = iterate_correction<int>(applied, desired);
  CHECK(out.at(1) == doctest::Approx(-0.12));
  CHECK(out.at(2) == doctest::Approx(0.55));
  const std::vector<std::map<int, double>> stray{{{3, 0.1}}};
  CHECK_THROWS(iterate_correction<int>(stray, desired));
}

TEST_CASE("damping shrinks by the prior weight") {
  CHECK(damped_correction(0.1, 0.0, 0.0) == 0.1);
  CHECK(damped_correction(0.1, 1e-4, 3e-4) == doctest::Approx(0.075));
  CHECK(damped_correction(0.1, 1e-4, 0.0) == 0.0);
  CHECK_THROWS(damped_correction(0.1, -1.0, 0.0));
}

namespace {

DeviceModel biased_cell(double t) {
  SyntheticDeviceOptions o;
  o.temperature = t;
  o.run_noise_sd_h = 0.0;
  o.run_noise_sd_j = 0.0;
  o.seed = 12;
  return make_synthetic_device(build_chimera(2, 2, 4), o);
}

}  // namespace

TEST_CASE("field scan recovers the injected biases and the temperature") {
  const auto d = biased_cell(0.25);
  ScanProtocol p;
  p.values = evenly_spaced(-0.1, 0.1, 11);
  p.runs = 10;
  p.reads = 5000;
  p.stream = 3;
  const auto scan = run_h_scan(d, p);
  CHECK(scan.qubits.size() == 32);
  const auto a = analyze_scan(scan);
  const double t = estimate_device_temperature(a, TemperatureMethod::median);
  CHECK(t == doctest::Approx(0.25).epsilon(0.05));
  const auto biases = estimate_h_biases(a, t);
  std::vector<double> truth, est;
  for (const auto& [q, b] : biases) {
    truth.push_back(d.h_bias.at(q));
    est.push_back(b.value);
    CHECK(b.variance > 0.0);
  }
  CHECK(stats::pearson(truth, est) > 0.97);

  // Correcting with the estimates leaves a much smaller residual.
  FieldMap corr;
  for (const auto& [q, b] : biases) corr[q] = b.value;
  p.iteration = 2;
  p.stream = 4;
  const auto a2 = analyze_scan(run_h_scan(d, p, corr));
  std::vector<double> residual;
  for (const auto& [q, b] : estimate_h_biases(a2, t)) residual.push_back(b.value);
  CHECK(stats::stddev(residual) < 0.5 * stats::stddev(est));
}

TEST_CASE("coupler scan with the exact estimator recovers coupler biases") {
  const auto d = biased_cell(0.25);
  ScanProtocol p;
  p.values = evenly_spaced(-0.1, 0.1, 7);
  p.runs = 10;
  p.reads = 5000;
  p.stream = 8;
  const auto batches = edge_batches(*d.graph);
  const auto scan = run_j_scan(d, p, batches);
  CHECK(scan.couplers.size() == d.graph->edges().size());
  const auto a = analyze_scan(scan, JEstimator::exact);
  const double t = estimate_device_temperature(a, TemperatureMethod::median);
  std::vector<double> truth, est;
  for (const auto& [e, b] : estimate_j_biases(a, t)) {
    truth.push_back(d.j_bias.at(e));
    est.push_back(b.value);
  }
  CHECK(stats::pearson(truth, est) > 0.9);
}

TEST_CASE("temperature methods agree on a uniform device") {
  const auto d = biased_cell(0.2);
  ScanProtocol p;
  p.values = evenly_spaced(-0.1, 0.1, 9);
  p.runs = 5;
  p.reads = 4000;
  const auto a = analyze_scan(run_h_scan(d, p));
  CHECK(estimate_device_temperature(a, TemperatureMethod::mean) == doctest::Approx(0.2).epsilon(0.05));
  CHECK(estimate_device_temperature(a, TemperatureMethod::median) == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("noise floor of a noise-free device is the binomial floor") {
  const auto d = biased_cell(0.25);
  ScanProtocol p;
  p.values = {0.0};
  p.runs = 200;
  p.reads = 1000;
  const auto scan = run_h_scan(d, p);
  const auto floor = noise_floor_stats(scan, 0.25);
  // sd of alpha(p_hat) * T at p near 1/2 is T / (2 sqrt(N p (1-p))) = T / sqrt(N).
  CHECK(floor.grand_mean == doctest::Approx(0.25 / std::sqrt(1000.0)).epsilon(0.1));
}

TEST_CASE("table bookkeeping") {
  CalibrationTable t;
  IterationRecord r1;
  r1.targets = {{1, {}, 0.1, 0, 0.1, 0, 0, false}, {2, {}, -0.2, 0, -0.2, 0, 0, false}};
  IterationRecord r2;
  r2.k = 2;
  r2.targets = {{1, {}, 0.01, 0, 0.01, 0, 0, false}, {2, {}, 0.3, 0, 0.0, 0, 0, true}};
  t.h_history = {r1, r2};
  const auto c = t.cumulative_h_correction();
  CHECK(c.at(1) == doctest::Approx(0.11));
  CHECK(c.at(2) == doctest::Approx(-0.2));
  CHECK(t.h_corrections().size() == 2);
  CHECK(t.h_bias_vector(1).at(2) == doctest::Approx(-0.2));
  CHECK(persistence_correlation(t, t) == doctest::Approx(1.0));
}
