#include "qabias/calibration.hpp"

#include <cmath>

#include <fmt/format.h>

#include "qabias/stats.hpp"

namespace qabias {

namespace {

double ratio_log(double uu, double ud, double du, double dd) { return 0.25 * std::log((ud * du) / (uu * dd)); }

}  // namespace

double ScanData::p_up(const QubitSeries& q, std::size_t value, std::size_t run) const {
  return static_cast<double>(q.up_counts[value][run]) / static_cast<double>(reads_per_run);
}

PairProbs ScanData::pair_probs(const CouplerSeries& c, std::size_t value, std::size_t run) const {
  const auto& k = c.counts[value][run];
  const double n = static_cast<double>(reads_per_run);
  return {k[0] / n, k[2] / n, k[1] / n, k[3] / n};
}

const QubitSeries& ScanData::qubit(int q) const {
  for (const auto& s : qubits) {
    if (s.qubit == q) return s;
  }
  throw std::out_of_range(fmt::format("scan has no data for qubit {}", q));
}

const CouplerSeries& ScanData::coupler(const Edge& e) const {
  for (const auto& s : couplers) {
    if (s.edge == e) return s;
  }
  throw std::out_of_range(fmt::format("scan has no data for coupler ({})", e.key()));
}

void ScanData::validate() const {
  if (runs < 1 || reads_per_run < 1) throw std::invalid_argument("scan needs runs and reads >= 1");
  if (programmed_values.empty()) throw std::invalid_argument("scan has no programmed values");
  const auto values = programmed_values.size();
  const auto nruns = static_cast<std::size_t>(runs);
  const auto reads = static_cast<std::uint64_t>(reads_per_run);
  for (const auto& q : qubits) {
    if (q.up_counts.size() != values) throw std::invalid_argument(fmt::format("qubit {} series has wrong size", q.qubit));
    for (const auto& per_run : q.up_counts) {
      if (per_run.size() != nruns) throw std::invalid_argument(fmt::format("qubit {} has wrong run count", q.qubit));
      for (auto c : per_run) {
        if (c > reads) throw std::invalid_argument(fmt::format("qubit {} count exceeds reads", q.qubit));
      }
    }
  }
  for (const auto& c : couplers) {
    if (c.counts.size() != values) throw std::invalid_argument(fmt::format("coupler ({}) series has wrong size", c.edge.key()));
    for (const auto& per_run : c.counts) {
      if (per_run.size() != nruns) throw std::invalid_argument(fmt::format("coupler ({}) has wrong run count", c.edge.key()));
      for (const auto& k : per_run) {
        if (std::uint64_t{k[0]} + k[1] + k[2] + k[3] != reads) {
          throw std::invalid_argument(fmt::format("coupler ({}) outcome counts do not sum to reads", c.edge.key()));
        }
      }
    }
  }
}

void Diagnostics::note(std::string message) { messages.push_back(std::move(message)); }

double alpha_from_prob(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error(fmt::format("alpha needs 0 < p < 1 (got {})", p));
  return 0.5 * std::log((1.0 - p) / p);
}

double clamp_probability(double p, int reads, Diagnostics* diag) {
  if (reads < 1) throw std::invalid_argument("clamp_probability needs reads >= 1");
  const double lo = 0.5 / reads;
  if (p >= lo && p <= 1.0 - lo) return p;
  const double clamped = std::clamp(p, lo, 1.0 - lo);
  if (diag) ++diag->clamped;
  return clamped;
}

double alpha_ij_naive(double p_aligned) { return alpha_from_prob(p_aligned); }

double alpha_ij_exact(const PairProbs& p) {
  for (double v : {p.uu, p.ud, p.du, p.dd}) {
    if (!(v > 0.0 && v < 1.0)) throw std::domain_error(fmt::format("pair probability {} outside (0, 1)", v));
  }
  const double sum = p.uu + p.ud + p.du + p.dd;
  if (std::abs(sum - 1.0) > 1e-6) throw std::domain_error(fmt::format("pair probabilities sum to {}", sum));
  return ratio_log(p.uu, p.ud, p.du, p.dd);
}

std::vector<Point> median_alpha(const ScanData& scan, int qubit, Diagnostics* diag) {
  const QubitSeries& q = scan.qubit(qubit);
  std::vector<Point> out;
  std::vector<double> ps(static_cast<std::size_t>(scan.runs));
  for (std::size_t v = 0; v < scan.programmed_values.size(); ++v) {
    for (std::size_t r = 0; r < ps.size(); ++r) ps[r] = scan.p_up(q, v, r);
    const double p = clamp_probability(stats::median(ps), scan.reads_per_run, diag);
    out.push_back({scan.programmed_values[v], alpha_from_prob(p)});
  }
  return out;
}

std::vector<Point> median_alpha(const ScanData& scan, const Edge& coupler, JEstimator estimator, Diagnostics* diag) {
  const CouplerSeries& c = scan.coupler(coupler);
  const auto runs = static_cast<std::size_t>(scan.runs);
  std::vector<Point> out;
  std::array<std::vector<double>, 4> ps;
  for (auto& v : ps) v.resize(runs);
  for (std::size_t v = 0; v < scan.programmed_values.size(); ++v) {
    for (std::size_t r = 0; r < runs; ++r) {
      const PairProbs p = scan.pair_probs(c, v, r);
      ps[0][r] = p.uu;
      ps[1][r] = p.ud;
      ps[2][r] = p.du;
      ps[3][r] = p.dd;
    }
    double alpha = 0.0;
    if (estimator == JEstimator::naive) {
      std::vector<double> aligned(runs);
      for (std::size_t r = 0; r < runs; ++r) aligned[r] = ps[0][r] + ps[3][r];
      alpha = alpha_ij_naive(clamp_probability(stats::median(aligned), scan.reads_per_run, diag));
    } else {
      std::array<double, 4> m{};
      for (std::size_t k = 0; k < 4; ++k) m[k] = clamp_probability(stats::median(ps[k]), scan.reads_per_run, diag);
      alpha = ratio_log(m[0], m[1], m[2], m[3]);
    }
    out.push_back({scan.programmed_values[v], alpha});
  }
  return out;
}

LineFit fit_line(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("fit_line needs at least two points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.x - mx) * (p.x - mx);
    sxy += (p.x - mx) * (p.y - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line needs at least two distinct x values");
  LineFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (const auto& p : points) {
    const double r = p.y - (fit.intercept + fit.slope * p.x);
    fit.rss += r * r;
  }
  if (n > 2) {
    const double s2 = fit.rss / static_cast<double>(n - 2);
    fit.slope_se = std::sqrt(s2 / sxx);
    fit.intercept_se = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  }
  return fit;
}

ScanAnalysis analyze_scan(const ScanData& scan, JEstimator estimator, Diagnostics* diag) {
  scan.validate();
  ScanAnalysis a;
  a.kind = scan.kind;
  a.estimator = estimator;
  auto add = [&](TargetFit t) {
    t.fit = fit_line(t.curve);
    t.flagged = !(t.fit.slope > 0.0);
    a.targets.push_back(std::move(t));
  };
  if (scan.kind == ScanKind::h) {
    for (const auto& q : scan.qubits) {
      TargetFit t;
      t.qubit = q.qubit;
      t.curve = median_alpha(scan, q.qubit, diag);
      add(std::move(t));
    }
  } else {
    for (const auto& c : scan.couplers) {
      TargetFit t;
      t.edge = c.edge;
      t.curve = median_alpha(scan, c.edge, estimator, diag);
      add(std::move(t));
    }
  }
  if (a.targets.empty()) throw std::invalid_argument("scan has no targets");
  std::vector<double> ys(a.targets.size());
  for (std::size_t v = 0; v < scan.programmed_values.size(); ++v) {
    for (std::size_t t = 0; t < a.targets.size(); ++t) ys[t] = a.targets[t].curve[v].y;
    a.median_curve.push_back({scan.programmed_values[v], stats::median(ys)});
  }
  a.median_fit = fit_line(a.median_curve);
  return a;
}

double estimate_device_temperature(const ScanAnalysis& analysis, TemperatureMethod method, Diagnostics* diag) {
  if (method == TemperatureMethod::median) {
    if (!(analysis.median_fit.slope > 0.0)) {
      throw std::runtime_error(fmt::format("median alpha curve has non-positive slope {}", analysis.median_fit.slope));
    }
    return 1.0 / analysis.median_fit.slope;
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& t : analysis.targets) {
    if (t.flagged) {
      if (diag) {
        diag->note(t.qubit != 0 ? fmt::format("qubit {} has non-positive slope {}; excluded from mean temperature",
                                              t.qubit, t.fit.slope)
                                : fmt::format("coupler ({}) has non-positive slope {}; excluded from mean temperature",
                                              t.edge.key(), t.fit.slope));
      }
      continue;
    }
    sum += 1.0 / t.fit.slope;
    ++used;
  }
  if (used == 0) throw std::runtime_error("no target has a positive slope");
  return sum / static_cast<double>(used);
}

double estimate_device_temperature(const ScanData& scan, TemperatureMethod method, JEstimator estimator) {
  return estimate_device_temperature(analyze_scan(scan, estimator), method);
}

namespace {

BiasEstimate scale_intercept(const TargetFit& t, double temperature, BiasScaling scaling, Diagnostics* diag) {
  if (!(temperature > 0.0)) throw std::invalid_argument("bias scaling needs a positive temperature");
  double scale = temperature;
  if (scaling == BiasScaling::per_target_temperature) {
    if (t.flagged) {
      if (diag) diag->note("flagged target scaled by the device temperature");
    } else {
      scale = 1.0 / t.fit.slope;
    }
  }
  return {t.fit.intercept * scale, (t.fit.intercept_se * scale) * (t.fit.intercept_se * scale)};
}

}  // namespace

std::map<int, BiasEstimate> estimate_h_biases(const ScanAnalysis& analysis, double temperature, BiasScaling scaling,
                                              Diagnostics* diag) {
  if (analysis.kind != ScanKind::h) throw std::invalid_argument("estimate_h_biases needs a field scan");
  std::map<int, BiasEstimate> out;
  for (const auto& t : analysis.targets) out.emplace(t.qubit, scale_intercept(t, temperature, scaling, diag));
  return out;
}

std::map<Edge, BiasEstimate> estimate_j_biases(const ScanAnalysis& analysis, double temperature, BiasScaling scaling,
                                               Diagnostics* diag) {
  if (analysis.kind != ScanKind::j) throw std::invalid_argument("estimate_j_biases needs a coupler scan");
  std::map<Edge, BiasEstimate> out;
  for (const auto& t : analysis.targets) out.emplace(t.edge, scale_intercept(t, temperature, scaling, diag));
  return out;
}

double damped_correction(double estimate, double estimate_variance, double prior_variance) {
  if (estimate_variance < 0.0 || prior_variance < 0.0) throw std::invalid_argument("variances must be >= 0");
  if (estimate_variance == 0.0) return estimate;
  return estimate * prior_variance / (prior_variance + estimate_variance);
}

NoiseFloor noise_floor_stats(const ScanData& scan, double temperature, JEstimator estimator, Diagnostics* diag) {
  scan.validate();
  if (scan.runs < 2) throw std::invalid_argument("noise floor needs at least two runs");
  const auto runs = static_cast<std::size_t>(scan.runs);
  NoiseFloor out;
  std::vector<double> est(runs);
  auto finish = [&](TargetNoise t) {
    t.mean_sigma = stats::mean(t.sigma);
    out.targets.push_back(std::move(t));
  };
  for (const auto& q : scan.qubits) {
    TargetNoise t;
    t.qubit = q.qubit;
    for (std::size_t v = 0; v < scan.programmed_values.size(); ++v) {
      for (std::size_t r = 0; r < runs; ++r) {
        est[r] = alpha_from_prob(clamp_probability(scan.p_up(q, v, r), scan.reads_per_run, diag)) * temperature;
      }
      t.sigma.push_back(stats::stddev(est));
    }
    finish(std::move(t));
  }
  for (const auto& c : scan.couplers) {
    TargetNoise t;
    t.edge = c.edge;
    for (std::size_t v = 0; v < scan.programmed_values.size(); ++v) {
      for (std::size_t r = 0; r < runs; ++r) {
        const PairProbs p = scan.pair_probs(c, v, r);
        if (estimator == JEstimator::naive) {
          est[r] = alpha_ij_naive(clamp_probability(p.uu + p.dd, scan.reads_per_run, diag)) * temperature;
        } else {
          const auto k = [&](double x) { return clamp_probability(x, scan.reads_per_run, diag); };
          est[r] = ratio_log(k(p.uu), k(p.ud), k(p.du), k(p.dd)) * temperature;
        }
      }
      t.sigma.push_back(stats::stddev(est));
    }
    finish(std::move(t));
  }
  if (out.targets.empty()) throw std::invalid_argument("scan has no targets");
  double sum = 0.0;
  for (const auto& t : out.targets) sum += t.mean_sigma;
  out.grand_mean = sum / static_cast<double>(out.targets.size());
  return out;
}

std::vector<FieldMap> CalibrationTable::h_corrections() const {
  std::vector<FieldMap> out;
  for (const auto& it : h_history) {
    FieldMap m;
    for (const auto& t : it.targets) m.emplace(t.qubit, t.correction);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<CouplingMap> CalibrationTable::j_corrections() const {
  std::vector<CouplingMap> out;
  for (const auto& it : j_history) {
    CouplingMap m;
    for (const auto& t : it.targets) m.emplace(t.edge, t.correction);
    out.push_back(std::move(m));
  }
  return out;
}

FieldMap CalibrationTable::cumulative_h_correction() const {
  FieldMap sum;
  for (const auto& step : h_corrections()) {
    for (const auto& [q, v] : step) sum[q] += v;
  }
  return sum;
}

CouplingMap CalibrationTable::cumulative_j_correction() const {
  CouplingMap sum;
  for (const auto& step : j_corrections()) {
    for (const auto& [e, v] : step) sum[e] += v;
  }
  return sum;
}

std::map<int, double> CalibrationTable::h_bias_vector(int iteration) const {
  if (iteration < 1 || iteration > static_cast<int>(h_history.size())) {
    throw std::out_of_range(fmt::format("table has no field iteration {}", iteration));
  }
  std::map<int, double> out;
  for (const auto& t : h_history[static_cast<std::size_t>(iteration - 1)].targets) out.emplace(t.qubit, t.bias);
  return out;
}

double persistence_correlation(const CalibrationTable& a, const CalibrationTable& b, int iteration) {
  const auto va = a.h_bias_vector(iteration);
  const auto vb = b.h_bias_vector(iteration);
  if (va.size() != vb.size()) throw std::invalid_argument("tables cover different qubit sets");
  std::vector<double> xa, xb;
  for (auto ia = va.begin(), ib = vb.begin(); ia != va.end(); ++ia, ++ib) {
    if (ia->first != ib->first) throw std::invalid_argument("tables cover different qubit sets");
    xa.push_back(ia->second);
    xb.push_back(ib->second);
  }
  return stats::pearson(xa, xb);
}

const char* to_string(ScanKind kind) { return kind == ScanKind::h ? "h" : "J"; }
const char* to_string(JEstimator estimator) { return estimator == JEstimator::naive ? "naive" : "exact"; }
const char* to_string(TemperatureMethod method) { return method == TemperatureMethod::mean ? "mean" : "median"; }
const char* to_string(BiasScaling scaling) {
  return scaling == BiasScaling::device_temperature ? "device" : "per-target";
}

}  // namespace qabias
