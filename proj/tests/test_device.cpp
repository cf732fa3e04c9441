#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "qabias/chimera.hpp"
#include "qabias/device.hpp"
#include "qabias/stats.hpp"

using namespace qabias;

namespace {

/// One cell, one coupler (1,5), every other qubit free.
DeviceModel single_pair_device(double hb1, double hb5, double jb, double t) {
  auto g = build_chimera(1, 1, 4);
  DeviceModel d = ideal_device(g, t, 3);
  d.h_bias[1] = hb1;
  d.h_bias[5] = hb5;
  d.j_bias[Edge(1, 5)] = jb;
  return d;
}

}  // namespace

TEST_CASE("DAC rounding breaks ties toward +infinity") {
  CHECK(quantize_dac(0.25, 0.5) == 0.5);
  CHECK(quantize_dac(-0.25, 0.5) == 0.0);
  CHECK(quantize_dac(0.74, 0.5) == 0.5);
  CHECK(quantize_dac(0.123, 0.0) == 0.123);
  CHECK_THROWS(quantize_dac(0.1, -1.0));
}

TEST_CASE("effective instance adds biases on every qubit but only on used couplers") {
  auto d = single_pair_device(0.1, -0.2, 0.05, 0.25);
  const IsingInstance none(d.graph, {}, {});
  const auto eff = effective_instance(d, none, 1);
  CHECK(eff.field(1) == doctest::Approx(0.1));
  CHECK(eff.field(5) == doctest::Approx(-0.2));
  CHECK(eff.couplings().empty());

  const IsingInstance used(d.graph, {{1, 0.3}}, {{Edge(1, 5), 0.0}});
  const auto eff2 = effective_instance(d, used, 1);
  CHECK(eff2.field(1) == doctest::Approx(0.4));
  CHECK(eff2.coupling(Edge(1, 5)) == doctest::Approx(0.05));
}

TEST_CASE("run noise is frozen within a run and differs between runs") {
  auto d = single_pair_device(0.0, 0.0, 0.0, 0.25);
  d.run_noise_sd_h = 0.02;
  const IsingInstance p(d.graph, {}, {});
  CHECK(effective_instance(d, p, 7) == effective_instance(d, p, 7));
  CHECK_FALSE(effective_instance(d, p, 7) == effective_instance(d, p, 8));
}

TEST_CASE("thermal parameters are scaled by the local temperatures") {
  auto d = single_pair_device(0.0, 0.0, 0.0, 0.25);
  d.qubit_temperature[1] = 0.5;
  d.coupler_temperature[Edge(1, 5)] = 0.2;
  const IsingInstance eff(d.graph, {{1, 0.1}}, {{Edge(1, 5), 0.1}});
  const auto dense = thermal_parameters(d, eff);
  CHECK(dense.h[0] == doctest::Approx(0.2));
  REQUIRE(dense.edge_w.size() == 1);
  CHECK(dense.edge_w[0] == doctest::Approx(0.5));

  d.saturation = {true, 0.1};
  const auto sat = thermal_parameters(d, eff);
  CHECK(sat.h[0] == doctest::Approx(0.1 * std::tanh(2.0)));
}

TEST_CASE("pair pieces are sampled from the closed form") {
  const double t = 0.25;
  auto d = single_pair_device(0.03, -0.02, 0.04, t);
  const IsingInstance prog(d.graph, {{1, 0.1}, {5, -0.05}}, {{Edge(1, 5), 0.2}});
  CHECK(is_pair_decomposable(prog));
  const int reads = 200000;
  const auto counts = sample_counts(d, prog, {1, reads, 77, "pair"});
  REQUIRE(counts.size() == 1);
  const ComponentCounts* piece = nullptr;
  for (const auto& c : counts[0].components) {
    if (c.qubits == std::vector<int>{1, 5}) piece = &c;
  }
  REQUIRE(piece != nullptr);
  // Storage order uu, du, ud, dd; the oracle is uu, ud, du, dd.
  const auto ref = oracle::pair(0.13, -0.07, 0.24, t);
  const std::array<double, 4> expect{ref[0], ref[2], ref[1], ref[3]};
  double chi2 = 0;
  for (int k = 0; k < 4; ++k) {
    const double e = expect[static_cast<std::size_t>(k)] * reads;
    const double o = piece->counts[static_cast<std::size_t>(k)];
    chi2 += (o - e) * (o - e) / e;
  }
  CHECK(stats::chi2_sf(chi2, 3) > 1e-3);
}

TEST_CASE("sample and sample_counts agree on pair instances") {
  auto d = single_pair_device(0.05, 0.0, 0.0, 0.3);
  const IsingInstance prog(d.graph, {}, {{Edge(1, 5), -0.1}});
  const auto sets = sample(d, prog, {2, 20000, 5, "x"});
  REQUIRE(sets.size() == 2);
  double up = 0;
  for (const auto& r : sets[1].reads) up += r[1] == 1 ? 1 : 0;
  up /= 20000.0;
  // Marginal of qubit 1 given field 0.05 and coupler -0.1 to a free spin.
  const auto ref = oracle::pair(0.05, 0.0, -0.1, 0.3);
  CHECK(up == doctest::Approx(ref[0] + ref[1]).epsilon(0.03));
}

TEST_CASE("sampling is deterministic per stream") {
  auto d = single_pair_device(0.05, 0.0, 0.0, 0.3);
  d.run_noise_sd_h = 0.01;
  const IsingInstance prog(d.graph, {}, {{Edge(1, 5), -0.1}});
  const auto a = sample_counts(d, prog, {3, 100, 5, "x"});
  const auto b = sample_counts(d, prog, {3, 100, 5, "x"});
  const auto c = sample_counts(d, prog, {3, 100, 6, "x"});
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t k = 0; k < a[r].components.size(); ++k) {
      CHECK(a[r].components[k].counts == b[r].components[k].counts);
    }
  }
  bool differs = false;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t k = 0; k < a[r].components.size(); ++k) {
      differs = differs || a[r].components[k].counts != c[r].components[k].counts;
    }
  }
  CHECK(differs);
}

TEST_CASE("Metropolis reproduces Boltzmann on a small connected instance") {
  auto g = build_chimera(1, 1, 2);  // 4 qubits, K_{2,2}
  DeviceModel d = ideal_device(g, 0.5, 9);
  d.sampler = {200, 2, 1.0, 0};
  const IsingInstance prog(g, {{1, 0.2}, {3, -0.1}},
                           {{Edge(1, 3), 0.5}, {Edge(1, 4), -0.3}, {Edge(2, 3), 0.4}, {Edge(2, 4), 0.6}});
  CHECK_FALSE(is_pair_decomposable(prog));
  const auto sets = sample(d, prog, {20, 2000, 1, "m"});
  std::vector<double> freq(16, 0.0);
  for (const auto& s : sets) {
    for (const auto& r : s.reads) freq[r.to_state()] += 1.0 / 40000.0;
  }
  oracle::Problem p{4, {{1, 0.2}, {3, -0.1}}, {{{1, 3}, 0.5}, {{1, 4}, -0.3}, {{2, 3}, 0.4}, {{2, 4}, 0.6}}};
  const auto ref = oracle::boltzmann(p, 0.5);
  double tv = 0;
  for (std::size_t s = 0; s < 16; ++s) tv += 0.5 * std::abs(freq[s] - ref[s]);
  CHECK(tv < 0.02);
}

TEST_CASE("annealed reads find the ground state of an easy ferromagnet") {
  auto g = build_chimera(1, 1, 4);
  DeviceModel d = ideal_device(g, 0.05, 9);
  d.sampler = {0, 1, 20.0, 50};
  CouplingMap j;
  for (const auto& e : g->edges()) j[e] = -1.0;
  const IsingInstance prog(g, {}, j);
  const auto sets = sample(d, prog, {1, 50, 1, "f"});
  int aligned = 0;
  for (const auto& r : sets[0].reads) {
    bool same = true;
    for (int q = 2; q <= 8; ++q) same = same && r[q] == r[1];
    aligned += same ? 1 : 0;
  }
  CHECK(aligned >= 45);
}

TEST_CASE("synthetic devices draw the configured bias spread") {
  const auto g = build_chimera(8, 8, 4);
  const auto d = make_synthetic_device(g, {});
  CHECK_NOTHROW(d.validate());
  std::vector<double> hb;
  for (const auto& [q, v] : d.h_bias) hb.push_back(v);
  std::vector<double> jb;
  for (const auto& [e, v] : d.j_bias) jb.push_back(v);
  CHECK(stats::stddev(hb) == doctest::Approx(0.05).epsilon(0.15));
  CHECK(stats::stddev(jb) == doctest::Approx(0.035).epsilon(0.15));
  CHECK(d.temperature(1) == 0.25);
}

TEST_CASE("device validation") {
  auto d = single_pair_device(0, 0, 0, 0.25);
  d.sampler.start_temperature_factor = 0.5;
  CHECK_THROWS(d.validate());
  d = single_pair_device(0, 0, 0, 0.25);
  d.h_bias.erase(1);
  CHECK_THROWS(d.validate());
}
