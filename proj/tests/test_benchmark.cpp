#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "qabias/benchmark.hpp"
#include "qabias/chimera.hpp"
#include "qabias/ising.hpp"

using namespace qabias;

namespace {

EnergyRecord record(const std::string& id, int range, Condition c, std::vector<double> e) {
  EnergyRecord r;
  r.instance_id = id;
  r.range = range;
  r.condition = c;
  r.gauges = 1;
  r.runs = 1;
  r.reads = static_cast<int>(e.size());
  r.energies = std::move(e);
  return r;
}

}  // namespace

TEST_CASE("elite mean of the lowest fraction") {
  std::vector<double> e{-3, -3, -1};
  for (int i = 0; i < 97; ++i) e.push_back(i);
  CHECK(elite_mean(e, 0.02) == doctest::Approx(-3.0));
  CHECK(elite_mean(e, 1.0) == doctest::Approx(oracle::elite(e, 1.0)));
  // 2% of 50 reads is exactly one read.
  CHECK(elite_mean(std::vector<double>(50, 1.0), 0.02) == 1.0);
  CHECK_THROWS(elite_mean(std::vector<double>{}, 0.02));
  CHECK_THROWS(elite_mean(e, 0.0));

  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> d(-20, 20);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(1 + rng() % 400);
    for (auto& v : x) v = d(rng);
    for (double f : {0.02, 0.1, 0.5}) CHECK(elite_mean(x, f) == doctest::Approx(oracle::elite(x, f)));
  }
}

TEST_CASE("elite mean is unchanged by a new worst sample while the count is fixed") {
  std::vector<double> e(120);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = static_cast<double>(i % 17);
  const double before = elite_mean(e, 0.02);  // ceil(2.4) = 3
  e.push_back(100.0);                          // ceil(2.42) = 3
  CHECK(elite_mean(e, 0.02) == before);
}

TEST_CASE("greedy comparison is lexicographic over levels and counts") {
  using C = Condition;
  const auto a = record("x", 1, C::uncorrected, {-2, 0, 0, 1});
  const auto lower = record("x", 1, C::h_corrected, {-3, 5, 5, 5});
  const auto more = record("x", 1, C::h_corrected, {-2, -2, 5, 5});
  const auto next = record("x", 1, C::h_corrected, {-2, -1, 5, 5});
  CHECK(greedy_compare(lower, a) == Winner::first);
  CHECK(greedy_compare(a, lower) == Winner::second);
  CHECK(greedy_compare(more, a) == Winner::first);
  CHECK(greedy_compare(next, a) == Winner::first);
  CHECK(greedy_compare(a, a) == Winner::tie);
  CHECK_THROWS(greedy_compare(a, record("y", 1, C::h_corrected, {0})));

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> d(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(10), y(10);
    for (auto& v : x) v = d(rng);
    for (auto& v : y) v = d(rng);
    const int ref = oracle::greedy(x, y);
    const auto w = greedy_compare(record("z", 1, C::h_corrected, x), record("z", 1, C::uncorrected, y));
    CHECK(w == (ref < 0 ? Winner::first : ref > 0 ? Winner::second : Winner::tie));
    // Antisymmetry.
    const auto v = greedy_compare(record("z", 1, C::uncorrected, y), record("z", 1, C::h_corrected, x));
    CHECK(v == (w == Winner::first ? Winner::second : w == Winner::second ? Winner::first : Winner::tie));
  }
}

TEST_CASE("summaries count wins, losses and ties per range") {
  using C = Condition;
  std::vector<EnergyRecord> rs{
      record("a", 1, C::uncorrected, {0, 1}), record("a", 1, C::h_corrected, {-1, 1}),
      record("b", 1, C::uncorrected, {0, 1}), record("b", 1, C::h_corrected, {0, 1}),
      record("c", 4, C::uncorrected, {0, 1}), record("c", 4, C::h_corrected, {1, 1}),
  };
  const auto g = summarize(rs, Metric::greedy);
  REQUIRE(g.ranges.size() == 2);
  CHECK(g.ranges[0].range == 1);
  CHECK(g.ranges[0].wins == 1);
  CHECK(g.ranges[0].ties == 1);
  CHECK(g.ranges[0].win_probability == doctest::Approx(0.5));
  CHECK(g.ranges[1].losses == 1);
  CHECK(g.pooled.instances == 3);
  CHECK(g.pooled.wins == 1);
  CHECK(g.corrected == C::h_corrected);

  const auto e = summarize(rs, Metric::elite, 0.5);
  CHECK(e.pooled.wins == 1);
  CHECK(e.pooled.losses == 1);

  rs.pop_back();
  CHECK_THROWS(summarize(rs, Metric::greedy));
  const auto text = format_table(std::vector<BenchmarkReport>{g, e});
  CHECK(text.find("Range r_J") != std::string::npos);
  CHECK(text.find("greedy") != std::string::npos);
}

TEST_CASE("benchmark records are ungauged energies of the original instance") {
  const auto g = build_chimera(1, 2, 4);
  DeviceModel d = ideal_device(g, 0.1, 4);
  d.sampler = {50, 1, 10.0, 0};
  BenchmarkOptions o;
  o.ranges = {2};
  o.instances_per_range = 2;
  o.gauges = 3;
  o.runs = 2;
  o.reads = 20;
  o.seed = 5;
  CalibrationTable zero;
  const auto recs = run_benchmark(d, *g, o, &zero);
  REQUIRE(recs.size() == 4);
  for (const auto& r : recs) {
    CHECK(r.energies.size() == 3 * 2 * 20);
    CHECK(r.gauge_energies(2).size() == 40);
  }
  for (int i = 0; i < 2; ++i) {
    const auto& r = recs[static_cast<std::size_t>(2 * i)];
    CHECK(r.condition == Condition::uncorrected);
    const auto& c = recs[static_cast<std::size_t>(2 * i + 1)];
    CHECK(c.condition == Condition::h_corrected);
    // Zero table: identical streams give identical reads.
    CHECK(r.energies == c.energies);
  }
  const auto s = summarize(recs, Metric::greedy);
  CHECK(s.pooled.ties == 2);
}

TEST_CASE("benchmark rejects tables for another graph") {
  const auto g = build_chimera(1, 2, 4);
  const DeviceModel d = ideal_device(g, 0.1, 4);
  CalibrationTable t;
  IterationRecord r;
  r.targets = {{99, {}, 0.1, 0, 0.1, 0, 0, false}};
  t.h_history = {r};
  BenchmarkOptions o;
  o.ranges = {1};
  o.instances_per_range = 1;
  o.gauges = 1;
  o.runs = 1;
  o.reads = 1;
  CHECK_THROWS(run_benchmark(d, *g, o, &t));
}
