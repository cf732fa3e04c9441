#include "doctest.h"

#include <set>

#include "oracles.hpp"
#include "qabias/chimera.hpp"

using namespace qabias;

TEST_CASE("index and coordinate round trip") {
  const ChimeraShape shape{8, 8, 4};
  // 1 + ((1*8 + 2)*2 + 1)*4 + 3
  CHECK(chimera_index(shape, {1, 2, 1, 3}) == 88);
  for (int q = 1; q <= 512; ++q) CHECK(chimera_index(shape, chimera_coord(shape, q)) == q);
  CHECK_THROWS(chimera_coord(shape, 513));
}

TEST_CASE("intact graphs have the closed-form edge count") {
  for (auto [r, c, k] : {std::tuple{8, 8, 4}, std::tuple{2, 4, 4}, std::tuple{1, 2, 4}, std::tuple{3, 2, 2}}) {
    const auto g = build_chimera(r, c, k);
    CHECK(g->nominal_count() == 2 * r * c * k);
    CHECK(static_cast<long>(g->edges().size()) == oracle::chimera_edges(r, c, k));
  }
  const auto g = build_chimera(8, 8, 4);
  CHECK(g->active().size() == 512);
  CHECK(g->edges().size() == 1472);
  CHECK(g->max_degree() == 6);
}

TEST_CASE("intra-cell couplers form K_{4,4}") {
  const ChimeraShape shape{2, 2, 4};
  const auto g = build_chimera(shape);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      CHECK(g->has_edge(Edge(chimera_index(shape, {1, 1, 0, a}), chimera_index(shape, {1, 1, 1, b}))));
    }
    CHECK_FALSE(g->has_edge(Edge(chimera_index(shape, {1, 1, 0, a}), chimera_index(shape, {1, 1, 0, (a + 1) % 4}))));
    // Left shore couples vertically, right shore horizontally.
    CHECK(g->has_edge(Edge(chimera_index(shape, {0, 1, 0, a}), chimera_index(shape, {1, 1, 0, a}))));
    CHECK(g->has_edge(Edge(chimera_index(shape, {1, 0, 1, a}), chimera_index(shape, {1, 1, 1, a}))));
    CHECK_FALSE(g->has_edge(Edge(chimera_index(shape, {1, 0, 0, a}), chimera_index(shape, {1, 1, 0, a}))));
  }
}

TEST_CASE("broken qubits drop their couplers") {
  const std::set<int> broken{1, 40, 77};
  const auto g = build_chimera(4, 4, 4, broken);
  CHECK(g->nominal_count() == 128);
  CHECK(g->active().size() == 125);
  CHECK(g->broken() == std::vector<int>(broken.begin(), broken.end()));
  for (const auto& e : g->edges()) {
    CHECK(broken.count(e.i) == 0);
    CHECK(broken.count(e.j) == 0);
  }
  const auto intact = build_chimera(4, 4, 4);
  std::size_t lost = 0;
  for (const auto& e : intact->edges()) lost += (broken.count(e.i) + broken.count(e.j)) > 0 ? 1 : 0;
  CHECK(g->edges().size() == intact->edges().size() - lost);
}

TEST_CASE("broken qubit choice is seeded") {
  const ChimeraShape shape{8, 8, 4};
  const auto a = choose_broken(shape, 10, 4);
  CHECK(a.size() == 10);
  CHECK(a == choose_broken(shape, 10, 4));
  CHECK(a != choose_broken(shape, 10, 5));
  CHECK_THROWS(choose_broken(shape, 513, 1));
}

TEST_CASE("six coupler batches partition the graph into matchings") {
  for (const auto& g : {build_chimera(8, 8, 4), build_chimera(2, 4, 4), build_chimera(3, 3, 4, {5, 17, 60})}) {
    const auto batches = edge_batches(*g);
    CHECK(batches.batches.size() == 6);
    CHECK(batches.edge_count() == g->edges().size());
    CHECK(validate_batches(*g, batches).empty());
  }
  const auto g = build_chimera(1, 2, 4);
  auto bad = edge_batches(*g);
  bad.batches[0].push_back(bad.batches[1].front());
  CHECK_FALSE(validate_batches(*g, bad).empty());
}

TEST_CASE("range instances use the integer grid") {
  const auto g = build_chimera(2, 2, 4);
  for (int r : {1, 2, 4, 16}) {
    const auto inst = random_range_instance(g, r, 9);
    CHECK(inst.fields().empty());
    CHECK(inst.couplings().size() == g->edges().size());
    for (const auto& [e, v] : inst.couplings()) {
      const double k = v * r / kRangeScale;
      CHECK(k == doctest::Approx(std::round(k)));
      CHECK(std::abs(k) <= r + 1e-9);
    }
  }
  CHECK(random_range_instance(g, 4, 9) == random_range_instance(g, 4, 9));
  CHECK_THROWS(random_range_instance(g, 0, 9));
}
