#include "qabias/chimera.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

#include "qabias/rng.hpp"

namespace qabias {

namespace {

void check_shape(const ChimeraShape& shape) {
  if (shape.rows < 1 || shape.cols < 1 || shape.shore < 1) {
    throw std::invalid_argument(fmt::format("invalid Chimera shape {}x{}, shore {}", shape.rows,
                                            shape.cols, shape.shore));
  }
}

int nominal_count(const ChimeraShape& shape) { return shape.rows * shape.cols * 2 * shape.shore; }

}  // namespace

int chimera_index(const ChimeraShape& s, const ChimeraCoord& c) {
  return 1 + ((c.row * s.cols + c.col) * 2 + c.side) * s.shore + c.offset;
}

ChimeraCoord chimera_coord(const ChimeraShape& s, int index) {
  if (index < 1 || index > nominal_count(s)) {
    throw std::out_of_range(fmt::format("qubit {} outside 1..{}", index, nominal_count(s)));
  }
  int k = index - 1;
  ChimeraCoord c;
  c.offset = k % s.shore;
  k /= s.shore;
  c.side = k % 2;
  k /= 2;
  c.col = k % s.cols;
  c.row = k / s.cols;
  return c;
}

std::shared_ptr<const CouplingGraph> build_chimera(int rows, int cols, int shore, const std::set<int>& broken) {
  return build_chimera(ChimeraShape{rows, cols, shore}, broken);
}

std::shared_ptr<const CouplingGraph> build_chimera(const ChimeraShape& shape, const std::set<int>& broken) {
  check_shape(shape);
  const int n = nominal_count(shape);
  for (int q : broken) {
    if (q < 1 || q > n) throw std::out_of_range(fmt::format("broken qubit {} outside 1..{}", q, n));
  }
  auto usable = [&](int q) { return !broken.contains(q); };

  std::vector<int> active;
  for (int q = 1; q <= n; ++q) {
    if (usable(q)) active.push_back(q);
  }

  std::vector<Edge> edges;
  auto add = [&](int a, int b) {
    if (usable(a) && usable(b)) edges.emplace_back(a, b);
  };
  for (int r = 0; r < shape.rows; ++r) {
    for (int c = 0; c < shape.cols; ++c) {
      for (int a = 0; a < shape.shore; ++a) {
        for (int b = 0; b < shape.shore; ++b) {
          add(chimera_index(shape, {r, c, 0, a}), chimera_index(shape, {r, c, 1, b}));
        }
        if (r + 1 < shape.rows) {
          add(chimera_index(shape, {r, c, 0, a}), chimera_index(shape, {r + 1, c, 0, a}));
        }
        if (c + 1 < shape.cols) {
          add(chimera_index(shape, {r, c, 1, a}), chimera_index(shape, {r, c + 1, 1, a}));
        }
      }
    }
  }
  return std::make_shared<const CouplingGraph>(n, std::move(active), std::move(edges), shape);
}

std::set<int> choose_broken(const ChimeraShape& shape, int count, std::uint64_t seed) {
  check_shape(shape);
  const int n = nominal_count(shape);
  if (count < 0 || count > n) {
    throw std::invalid_argument(fmt::format("cannot break {} of {} qubits", count, n));
  }
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) all[static_cast<std::size_t>(q)] = q + 1;
  Rng rng = make_rng(seed, {label_key("broken")});
  // Partial Fisher-Yates with explicit index draws keeps the choice independent
  // of the standard library's shuffle implementation.
  std::set<int> out;
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<int> pick(k, n - 1);
    std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
    out.insert(all[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::size_t CouplerBatches::edge_count() const {
  std::size_t total = 0;
  for (const auto& b : batches) total += b.size();
  return total;
}

CouplerBatches edge_batches(const CouplingGraph& graph) {
  if (!graph.shape()) throw std::invalid_argument("edge_batches needs a Chimera graph");
  const ChimeraShape& shape = *graph.shape();
  CouplerBatches out;
  out.batches.resize(static_cast<std::size_t>(shape.shore) + 2);
  for (const Edge& e : graph.edges()) {
    const ChimeraCoord a = chimera_coord(shape, e.i);
    const ChimeraCoord b = chimera_coord(shape, e.j);
    int color = 0;
    if (a.row == b.row && a.col == b.col) {
      const int left = a.side == 0 ? a.offset : b.offset;
      const int right = a.side == 0 ? b.offset : a.offset;
      color = (left + right) % shape.shore;
    } else if (a.col == b.col) {
      color = shape.shore + std::min(a.row, b.row) % 2;
    } else {
      color = shape.shore + std::min(a.col, b.col) % 2;
    }
    out.batches[static_cast<std::size_t>(color)].push_back(e);
  }
  return out;
}

std::string validate_batches(const CouplingGraph& graph, const CouplerBatches& batches) {
  std::set<Edge> seen;
  for (std::size_t k = 0; k < batches.batches.size(); ++k) {
    std::set<int> used;
    for (const Edge& e : batches.batches[k]) {
      if (!graph.has_edge(e)) return fmt::format("batch {} holds non-edge ({})", k, e.key());
      if (!seen.insert(e).second) return fmt::format("coupler ({}) appears in more than one batch", e.key());
      if (!used.insert(e.i).second || !used.insert(e.j).second) {
        return fmt::format("batch {} is not a matching at coupler ({})", k, e.key());
      }
    }
  }
  if (seen.size() != graph.edges().size()) {
    return fmt::format("batches cover {} of {} couplers", seen.size(), graph.edges().size());
  }
  return {};
}

IsingInstance random_range_instance(const std::shared_ptr<const CouplingGraph>& graph, int range,
                                    std::uint64_t seed) {
  if (!graph) throw std::invalid_argument("null graph");
  if (range < 1) throw std::invalid_argument(fmt::format("range must be >= 1 (got {})", range));
  Rng rng = make_rng(seed, {label_key("range-instance"), static_cast<std::uint64_t>(range)});
  std::uniform_int_distribution<int> draw(-range, range);
  const double scale = kRangeScale / range;
  CouplingMap j;
  for (const Edge& e : graph->edges()) j.emplace(e, draw(rng) * scale);
  return IsingInstance(graph, FieldMap{}, std::move(j));
}

}  // namespace qabias
