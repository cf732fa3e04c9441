#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <vector>

#include "qabias/graph.hpp"
#include "qabias/ising.hpp"

namespace qabias {

/// Position of a qubit inside a Chimera grid. `side` 0 is the left shore
/// (vertical inter-cell couplers), 1 the right shore (horizontal ones).
struct ChimeraCoord {
  int row = 0;
  int col = 0;
  int side = 0;
  int offset = 0;

  auto operator<=>(const ChimeraCoord&) const = default;
};

/// Standard 1-based linear index: 1 + ((row*cols + col)*2 + side)*shore + offset.
[[nodiscard]] int chimera_index(const ChimeraShape& shape, const ChimeraCoord& c);
[[nodiscard]] ChimeraCoord chimera_coord(const ChimeraShape& shape, int index);

/// Chimera graph with `broken` qubits removed along with their couplers.
/// Indices are assigned to every nominal qubit, broken or not.
[[nodiscard]] std::shared_ptr<const CouplingGraph> build_chimera(int rows, int cols, int shore,
                                                                 const std::set<int>& broken = {});
[[nodiscard]] std::shared_ptr<const CouplingGraph> build_chimera(const ChimeraShape& shape,
                                                                 const std::set<int>& broken = {});

/// `count` distinct qubits drawn uniformly from the nominal index range.
[[nodiscard]] std::set<int> choose_broken(const ChimeraShape& shape, int count, std::uint64_t seed);

/// Couplers split into shore+2 matchings (six for shore 4) that partition the
/// edge set; each batch can be programmed at once without two batch couplers
/// sharing a qubit.
struct CouplerBatches {
  std::vector<std::vector<Edge>> batches;

  [[nodiscard]] std::size_t edge_count() const;
};

/// Deterministic coloring: an intra-cell coupler between left offset a and
/// right offset b gets color (a+b) mod shore; vertical inter-cell couplers get
/// shore + (row of upper cell) mod 2; horizontal ones shore + (column of left
/// cell) mod 2. Vertical and horizontal couplers live on different shores, so
/// they can share the last two colors.
[[nodiscard]] CouplerBatches edge_batches(const CouplingGraph& graph);

/// Checks that `batches` is a partition of the graph's couplers into matchings.
/// Returns an empty string when valid, otherwise a description of the defect.
[[nodiscard]] std::string validate_batches(const CouplingGraph& graph, const CouplerBatches& batches);

/// Range-r benchmark instance: h = 0, each coupler J drawn uniformly from
/// {-r, ..., r} and scaled by 0.9/r.
[[nodiscard]] IsingInstance random_range_instance(const std::shared_ptr<const CouplingGraph>& graph,
                                                  int range, std::uint64_t seed);

inline constexpr double kRangeScale = 0.9;

}  // namespace qabias
