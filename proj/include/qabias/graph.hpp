#pragma once

#include <algorithm>
#include <compare>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qabias {

/// Unordered qubit pair, stored canonically with i < j (1-based indices).
struct Edge {
  int i = 0;
  int j = 0;

  Edge() = default;
  Edge(int a, int b);

  auto operator<=>(const Edge&) const = default;

  [[nodiscard]] bool touches(int q) const { return i == q || j == q; }
  [[nodiscard]] std::string key() const;  // "i,j"
};

struct ChimeraShape {
  int rows = 0;
  int cols = 0;
  int shore = 4;

  auto operator<=>(const ChimeraShape&) const = default;
};

/// Hardware connectivity: nominal qubits 1..nominal_count(), a set of usable
/// (active) qubits, and the couplers between active qubits.
class CouplingGraph {
 public:
  CouplingGraph(int nominal_count, std::vector<int> active, std::vector<Edge> edges,
                std::optional<ChimeraShape> shape = std::nullopt);

  [[nodiscard]] int nominal_count() const { return nominal_; }
  [[nodiscard]] const std::vector<int>& active() const { return active_; }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const std::optional<ChimeraShape>& shape() const { return shape_; }
  [[nodiscard]] std::vector<int> broken() const;

  [[nodiscard]] bool is_active(int q) const;
  [[nodiscard]] bool has_edge(const Edge& e) const;
  [[nodiscard]] const std::vector<int>& neighbors(int q) const;
  [[nodiscard]] int degree(int q) const { return static_cast<int>(neighbors(q).size()); }
  [[nodiscard]] int max_degree() const;

  bool operator==(const CouplingGraph& other) const {
    return nominal_ == other.nominal_ && active_ == other.active_ && edges_ == other.edges_ &&
           shape_ == other.shape_;
  }

 private:
  int nominal_;
  std::vector<int> active_;
  std::vector<bool> active_mask_;  // index q (1-based), slot 0 unused
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
  std::optional<ChimeraShape> shape_;
};

}  // namespace qabias
