#include "qabias/graph.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace qabias {

Edge::Edge(int a, int b) : i(std::min(a, b)), j(std::max(a, b)) {
  if (a == b) {
    throw std::invalid_argument(fmt::format("edge endpoints must differ (got {},{})", a, b));
  }
}

std::string Edge::key() const { return fmt::format("{},{}", i, j); }

CouplingGraph::CouplingGraph(int nominal_count, std::vector<int> active, std::vector<Edge> edges,
                             std::optional<ChimeraShape> shape)
    : nominal_(nominal_count),
      active_(std::move(active)),
      active_mask_(static_cast<std::size_t>(nominal_count) + 1, false),
      edges_(std::move(edges)),
      adjacency_(static_cast<std::size_t>(nominal_count) + 1),
      shape_(shape) {
  if (nominal_ < 1) {
    throw std::invalid_argument("graph needs at least one nominal qubit");
  }
  std::sort(active_.begin(), active_.end());
  active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
  for (int q : active_) {
    if (q < 1 || q > nominal_) {
      throw std::out_of_range(fmt::format("active qubit {} outside 1..{}", q, nominal_));
    }
    active_mask_[static_cast<std::size_t>(q)] = true;
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const Edge& e : edges_) {
    if (!is_active(e.i) || !is_active(e.j)) {
      throw std::invalid_argument(fmt::format("edge ({}) touches an inactive qubit", e.key()));
    }
    adjacency_[static_cast<std::size_t>(e.i)].push_back(e.j);
    adjacency_[static_cast<std::size_t>(e.j)].push_back(e.i);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

std::vector<int> CouplingGraph::broken() const {
  std::vector<int> out;
  for (int q = 1; q <= nominal_; ++q) {
    if (!is_active(q)) out.push_back(q);
  }
  return out;
}

bool CouplingGraph::is_active(int q) const {
  return q >= 1 && q <= nominal_ && active_mask_[static_cast<std::size_t>(q)];
}

bool CouplingGraph::has_edge(const Edge& e) const {
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

const std::vector<int>& CouplingGraph::neighbors(int q) const {
  if (q < 1 || q > nominal_) {
    throw std::out_of_range(fmt::format("qubit {} outside 1..{}", q, nominal_));
  }
  return adjacency_[static_cast<std::size_t>(q)];
}

int CouplingGraph::max_degree() const {
  std::size_t best = 0;
  for (const auto& nbrs : adjacency_) best = std::max(best, nbrs.size());
  return static_cast<int>(best);
}

}  // namespace qabias
