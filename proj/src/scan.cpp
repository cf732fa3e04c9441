#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "qabias/calibration.hpp"
#include "qabias/rng.hpp"

namespace qabias {

namespace {

void check_protocol(const ScanProtocol& p) {
  if (p.values.empty()) throw std::invalid_argument("scan needs at least one programmed value");
  if (p.runs < 1 || p.reads < 1) throw std::invalid_argument("scan needs runs and reads >= 1");
  for (double v : p.values) {
    if (std::abs(v) > p.window + 1e-12) {
      throw std::invalid_argument(fmt::format("programmed value {} outside the thermal window [-{}, {}]", v,
                                              p.window, p.window));
    }
  }
}

double clamp_to(double value, double bound, Diagnostics* diag, const std::string& what) {
  if (std::abs(value) <= bound) return value;
  if (diag) diag->note(fmt::format("{} = {} clamped to the programmable range", what, value));
  return std::clamp(value, -bound, bound);
}

double lookup(const FieldMap& m, int q) {
  auto it = m.find(q);
  return it == m.end() ? 0.0 : it->second;
}

double lookup(const CouplingMap& m, const Edge& e) {
  auto it = m.find(e);
  return it == m.end() ? 0.0 : it->second;
}

}  // namespace

std::vector<double> evenly_spaced(double lo, double hi, int count) {
  if (count < 1) throw std::invalid_argument("evenly_spaced needs count >= 1");
  if (count == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    out[static_cast<std::size_t>(k)] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  return out;
}

ScanData run_h_scan(const DeviceModel& device, const ScanProtocol& protocol, const FieldMap& prior_corrections,
                    Diagnostics* diag) {
  check_protocol(protocol);
  device.validate();
  const auto& active = device.graph->active();

  ScanData scan;
  scan.kind = ScanKind::h;
  scan.iteration = protocol.iteration;
  scan.runs = protocol.runs;
  scan.reads_per_run = protocol.reads;
  scan.device_seed = device.master_seed;
  scan.stream = protocol.stream;
  scan.programmed_values = protocol.values;
  std::unordered_map<int, std::size_t> slot;
  for (int q : active) {
    slot.emplace(q, scan.qubits.size());
    QubitSeries s;
    s.qubit = q;
    s.correction = lookup(prior_corrections, q);
    s.up_counts.assign(protocol.values.size(), std::vector<std::uint32_t>(static_cast<std::size_t>(protocol.runs)));
    scan.qubits.push_back(std::move(s));
  }

  for (std::size_t v = 0; v < protocol.values.size(); ++v) {
    FieldMap h;
    for (const auto& s : scan.qubits) {
      h.emplace(s.qubit, clamp_to(protocol.values[v] - s.correction, kMaxField, diag, fmt::format("h_{}", s.qubit)));
    }
    const IsingInstance programmed(device.graph, std::move(h), CouplingMap{});
    SampleRequest request;
    request.runs = protocol.runs;
    request.reads_per_run = protocol.reads;
    request.stream = derive_seed(protocol.stream, {label_key("h-scan"), static_cast<std::uint64_t>(protocol.iteration), v});
    for (const auto& run : sample_counts(device, programmed, request)) {
      for (const auto& piece : run.components) {
        auto& series = scan.qubits[slot.at(piece.qubits[0])];
        series.up_counts[v][static_cast<std::size_t>(run.run_id)] = piece.counts[0];
      }
    }
  }
  return scan;
}

ScanData run_j_scan(const DeviceModel& device, const ScanProtocol& protocol, const CouplerBatches& batches,
                    const CouplingMap& prior_corrections, const FieldMap& field_program, Diagnostics* diag) {
  check_protocol(protocol);
  device.validate();
  if (auto defect = validate_batches(*device.graph, batches); !defect.empty()) {
    throw std::invalid_argument("invalid coupler batches: " + defect);
  }

  ScanData scan;
  scan.kind = ScanKind::j;
  scan.iteration = protocol.iteration;
  scan.runs = protocol.runs;
  scan.reads_per_run = protocol.reads;
  scan.device_seed = device.master_seed;
  scan.stream = protocol.stream;
  scan.programmed_values = protocol.values;
  std::map<Edge, std::size_t> slot;
  for (const Edge& e : device.graph->edges()) {
    slot.emplace(e, scan.couplers.size());
    CouplerSeries s;
    s.edge = e;
    s.correction = lookup(prior_corrections, e);
    s.counts.assign(protocol.values.size(),
                    std::vector<std::array<std::uint32_t, 4>>(static_cast<std::size_t>(protocol.runs)));
    scan.couplers.push_back(std::move(s));
  }

  FieldMap h;
  for (int q : device.graph->active()) {
    h.emplace(q, clamp_to(lookup(field_program, q), kMaxField, diag, fmt::format("h_{}", q)));
  }

  for (std::size_t v = 0; v < protocol.values.size(); ++v) {
    for (std::size_t b = 0; b < batches.batches.size(); ++b) {
      if (batches.batches[b].empty()) continue;
      CouplingMap j;
      for (const Edge& e : batches.batches[b]) {
        const auto& s = scan.couplers[slot.at(e)];
        j.emplace(e, clamp_to(protocol.values[v] - s.correction, kMaxCoupling, diag, "J_" + e.key()));
      }
      const IsingInstance programmed(device.graph, h, std::move(j));
      SampleRequest request;
      request.runs = protocol.runs;
      request.reads_per_run = protocol.reads;
      request.stream = derive_seed(protocol.stream,
                                   {label_key("j-scan"), static_cast<std::uint64_t>(protocol.iteration), v, b});
      for (const auto& run : sample_counts(device, programmed, request)) {
        for (const auto& piece : run.components) {
          if (piece.qubits.size() != 2) continue;
          auto& series = scan.couplers[slot.at(Edge(piece.qubits[0], piece.qubits[1]))];
          series.counts[v][static_cast<std::size_t>(run.run_id)] = piece.counts;
        }
      }
    }
  }
  return scan;
}

}  // namespace qabias
