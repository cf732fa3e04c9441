#include "qabias/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>

#include <fmt/format.h>

#include "qabias/chimera.hpp"
#include "qabias/io.hpp"
#include "qabias/rng.hpp"

namespace qabias {

namespace {

double round_energy(double e) { return std::round(e * 1e9) / 1e9; }

void check_table(const CouplingGraph& graph, const CalibrationTable& table) {
  for (const auto& [q, c] : table.cumulative_h_correction()) {
    if (!graph.is_active(q)) {
      throw std::invalid_argument(fmt::format("calibration table corrects qubit {} which is not active", q));
    }
  }
  for (const auto& [e, c] : table.cumulative_j_correction()) {
    if (!graph.has_edge(e)) {
      throw std::invalid_argument(fmt::format("calibration table corrects coupler {} which is not in the graph", e.key()));
    }
  }
}

Gauge random_gauge(int n, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<Spin> signs(static_cast<std::size_t>(n));
  for (auto& s : signs) s = coin(rng) ? 1 : -1;
  return Gauge(std::move(signs));
}

double clamp_count(double v, double bound, std::size_t& clamped) {
  if (std::abs(v) <= bound) return v;
  ++clamped;
  return std::clamp(v, -bound, bound);
}

struct Level {
  double energy;
  std::size_t count;
};

std::vector<Level> levels(std::vector<double> energies) {
  std::sort(energies.begin(), energies.end());
  std::vector<Level> out;
  for (double e : energies) {
    if (!out.empty() && out.back().energy == e) {
      ++out.back().count;
    } else {
      out.push_back({e, 1});
    }
  }
  return out;
}

}  // namespace

std::span<const double> EnergyRecord::gauge_energies(int gauge) const {
  if (gauge < 0 || gauge >= gauges) throw std::out_of_range(fmt::format("record has no gauge {}", gauge));
  const auto per = static_cast<std::size_t>(runs) * static_cast<std::size_t>(reads);
  return std::span<const double>(energies).subspan(static_cast<std::size_t>(gauge) * per, per);
}

std::vector<EnergyRecord> run_benchmark(const DeviceModel& device, const CouplingGraph& graph,
                                        const BenchmarkOptions& options, const CalibrationTable* calibration) {
  device.validate();
  if (!(*device.graph == graph)) throw std::invalid_argument("benchmark graph does not match the device graph");
  if (options.ranges.empty()) throw std::invalid_argument("benchmark needs at least one range");
  if (options.instances_per_range < 1 || options.gauges < 1 || options.runs < 1 || options.reads < 1) {
    throw std::invalid_argument("instances, gauges, runs and reads must all be >= 1");
  }
  FieldMap h_corr;
  CouplingMap j_corr;
  if (calibration) {
    check_table(graph, *calibration);
    h_corr = calibration->cumulative_h_correction();
    if (options.correct_j) j_corr = calibration->cumulative_j_correction();
  }
  const Condition corrected = options.correct_j ? Condition::hj_corrected : Condition::h_corrected;

  std::vector<Condition> conditions{Condition::uncorrected};
  if (calibration) conditions.push_back(corrected);

  const int n = graph.nominal_count();
  std::vector<EnergyRecord> out;
  for (int r : options.ranges) {
    for (int index = 0; index < options.instances_per_range; ++index) {
      const auto ur = static_cast<std::uint64_t>(r);
      const auto ui = static_cast<std::uint64_t>(index);
      const IsingInstance instance =
          random_range_instance(device.graph, r, derive_seed(options.seed, {label_key("instance"), ur, ui}));
      const DenseIsing dense(instance);
      const std::string id = io::instance_id(instance);

      std::vector<Gauge> gauges;
      for (int g = 0; g < options.gauges; ++g) {
        Rng rng = make_rng(options.seed, {label_key("gauge"), ur, ui, static_cast<std::uint64_t>(g)});
        gauges.push_back(random_gauge(n, rng));
      }

      for (Condition condition : conditions) {
        EnergyRecord rec;
        rec.instance_id = id;
        rec.range = r;
        rec.instance_index = index;
        rec.condition = condition;
        rec.gauges = options.gauges;
        rec.runs = options.runs;
        rec.reads = options.reads;
        rec.energies.reserve(static_cast<std::size_t>(options.gauges) * static_cast<std::size_t>(options.runs) *
                             static_cast<std::size_t>(options.reads));
        const bool fix_h = condition != Condition::uncorrected;
        const bool fix_j = condition == Condition::hj_corrected;

        for (int g = 0; g < options.gauges; ++g) {
          const Gauge& gauge = gauges[static_cast<std::size_t>(g)];
          const IsingInstance gauged = apply_gauge(instance, gauge);
          // Corrections act in the hardware frame, where the bias lives.
          FieldMap h;
          for (int q : graph.active()) {
            double c = 0.0;
            if (fix_h) {
              auto it = h_corr.find(q);
              if (it != h_corr.end()) c = it->second;
            }
            h.emplace(q, clamp_count(gauged.field(q) - c, kMaxField, rec.clamped));
          }
          CouplingMap j;
          for (const auto& [e, v] : gauged.couplings()) {
            double c = 0.0;
            if (fix_j) {
              auto it = j_corr.find(e);
              if (it != j_corr.end()) c = it->second;
            }
            j.emplace(e, clamp_count(v - c, kMaxCoupling, rec.clamped));
          }
          const IsingInstance programmed(device.graph, std::move(h), std::move(j));

          SampleRequest request;
          request.runs = options.runs;
          request.reads_per_run = options.reads;
          request.stream = derive_seed(options.seed, {label_key("bench"), ur, ui, static_cast<std::uint64_t>(g)});
          request.instance_id = id;
          for (auto& set : sample(device, programmed, request)) {
            for (auto& read : set.reads) {
              for (std::size_t q = 0; q < read.spins.size(); ++q) {
                read.spins[q] = static_cast<Spin>(read.spins[q] * gauge.signs[q]);
              }
              rec.energies.push_back(round_energy(dense.energy(read.spins)));
            }
          }
        }
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

Winner greedy_compare(const EnergyRecord& a, const EnergyRecord& b) {
  if (a.instance_id != b.instance_id) {
    throw std::invalid_argument(fmt::format("cannot compare records of instances {} and {}", a.instance_id, b.instance_id));
  }
  const auto la = levels(a.energies);
  const auto lb = levels(b.energies);
  const std::size_t common = std::min(la.size(), lb.size());
  for (std::size_t k = 0; k < common; ++k) {
    if (la[k].energy < lb[k].energy) return Winner::first;
    if (la[k].energy > lb[k].energy) return Winner::second;
    if (la[k].count > lb[k].count) return Winner::first;
    if (la[k].count < lb[k].count) return Winner::second;
  }
  // Same prefix: the record with samples left over returned more states.
  if (la.size() > lb.size()) return Winner::first;
  if (la.size() < lb.size()) return Winner::second;
  return Winner::tie;
}

double elite_mean(std::span<const double> energies, double fraction) {
  if (energies.empty()) throw std::invalid_argument("elite mean of an empty record");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument(fmt::format("elite fraction {} outside (0, 1]", fraction));
  }
  // The small slack keeps 0.02 * 100 at 2 despite binary rounding.
  const auto n = energies.size();
  auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  std::vector<double> lowest(k);
  std::partial_sort_copy(energies.begin(), energies.end(), lowest.begin(), lowest.end());
  return std::accumulate(lowest.begin(), lowest.end(), 0.0) / static_cast<double>(k);
}

double elite_mean(const EnergyRecord& record, double fraction) { return elite_mean(record.energies, fraction); }

BenchmarkReport summarize(const std::vector<EnergyRecord>& records, Metric metric, double elite_fraction) {
  struct Pair {
    const EnergyRecord* base = nullptr;
    const EnergyRecord* fixed = nullptr;
  };
  std::map<std::string, Pair> pairs;
  std::vector<std::string> order;
  std::optional<Condition> corrected;
  for (const auto& rec : records) {
    auto [it, fresh] = pairs.try_emplace(rec.instance_id);
    if (fresh) order.push_back(rec.instance_id);
    auto& slot = rec.condition == Condition::uncorrected ? it->second.base : it->second.fixed;
    if (slot) throw std::invalid_argument(fmt::format("duplicate {} record for instance {}", to_string(rec.condition), rec.instance_id));
    slot = &rec;
    if (rec.condition != Condition::uncorrected) {
      if (corrected && *corrected != rec.condition) throw std::invalid_argument("records mix correction conditions");
      corrected = rec.condition;
    }
  }

  BenchmarkReport report;
  report.metric = metric;
  report.elite_fraction = elite_fraction;
  report.corrected = corrected.value_or(Condition::h_corrected);
  std::map<int, RangeSummary> by_range;
  for (const auto& id : order) {
    const Pair& p = pairs.at(id);
    if (!p.base || !p.fixed) throw std::invalid_argument(fmt::format("instance {} has no paired record", id));
    if (p.base->range != p.fixed->range) throw std::invalid_argument(fmt::format("instance {} has mismatched ranges", id));
    Winner w;
    if (metric == Metric::greedy) {
      w = greedy_compare(*p.fixed, *p.base);
    } else {
      const double a = elite_mean(*p.fixed, elite_fraction);
      const double b = elite_mean(*p.base, elite_fraction);
      w = a < b ? Winner::first : (a > b ? Winner::second : Winner::tie);
    }
    for (RangeSummary* s : {&by_range[p.base->range], &report.pooled}) {
      ++s->instances;
      if (w == Winner::first) ++s->wins;
      else if (w == Winner::second) ++s->losses;
      else ++s->ties;
    }
  }
  for (auto& [r, s] : by_range) {
    s.range = r;
    s.win_probability = static_cast<double>(s.wins) / static_cast<double>(s.instances);
    report.ranges.push_back(s);
  }
  if (report.pooled.instances > 0) {
    report.pooled.win_probability = static_cast<double>(report.pooled.wins) / static_cast<double>(report.pooled.instances);
  }
  return report;
}

std::string format_table(std::span<const BenchmarkReport> reports) {
  if (reports.empty()) return {};
  constexpr int kLabel = 28;
  constexpr int kCell = 8;
  std::string out = fmt::format("{:<{}}", "Range r_J", kLabel);
  for (const auto& s : reports.front().ranges) out += fmt::format("{:>{}}", s.range, kCell);
  out += fmt::format("{:>{}}\n", "all", kCell);
  for (const auto& rep : reports) {
    const std::string name = rep.metric == Metric::greedy
                                 ? std::string("greedy")
                                 : fmt::format("elite {:g}%", rep.elite_fraction * 100.0);
    out += fmt::format("{:<{}}", fmt::format("{} ({})", name, to_string(rep.corrected)), kLabel);
    for (const auto& s : rep.ranges) out += fmt::format("{:>{}.2f}", s.win_probability, kCell);
    out += fmt::format("{:>{}.2f}\n", rep.pooled.win_probability, kCell);
    out += fmt::format("{:<{}}", "  ties", kLabel);
    for (const auto& s : rep.ranges) out += fmt::format("{:>{}}", s.ties, kCell);
    out += fmt::format("{:>{}}\n", rep.pooled.ties, kCell);
  }
  return out;
}

const char* to_string(Condition condition) {
  switch (condition) {
    case Condition::uncorrected: return "uncorrected";
    case Condition::h_corrected: return "h-corrected";
    case Condition::hj_corrected: return "hJ-corrected";
  }
  return "?";
}

const char* to_string(Metric metric) { return metric == Metric::greedy ? "greedy" : "elite"; }

}  // namespace qabias
