#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "qabias/benchmark.hpp"
#include "qabias/calibration.hpp"
#include "qabias/chimera.hpp"
#include "qabias/device.hpp"
#include "qabias/ising.hpp"

namespace qabias::io {

using nlohmann::json;

/// File system failures (exit code 3 in the CLI).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Provenance stamped into every output file.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

// Instances: {"n": int, "h": {"q": value}, "J": {"i,j": value}}, 1-based, i < j.
[[nodiscard]] json to_json(const IsingInstance& instance);
[[nodiscard]] IsingInstance instance_from_json(const json& j,
                                               std::shared_ptr<const CouplingGraph> topology = nullptr);
/// 16 hex digits of a 64-bit FNV-1a hash of the canonical instance JSON.
[[nodiscard]] std::string instance_id(const IsingInstance& instance);
[[nodiscard]] Edge parse_edge_key(const std::string& key);

// Graph config: {"rows", "cols", "shore", "broken": [...]}.
struct GraphConfig {
  ChimeraShape shape{8, 8, 4};
  std::set<int> broken;
};
[[nodiscard]] json to_json(const GraphConfig& config);
[[nodiscard]] GraphConfig graph_config_from_json(const json& j);
/// "MxN" or "MxN,shore=K".
[[nodiscard]] ChimeraShape parse_chimera_flag(const std::string& text);
[[nodiscard]] GraphConfig graph_config_of(const CouplingGraph& graph);

[[nodiscard]] json to_json(const DeviceModel& device);
[[nodiscard]] DeviceModel device_from_json(const json& j);

[[nodiscard]] json scan_metadata(const ScanData& scan);
[[nodiscard]] std::string scan_to_csv(const ScanData& scan);
[[nodiscard]] ScanData scan_from_csv(const std::string& csv, const json& metadata);

[[nodiscard]] json to_json(const CalibrationTable& table);
[[nodiscard]] CalibrationTable table_from_json(const json& j);

[[nodiscard]] json to_json(const BenchmarkReport& report);
[[nodiscard]] std::string records_to_csv(const std::vector<EnergyRecord>& records);

/// run_id,read_id,spins with '+' for up and '-' for down, qubit 1 first.
[[nodiscard]] std::string samples_to_csv(const std::vector<SampleSet>& sets);

/// Little-endian binary: "QBCOUNT1", u32 run count, then per run u32 run id,
/// u32 piece count, and per piece u8 size, u32 qubits[size], u32 counts[2^size].
[[nodiscard]] std::vector<std::uint8_t> counts_to_binary(const std::vector<RunCounts>& runs);
[[nodiscard]] std::vector<RunCounts> counts_from_binary(const std::vector<std::uint8_t>& bytes);

/// Compact hash (16 hex digits) of a JSON document's canonical dump.
[[nodiscard]] std::string hash_json(const json& j);

[[nodiscard]] json read_json_file(const std::filesystem::path& path);
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
/// Refuses to replace an existing file unless `force`.
void write_text_file(const std::filesystem::path& path, const std::string& text, bool force);
void write_json_file(const std::filesystem::path& path, const json& j, bool force);
void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, bool force);

/// Adds {"provenance": {...}} to a JSON object.
[[nodiscard]] json stamped(json j, const Provenance& provenance);
/// A "# config_hash=...,seed=..." comment line for CSV files.
[[nodiscard]] std::string csv_stamp(const Provenance& provenance);

}  // namespace qabias::io
