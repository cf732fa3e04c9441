#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace qabias {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  /// Swaps alpha_from_prob for a corrupted copy so the harness can show it
  /// catches a broken estimator.
  bool mutate_alpha = false;
};

/// Brute-force and closed-form oracles for the invariants of every module.
[[nodiscard]] std::vector<CheckResult> run_oracle_suite(const VerifyOptions& options);

[[nodiscard]] nlohmann::json to_json(const std::vector<CheckResult>& results);

}  // namespace qabias
