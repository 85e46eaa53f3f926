#pragma once

// Self-checks of the objective against the brute-force oracles.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ldrld::cli {

struct LossCheckOptions {
  std::size_t oracle_samples = 1000;
  std::size_t gradient_samples = 200;
  std::size_t identity_samples = 500;
  std::uint64_t seed = 2024;
  /// Added to the ADW epsilon used by every check; non-zero only as a negative control.
  double perturb_epsilon = 0.0;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Omega_ADW(1, 2) with epsilon 1.5, delta 2, lambda 0.05, evaluated in double precision.
inline constexpr double kAdwGolden12 = 0.6885663811400463;

std::vector<CheckResult> run_losschecks(const LossCheckOptions& opts);
/// Fixed-width table, one row per check, then an overall verdict line.
void print_check_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace ldrld::cli
