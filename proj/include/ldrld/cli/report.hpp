#pragma once

// JSON reports and CSV curves. Reports carry no timestamps or durations so
// that identical configs and seeds give byte-identical files; wall-clock
// figures go to a separate timing file.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ldrld/cli/config.hpp"
#include "ldrld/training.hpp"

namespace ldrld::cli {

inline constexpr int kReportVersion = 1;

struct Summary {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation; 0 for a single value
};
Summary summarize(std::span<const double> values);

Json loss_json(const LossBreakdown& loss);
Json epoch_json(const EpochStats& e);
/// One seed's run: final accuracies plus the per-epoch curve.
Json run_json(std::uint64_t seed, const TrainRecord& record, const std::string& checkpoint);
Json summary_json(std::span<const double> values);

/// Final eval accuracies of the runs, in order.
std::vector<double> final_eval_accuracies(const std::vector<TrainRecord>& records);

/// Writes `doc` as indented JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& doc);

struct CurveSeries {
  std::string run;  ///< e.g. "distill" or "scratch"
  std::uint64_t seed;
  const TrainRecord* record;
};
void write_curves_csv(const std::filesystem::path& path, const std::vector<CurveSeries>& series);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Throws ConfigError unless the report's aggregates agree with its per-seed values.
void check_report_consistency(const Json& report);

}  // namespace ldrld::cli
