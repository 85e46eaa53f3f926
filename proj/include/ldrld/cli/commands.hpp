#pragma once

// Experiment runners behind the ldrld subcommands, and the CLI entry point.

#include <cstdint>
#include <string>
#include <vector>

#include "ldrld/cli/config.hpp"
#include "ldrld/model.hpp"
#include "ldrld/training.hpp"

namespace ldrld::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsageError = 2 };

struct DataPair {
  Dataset train;
  Dataset eval;
};
DataPair load_data(const DatasetConfig& cfg);

MlpSpec teacher_spec(const ExperimentConfig& cfg, const Dataset& train);
MlpSpec student_spec(const ExperimentConfig& cfg, const Dataset& train, std::uint64_t seed);

TrainResult train_teacher(const ExperimentConfig& cfg, const DataPair& data);

struct StudentRun {
  std::uint64_t seed = 0;
  TrainResult result;
  double seconds = 0.0;
};

/// One student per configured seed, distilled from `teacher`, or trained
/// from scratch when `teacher` is null. Up to `jobs` seeds run concurrently;
/// results come back in seed-list order either way.
std::vector<StudentRun> run_students(const ExperimentConfig& cfg, const DataPair& data, const Mlp* teacher,
                                     std::size_t jobs = 1);

/// 64-bit FNV-1a of a byte string, used to identify checkpoints in reports.
std::string fingerprint(const std::string& bytes);

/// stderr logger; LDRLD_LOG picks the level (trace, debug, info, warn, error, off).
void configure_logging();

/// Parses arguments and runs a subcommand. Returns an ExitCode.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace ldrld::cli
