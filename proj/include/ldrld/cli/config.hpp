#pragma once

// Experiment configuration: a JSON document merged over built-in defaults,
// then adjusted by dotted key=value overrides.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldrld/data.hpp"
#include "ldrld/distill_config.hpp"
#include "ldrld/training.hpp"

namespace ldrld::cli {

using Json = nlohmann::ordered_json;

struct DatasetConfig {
  std::string kind = "blobs";  // blobs | delimited | idx
  std::uint64_t seed = 0;
  BlobSpec blobs;
  std::size_t eval_per_class = 50;
  // delimited
  std::string train_path, eval_path;
  DelimitedOptions delimited;
  // idx
  std::string train_images, train_labels, eval_images, eval_labels;
  std::size_t idx_num_classes = 0;
};

struct NetworkConfig {
  std::vector<std::size_t> hidden_dims;
  std::uint64_t seed = 0;  // teacher only; students take theirs from the seed list
  TrainSpec train;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  NetworkConfig teacher;
  NetworkConfig student;
  DistillConfig distill;
  std::string out = "runs";
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

Json default_config_json();

/// Recursively overlays `patch` onto `base`. Keys absent from `base` are
/// rejected with a ConfigError naming the dotted path.
void merge_config(Json& base, const Json& patch);

/// "a.b.c=value". The value is parsed as JSON when possible, else taken as a string.
void apply_override(Json& doc, const std::string& assignment);

/// Builds and validates a config from a fully merged document.
ExperimentConfig parse_config(const Json& doc);
/// Resolved config in the same layout as the input; parse_config(to_json(c)) == c.
Json to_json(const ExperimentConfig& cfg);

/// Defaults, then the file (if non-empty), then each override in order.
Json load_config_document(const std::filesystem::path& file, const std::vector<std::string>& overrides);

/// "0,1,2" or "0..2".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// "key=a..b" (integers, inclusive) or "key=v1,v2,...". Short key "d" means distill.depth.
struct SweepSpec {
  std::string key;
  std::vector<std::string> values;
};
SweepSpec parse_sweep(const std::string& text);

}  // namespace ldrld::cli
