#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ldrld/tensor.hpp"

namespace ldrld {

enum class Split { train, eval };

/// N x D features (row-major) with class labels in [0, num_classes).
struct Dataset {
  std::size_t num_samples = 0;
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;
  std::vector<std::size_t> labels;
  Split split = Split::train;

  /// Throws DataError unless every invariant holds.
  void validate() const;
  std::span<const double> sample(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  /// Rows `indices` stacked into a B x D constant tensor.
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> batch_labels(std::span<const std::size_t> indices) const;
};

struct BlobSpec {
  std::size_t classes = 20;
  std::size_t per_class = 100;
  std::size_t dim = 32;
  double spread = 1.0;
};

/// Isotropic Gaussian clusters around class means drawn on the unit sphere.
/// The means depend on `seed` only; the noise also depends on `split`, so the
/// train and eval sets of one seed share their class geometry.
Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed, Split split = Split::train);

struct DelimitedOptions {
  char delimiter = ',';
  /// Column holding the label; negative counts from the end (-1 = last).
  int label_column = -1;
  bool has_header = false;
  /// 0 infers max(label) + 1.
  std::size_t num_classes = 0;
};

Dataset load_delimited(const std::filesystem::path& path, const DelimitedOptions& opts = {},
                       Split split = Split::train);
/// Writes features then the label as the last column, shortest round-trip formatting.
void write_delimited(const Dataset& data, const std::filesystem::path& path, char delimiter = ',');

/// IDX image/label pair (magic 0x00000803 / 0x00000801). Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t num_classes = 0, Split split = Split::train);

/// Shuffled sample order for one epoch, determined by (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace ldrld
