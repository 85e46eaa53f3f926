#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ldrld/data.hpp"
#include "ldrld/tensor.hpp"

namespace ldrld {

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Fully connected ReLU network. Copies are deep.
class Mlp {
 public:
  /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  explicit Mlp(MlpSpec spec);
  /// Adopts existing parameter buffers (weights [in x out] then bias [out], per layer).
  Mlp(MlpSpec spec, std::vector<Tensor> params);

  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&&) noexcept = default;
  Mlp& operator=(Mlp&&) noexcept = default;

  const MlpSpec& spec() const { return spec_; }
  /// B x input_dim -> B x num_classes logits.
  Tensor forward(const Tensor& x) const;
  /// Logits for every sample, computed without recording a graph.
  std::vector<double> logits(const Dataset& data) const;

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  /// All parameter values concatenated in layer order.
  std::vector<double> flat_parameters() const;
  void set_trainable(bool trainable);

 private:
  MlpSpec spec_;
  std::vector<Tensor> params_;
};

/// argmax per row; ties go to the lower index.
std::vector<std::size_t> argmax_rows(std::span<const double> logits, std::size_t classes);
double accuracy(const Mlp& model, const Dataset& data);

inline constexpr char kCheckpointMagic[] = "LDRLDCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little-endian): magic "LDRLDCKPT" (9 bytes), u32 version,
/// u64 input_dim, u64 hidden count, u64 hidden dims..., u64 num_classes,
/// u64 seed, u64 buffer count, then per buffer u64 rows, u64 cols and
/// rows*cols f64 values, in layer order (weight, bias).
std::string serialize_checkpoint(const Mlp& model);
Mlp deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const Mlp& model, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace ldrld
