#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ldrld/data.hpp"
#include "ldrld/distill_config.hpp"
#include "ldrld/model.hpp"

namespace ldrld {

struct TrainSpec {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t warmup_epochs = 0;
  std::vector<std::size_t> lr_drop_epochs;
  double lr_drop_factor = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear warmup, then step drops.
class LrSchedule {
 public:
  LrSchedule(double base, std::size_t warmup_epochs, std::vector<std::size_t> drop_epochs,
             double drop_factor);
  explicit LrSchedule(const TrainSpec& spec)
      : LrSchedule(spec.lr, spec.warmup_epochs, spec.lr_drop_epochs, spec.lr_drop_factor) {}

  /// base*(e+1)/warmup while e < warmup, else base*factor^(drops at or before e).
  double at(std::size_t epoch) const;

 private:
  double base_;
  std::size_t warmup_;
  std::vector<std::size_t> drops_;
  double factor_;
};

/// SGD with heavy-ball momentum and L2 weight decay:
///   g = grad + wd * p;  v = mu * v + g;  p -= lr * v
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, double momentum, double weight_decay);

  void step(double lr);
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double momentum_;
  double weight_decay_;
};

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;  ///< per-sample mean over the epoch
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;  ///< 0 when no eval set is given
};

struct TrainRecord {
  std::vector<EpochStats> epochs;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Mlp model;
  TrainRecord record;
};

/// State handed to a StepHook just before the optimizer update.
struct StepInfo {
  std::size_t epoch;
  std::size_t step;
  double lr;
  std::span<const std::size_t> batch;
  const Mlp& model;  ///< parameters as they were for this batch's forward pass
  const LossBreakdown& batch_loss;
};
using StepHook = std::function<void(const StepInfo&)>;

TrainResult train_supervised(const MlpSpec& spec, const TrainSpec& tspec, const Dataset& train,
                             const Dataset* eval = nullptr, const StepHook& hook = {});

/// Trains a fresh student on the distillation objective; the teacher is
/// evaluated once per sample and never updated.
TrainResult distill(const Mlp& teacher, const MlpSpec& spec, const TrainSpec& tspec,
                    const DistillConfig& cfg, const Dataset& train, const Dataset* eval = nullptr,
                    const StepHook& hook = {});

}  // namespace ldrld
