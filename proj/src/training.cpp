#include "ldrld/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ldrld/errors.hpp"
#include "ldrld/losses.hpp"

namespace ldrld {

void TrainSpec::validate() const {
  if (epochs == 0) throw InvalidArgument("epochs must be >= 1");
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  // lr == 0 is allowed: it freezes the parameters.
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
  if (!(lr_drop_factor > 0.0)) throw InvalidArgument("lr_drop_factor must be > 0");
  for (std::size_t i = 1; i < lr_drop_epochs.size(); ++i) {
    if (lr_drop_epochs[i] <= lr_drop_epochs[i - 1]) {
      throw InvalidArgument("lr_drop_epochs must be strictly increasing");
    }
  }
}

LrSchedule::LrSchedule(double base, std::size_t warmup_epochs, std::vector<std::size_t> drop_epochs,
                       double drop_factor)
    : base_(base), warmup_(warmup_epochs), drops_(std::move(drop_epochs)), factor_(drop_factor) {}

double LrSchedule::at(std::size_t epoch) const {
  if (epoch < warmup_) {
    return base_ * static_cast<double>(epoch + 1) / static_cast<double>(warmup_);
  }
  double lr = base_;
  for (std::size_t d : drops_) {
    if (epoch >= d) lr *= factor_;
  }
  return lr;
}

Sgd::Sgd(std::vector<Tensor> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.size(), 0.0);
}

void Sgd::step(double lr) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto grad = params_[k].grad();
    auto values = params_[k].mutable_data();
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      double g = grad[i];
      if (weight_decay_ != 0.0) g += weight_decay_ * values[i];
      if (momentum_ != 0.0) {
        v[i] = momentum_ * v[i] + g;
        g = v[i];
      }
      values[i] -= lr * g;
    }
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

namespace {

using BatchLossFn = std::function<BatchLoss(const Tensor& logits, std::span<const std::size_t> batch,
                                            std::span<const std::size_t> labels)>;

void check_dataset(const Dataset& data, const MlpSpec& spec, const char* what) {
  data.validate();
  if (data.dim != spec.input_dim) {
    throw ShapeError(std::string(what) + " dimension " + std::to_string(data.dim) +
                     " does not match model input " + std::to_string(spec.input_dim));
  }
  if (data.num_classes != spec.num_classes) {
    throw ShapeError(std::string(what) + " has " + std::to_string(data.num_classes) +
                     " classes, model has " + std::to_string(spec.num_classes));
  }
}

TrainResult run_training(Mlp model, const TrainSpec& tspec, const Dataset& train,
                         const Dataset* eval, const BatchLossFn& loss_fn, const StepHook& hook) {
  const LrSchedule schedule(tspec);
  Sgd opt(model.parameters(), tspec.momentum, tspec.weight_decay);
  TrainRecord record;
  record.seed = tspec.seed;
  const std::size_t n = train.num_samples;
  const std::size_t classes = model.spec().num_classes;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < tspec.epochs; ++epoch) {
    const double lr = schedule.at(epoch);
    const auto order = epoch_permutation(n, tspec.seed, epoch);
    LossBreakdown epoch_loss;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += tspec.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(tspec.batch_size, n - start));
      const auto labels = train.batch_labels(batch);
      const Tensor logits = model.forward(train.batch(batch));
      const BatchLoss loss = loss_fn(logits, batch, labels);
      for (const auto& s : loss.per_sample) epoch_loss += s;
      const auto pred = argmax_rows(logits.data(), classes);
      for (std::size_t b = 0; b < pred.size(); ++b) correct += pred[b] == labels[b];

      backward(loss.mean);
      if (hook) hook(StepInfo{epoch, step, lr, batch, model, loss.mean_parts});
      opt.step(lr);
      opt.zero_grad();
      ++step;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.loss = epoch_loss.scaled(1.0 / static_cast<double>(n));
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    stats.eval_accuracy = eval ? accuracy(model, *eval) : 0.0;
    record.epochs.push_back(stats);
  }
  return {std::move(model), std::move(record)};
}

}  // namespace

TrainResult train_supervised(const MlpSpec& spec, const TrainSpec& tspec, const Dataset& train,
                             const Dataset* eval, const StepHook& hook) {
  spec.validate();
  tspec.validate();
  check_dataset(train, spec, "training set");
  if (eval) check_dataset(*eval, spec, "eval set");
  return run_training(Mlp(spec), tspec, train, eval,
                      [](const Tensor& logits, std::span<const std::size_t>,
                         std::span<const std::size_t> labels) {
                        return supervised_batch_loss(logits, labels);
                      },
                      hook);
}

TrainResult distill(const Mlp& teacher, const MlpSpec& spec, const TrainSpec& tspec,
                    const DistillConfig& cfg, const Dataset& train, const Dataset* eval,
                    const StepHook& hook) {
  spec.validate();
  tspec.validate();
  cfg.validate(spec.num_classes);
  check_dataset(train, spec, "training set");
  if (eval) check_dataset(*eval, spec, "eval set");
  if (teacher.spec().num_classes != spec.num_classes) {
    throw ShapeError("teacher outputs " + std::to_string(teacher.spec().num_classes) +
                     " classes, student expects " + std::to_string(spec.num_classes));
  }
  if (teacher.spec().input_dim != spec.input_dim) {
    throw ShapeError("teacher and student input dimensions differ");
  }

  // Teacher logits are constants; one pass over the training set gives the
  // same per-sample values as evaluating the teacher inside every batch.
  const std::vector<double> teacher_logits = teacher.logits(train);
  const std::size_t classes = spec.num_classes;
  std::vector<double> block;
  return run_training(Mlp(spec), tspec, train, eval,
                      [&](const Tensor& logits, std::span<const std::size_t> batch,
                          std::span<const std::size_t> labels) {
                        block.clear();
                        for (std::size_t i : batch) {
                          block.insert(block.end(), teacher_logits.begin() + static_cast<std::ptrdiff_t>(i * classes),
                                       teacher_logits.begin() + static_cast<std::ptrdiff_t>((i + 1) * classes));
                        }
                        return distill_batch_loss(logits, block, labels, cfg);
                      },
                      hook);
}

}  // namespace ldrld
