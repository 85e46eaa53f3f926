#pragma once

#include <cstddef>

#include "ldrld/pairs.hpp"

namespace ldrld {

enum class Method {
  ldrld,       ///< task + alpha * (pairs + llki) + beta * rntk
  vanilla_kd,  ///< task + gamma * full softmax KL
};

struct DistillConfig {
  Method method = Method::ldrld;
  std::size_t depth = 7;
  double tau = 4.0;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  AdwParams adw;
  bool adw_enabled = true;
  /// Multiply every distillation term by tau^2.
  bool tau_square_scaling = false;

  /// Checks scalar ranges, and depth against `num_classes` when nonzero.
  void validate(std::size_t num_classes = 0) const;
};

/// Per-sample or batch-mean loss values. Unused terms are 0.
struct LossBreakdown {
  double task = 0.0;
  double weighted_pairs = 0.0;
  double llki = 0.0;
  double rntk = 0.0;
  double vanilla_kd = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double factor) const;
};

}  // namespace ldrld
