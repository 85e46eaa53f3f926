#pragma once

// Distillation objectives.
//
// Every term exists in two forms: a differentiable one taking the student's
// logits as a Tensor (teacher logits are always constants), and a value-only
// one over plain arrays. The value form runs the differentiable code on
// constant tensors, so both share one implementation.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "ldrld/distill_config.hpp"
#include "ldrld/ranking.hpp"
#include "ldrld/tensor.hpp"

namespace ldrld {

/// KL(pt || ps) over two-point distributions, with 0 log(0/q) = 0.
double kl_two_point(std::array<double, 2> pt, std::array<double, 2> ps);

/// -log softmax(z)[label] at temperature 1.
Tensor cross_entropy(const Tensor& z, std::size_t label);

/// KL between temperature softmaxes of teacher and student, both normalized
/// over the masked entries only.
Tensor masked_softmax_kl(std::span<const double> z_t, const Tensor& z_s, const Mask& mask,
                         double tau);

/// Sum over all top-d pairs of w_ij * KL of the two-element softmaxes.
/// w_ij is the ADW weight of ranks (i, j), or 1 with ADW off.
Tensor pair_loss(std::span<const double> top_t, const Tensor& top_s, const DistillConfig& cfg);
double pair_loss(std::span<const double> top_t, std::span<const double> top_s,
                 const DistillConfig& cfg);

/// d-way softmax KL over the selected logits.
Tensor llki_loss(std::span<const double> top_t, const Tensor& top_s, double tau);
double llki_loss(std::span<const double> top_t, std::span<const double> top_s, double tau);

/// Softmax KL over the remaining C-d logits; 0 when fewer than two remain.
Tensor rntk_loss(std::span<const double> rest_t, const Tensor& rest_s, double tau);
double rntk_loss(std::span<const double> rest_t, std::span<const double> rest_s, double tau);

/// Full C-way softmax KL.
Tensor vanilla_kd_loss(std::span<const double> z_t, const Tensor& z_s, double tau);
double vanilla_kd_loss(std::span<const double> z_t, std::span<const double> z_s, double tau);

struct SampleLoss {
  Tensor total;
  LossBreakdown parts;
};

/// Full objective for one sample. The rank order is taken from the student's
/// current logits unless `frozen_order` is given; it is a constant either way.
SampleLoss sample_loss(std::span<const double> z_t, const Tensor& z_s, std::size_t label,
                       const DistillConfig& cfg, const RankOrder* frozen_order = nullptr);

LossBreakdown ldrld_total(std::span<const double> z_t, std::span<const double> z_s,
                          std::size_t label, const DistillConfig& cfg);

struct BatchLoss {
  Tensor mean;                ///< differentiable batch mean of per-sample totals
  LossBreakdown mean_parts;   ///< batch means of every component
  std::vector<LossBreakdown> per_sample;
};

/// Mean distillation objective over the rows of `student_logits` (B x C).
/// `teacher_logits` is the matching row-major B x C block.
BatchLoss distill_batch_loss(const Tensor& student_logits, std::span<const double> teacher_logits,
                             std::span<const std::size_t> labels, const DistillConfig& cfg);

/// Mean cross-entropy over the rows of `student_logits`.
BatchLoss supervised_batch_loss(const Tensor& student_logits, std::span<const std::size_t> labels);

}  // namespace ldrld
