#include "ldrld/losses.hpp"

#include <cmath>
#include <string>

#include "ldrld/errors.hpp"

namespace ldrld {

void DistillConfig::validate(std::size_t num_classes) const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be > 0");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) {
    throw InvalidArgument("loss weights alpha, beta, gamma must be >= 0");
  }
  adw.validate();
  if (method == Method::ldrld) {
    if (depth < 2) throw InvalidArgument("depth must be >= 2");
    if (num_classes != 0 && depth > num_classes) {
      throw InvalidArgument("depth " + std::to_string(depth) + " exceeds class count " +
                            std::to_string(num_classes));
    }
  }
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  task += o.task;
  weighted_pairs += o.weighted_pairs;
  llki += o.llki;
  rntk += o.rntk;
  vanilla_kd += o.vanilla_kd;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double f) const {
  return {task * f, weighted_pairs * f, llki * f, rntk * f, vanilla_kd * f, total * f};
}

double kl_two_point(std::array<double, 2> pt, std::array<double, 2> ps) {
  for (const auto& p : {pt, ps}) {
    if (p[0] < 0.0 || p[1] < 0.0 || std::abs(p[0] + p[1] - 1.0) > 1e-9) {
      throw InvalidArgument("kl_two_point expects two-point probability distributions");
    }
  }
  double kl = 0.0;
  for (int i = 0; i < 2; ++i) {
    if (pt[i] == 0.0) continue;
    if (ps[i] == 0.0) throw InvalidArgument("KL is infinite: student probability is 0");
    kl += pt[i] * std::log(pt[i] / ps[i]);
  }
  return kl;
}

Tensor cross_entropy(const Tensor& z, std::size_t label) {
  if (label >= z.size()) {
    throw InvalidArgument("label " + std::to_string(label) + " out of range for " +
                          std::to_string(z.size()) + " classes");
  }
  std::vector<double> pick(z.size(), 0.0);
  pick[label] = -1.0;
  return weighted_sum(log_softmax_masked(z, Mask(z.size(), true), 1.0), pick);
}

Tensor masked_softmax_kl(std::span<const double> z_t, const Tensor& z_s, const Mask& mask,
                         double tau) {
  if (z_t.size() != z_s.size()) throw ShapeError("teacher and student logits differ in length");
  const Tensor teacher_log = log_softmax_masked(Tensor::vector(z_t), mask, tau);
  return kl_div(teacher_log.data(), log_softmax_masked(z_s, mask, tau), mask);
}

namespace {

void require_aligned(std::size_t t, std::size_t s) {
  if (t != s) throw ShapeError("teacher and student selections differ in length");
}

double tau_factor(const DistillConfig& cfg) {
  return cfg.tau_square_scaling ? cfg.tau * cfg.tau : 1.0;
}

}  // namespace

Tensor pair_loss(std::span<const double> top_t, const Tensor& top_s, const DistillConfig& cfg) {
  require_aligned(top_t.size(), top_s.size());
  const std::size_t depth = top_s.size();
  if (depth < 2) throw InvalidArgument("pair loss needs at least 2 selected logits");
  const PairSet set = make_pair_set(depth, cfg.adw, cfg.adw_enabled);
  std::vector<Tensor> terms;
  terms.reserve(set.pairs.size());
  Mask mask(depth, false);
  for (std::size_t k = 0; k < set.pairs.size(); ++k) {
    const std::size_t i = set.pairs[k].first - 1;
    const std::size_t j = set.pairs[k].second - 1;
    mask[i] = mask[j] = true;
    terms.push_back(scale(masked_softmax_kl(top_t, top_s, mask, cfg.tau), set.weights[k]));
    mask[i] = mask[j] = false;
  }
  Tensor total = sum_scalars(terms);
  return cfg.tau_square_scaling ? scale(total, tau_factor(cfg)) : total;
}

double pair_loss(std::span<const double> top_t, std::span<const double> top_s,
                 const DistillConfig& cfg) {
  return pair_loss(top_t, Tensor::vector(top_s), cfg).item();
}

Tensor llki_loss(std::span<const double> top_t, const Tensor& top_s, double tau) {
  require_aligned(top_t.size(), top_s.size());
  if (top_s.size() < 2) throw InvalidArgument("LLKI needs at least 2 selected logits");
  return masked_softmax_kl(top_t, top_s, Mask(top_s.size(), true), tau);
}

double llki_loss(std::span<const double> top_t, std::span<const double> top_s, double tau) {
  return llki_loss(top_t, Tensor::vector(top_s), tau).item();
}

Tensor rntk_loss(std::span<const double> rest_t, const Tensor& rest_s, double tau) {
  require_aligned(rest_t.size(), rest_s.size());
  if (rest_s.size() < 2) return Tensor::scalar(0.0);
  return masked_softmax_kl(rest_t, rest_s, Mask(rest_s.size(), true), tau);
}

double rntk_loss(std::span<const double> rest_t, std::span<const double> rest_s, double tau) {
  if (rest_s.empty()) {
    require_aligned(rest_t.size(), 0);
    return 0.0;
  }
  return rntk_loss(rest_t, Tensor::vector(rest_s), tau).item();
}

Tensor vanilla_kd_loss(std::span<const double> z_t, const Tensor& z_s, double tau) {
  if (z_s.size() < 2) throw InvalidArgument("KD needs at least 2 classes");
  return masked_softmax_kl(z_t, z_s, Mask(z_s.size(), true), tau);
}

double vanilla_kd_loss(std::span<const double> z_t, std::span<const double> z_s, double tau) {
  return vanilla_kd_loss(z_t, Tensor::vector(z_s), tau).item();
}

SampleLoss sample_loss(std::span<const double> z_t, const Tensor& z_s, std::size_t label,
                       const DistillConfig& cfg, const RankOrder* frozen_order) {
  if (z_s.rank() != 1) throw ShapeError("sample_loss expects 1-D student logits");
  const std::size_t classes = z_s.size();
  if (z_t.size() != classes) throw ShapeError("teacher and student logits differ in length");
  if (label >= classes) {
    throw InvalidArgument("label " + std::to_string(label) + " out of range for " +
                          std::to_string(classes) + " classes");
  }
  cfg.validate(classes);

  SampleLoss out;
  const Tensor task = cross_entropy(z_s, label);
  out.parts.task = task.item();
  const double tf = tau_factor(cfg);

  if (cfg.method == Method::vanilla_kd) {
    Tensor kd = vanilla_kd_loss(z_t, z_s, cfg.tau);
    if (cfg.tau_square_scaling) kd = scale(kd, tf);
    out.parts.vanilla_kd = kd.item();
    out.total = add(task, scale(kd, cfg.gamma));
    out.parts.total = out.total.item();
    return out;
  }

  const RankOrder order = frozen_order ? *frozen_order : rank_by_student(z_s.data());
  const TopSplit split = split_top_d(z_t, z_s.data(), order, cfg.depth);

  const Tensor top_s = gather(z_s, split.top_index);
  const Tensor pairs = pair_loss(split.top_t, top_s, cfg);
  Tensor llki = llki_loss(split.top_t, top_s, cfg.tau);

  // The remaining classes are normalized among themselves: the top-d entries
  // are excluded from the softmax rather than multiplied by -inf.
  Tensor rntk = Tensor::scalar(0.0);
  if (split.rest_index.size() >= 2) {
    Mask rest(classes, false);
    for (std::size_t idx : split.rest_index) rest[idx] = true;
    rntk = masked_softmax_kl(z_t, z_s, rest, cfg.tau);
  }
  if (cfg.tau_square_scaling) {
    llki = scale(llki, tf);
    rntk = scale(rntk, tf);
  }

  out.parts.weighted_pairs = pairs.item();
  out.parts.llki = llki.item();
  out.parts.rntk = rntk.item();
  const Tensor local = add(pairs, llki);
  out.total = add(task, add(scale(local, cfg.alpha), scale(rntk, cfg.beta)));
  out.parts.total = out.total.item();
  return out;
}

LossBreakdown ldrld_total(std::span<const double> z_t, std::span<const double> z_s,
                          std::size_t label, const DistillConfig& cfg) {
  return sample_loss(z_t, Tensor::vector(z_s), label, cfg).parts;
}

namespace {

template <typename PerSample>
BatchLoss reduce_batch(const Tensor& student_logits, std::span<const std::size_t> labels,
                       PerSample&& per_sample) {
  if (student_logits.rank() != 2) throw ShapeError("batch loss expects B x C logits");
  const std::size_t batch = student_logits.rows();
  if (batch == 0) throw InvalidArgument("empty batch");
  if (labels.size() != batch) throw ShapeError("label count does not match batch size");
  BatchLoss out;
  std::vector<Tensor> totals;
  totals.reserve(batch);
  out.per_sample.reserve(batch);
  LossBreakdown acc;
  for (std::size_t b = 0; b < batch; ++b) {
    SampleLoss s = per_sample(row(student_logits, b), b);
    totals.push_back(std::move(s.total));
    acc += s.parts;
    out.per_sample.push_back(s.parts);
  }
  const double inv = 1.0 / static_cast<double>(batch);
  out.mean = scale(sum_scalars(totals), inv);
  out.mean_parts = acc.scaled(inv);
  return out;
}

}  // namespace

BatchLoss distill_batch_loss(const Tensor& student_logits, std::span<const double> teacher_logits,
                             std::span<const std::size_t> labels, const DistillConfig& cfg) {
  const std::size_t classes = student_logits.rank() == 2 ? student_logits.cols() : 0;
  if (teacher_logits.size() != labels.size() * classes) {
    throw ShapeError("teacher logits do not match the student batch");
  }
  return reduce_batch(student_logits, labels, [&](const Tensor& z_s, std::size_t b) {
    return sample_loss(teacher_logits.subspan(b * classes, classes), z_s, labels[b], cfg);
  });
}

BatchLoss supervised_batch_loss(const Tensor& student_logits, std::span<const std::size_t> labels) {
  return reduce_batch(student_logits, labels, [&](const Tensor& z_s, std::size_t b) {
    SampleLoss s;
    s.total = cross_entropy(z_s, labels[b]);
    s.parts.task = s.parts.total = s.total.item();
    return s;
  });
}

}  // namespace ldrld
