#include "ldrld/cli/losscheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>

#include "ldrld/losses.hpp"
#include "ldrld/oracle.hpp"
#include "ldrld/pairs.hpp"

namespace ldrld::cli {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

struct Cases {
  explicit Cases(std::uint64_t seed, double eps_shift) : rng(seed), shift(eps_shift) {}
  std::mt19937_64 rng;
  double shift;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
  std::vector<double> vec(std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(-5.0, 5.0);
    return v;
  }
  DistillConfig config(std::size_t classes) {
    DistillConfig cfg;
    cfg.depth = index(2, classes);
    cfg.tau = uniform(0.5, 8.0);
    cfg.alpha = uniform(0.0, 8.0);
    cfg.beta = uniform(0.0, 8.0);
    cfg.adw.epsilon += shift;
    cfg.adw_enabled = index(0, 1) == 1;
    cfg.tau_square_scaling = index(0, 3) == 0;
    return cfg;
  }
};

CheckResult oracle_equivalence(const LossCheckOptions& o) {
  Cases g(o.seed, o.perturb_epsilon);
  double worst = 0.0;
  for (std::size_t n = 0; n < o.oracle_samples; ++n) {
    const std::size_t c = g.index(5, 30);
    const auto cfg = g.config(c);
    const auto zt = g.vec(c), zs = g.vec(c);
    const std::size_t label = g.index(0, c - 1);
    worst = std::max(worst, std::abs(ldrld_total(zt, zs, label, cfg).total - oracle::ldrld(zt, zs, label, cfg)));
  }
  return {"oracle equivalence", worst < 1e-9,
          fmt("max |diff| %.2e over %.0f samples", worst, static_cast<double>(o.oracle_samples))};
}

CheckResult gradient_check(const LossCheckOptions& o) {
  Cases g(o.seed + 1, o.perturb_epsilon);
  double worst = 0.0;
  for (std::size_t n = 0; n < o.gradient_samples; ++n) {
    const std::size_t c = g.index(5, 30);
    const auto cfg = g.config(c);
    const auto zt = g.vec(c), zs = g.vec(c);
    const std::size_t label = g.index(0, c - 1);
    const RankOrder frozen = rank_by_student(zs);
    Tensor x = Tensor::vector(zs, true);
    backward(sample_loss(zt, x, label, cfg, &frozen).total);
    const auto fd = oracle::fd_gradient(
        [&](std::span<const double> v) {
          NoGradGuard ng;
          return sample_loss(zt, Tensor::vector(v), label, cfg, &frozen).total.item();
        },
        zs);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      diff += (x.grad()[i] - fd[i]) * (x.grad()[i] - fd[i]);
      norm = std::max({norm, std::abs(x.grad()[i]), std::abs(fd[i])});
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(norm, 1e-8));
  }
  return {"gradient vs finite differences", worst < 1e-4,
          fmt("max relative error %.2e over %.0f samples", worst, static_cast<double>(o.gradient_samples))};
}

CheckResult pair_counts() {
  for (std::size_t d = 2; d <= 30; ++d) {
    const auto pairs = generate_pairs(d);
    if (pairs.size() != d * (d - 1) / 2) {
      return {"pair counts", false, fmt("d=%.0f gives %.0f pairs", static_cast<double>(d),
                                        static_cast<double>(pairs.size()))};
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> brute, generated;
  for (std::size_t i = 1; i <= 7; ++i) {
    for (std::size_t j = i + 1; j <= 7; ++j) brute.emplace(i, j);
  }
  for (const auto& p : generate_pairs(7)) generated.emplace(p.first, p.second);
  return {"pair counts", generated == brute, "d(d-1)/2 for d=2..30; d=7 set equals brute force (21)"};
}

CheckResult adw_golden(const LossCheckOptions& o) {
  AdwParams p;
  p.epsilon += o.perturb_epsilon;
  const double omega = adw(1, 2, p);
  const bool ok = std::abs(irw(1, 2, p) - 0.4) < 1e-12 &&
                  std::abs(erd(1, 2, p) - 2.0 * std::exp(-0.15)) < 1e-12 &&
                  std::abs(omega - kAdwGolden12) < 1e-6;
  return {"ADW golden value", ok, fmt("Omega_ADW(1,2) = %.10f (expected %.10f)", omega, kAdwGolden12)};
}

CheckResult adw_monotonicity(const LossCheckOptions& o) {
  AdwParams p;
  p.epsilon += o.perturb_epsilon;
  std::vector<RankPair> all;
  for (std::size_t r1 = 1; r1 <= 20; ++r1) {
    for (std::size_t r2 = r1 + 1; r2 <= 20; ++r2) all.push_back({r1, r2});
  }
  for (const auto& a : all) {
    const double wa = adw(a.first, a.second, p);
    if (!(wa > 0.0) || !std::isfinite(wa)) return {"ADW monotonicity", false, "non-positive weight"};
    for (const auto& b : all) {
      const double wb = adw(b.first, b.second, p);
      const std::size_t sa = a.first + a.second, sb = b.first + b.second;
      const std::size_t ga = a.second - a.first, gb = b.second - b.first;
      if ((sa == sb && ga < gb && !(wa > wb)) || (ga == gb && sa < sb && !(wa > wb))) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "(%zu,%zu) vs (%zu,%zu)", a.first, a.second, b.first, b.second);
        return {"ADW monotonicity", false, buf};
      }
    }
  }
  return {"ADW monotonicity", true, "fixed sum and fixed gap orders, ranks <= 20"};
}

CheckResult loss_identities(const LossCheckOptions& o) {
  Cases g(o.seed + 2, o.perturb_epsilon);
  double worst_zero = 0.0, worst_shift = 0.0, most_negative = 0.0;
  for (std::size_t n = 0; n < o.identity_samples; ++n) {
    const std::size_t c = g.index(5, 30);
    const auto cfg = g.config(c);
    const auto zt = g.vec(c), zs = g.vec(c);
    const std::size_t label = g.index(0, c - 1);
    const auto parts = ldrld_total(zt, zs, label, cfg);
    most_negative = std::min({most_negative, parts.weighted_pairs, parts.llki, parts.rntk});
    const auto same = ldrld_total(zs, zs, label, cfg);
    worst_zero = std::max({worst_zero, std::abs(same.weighted_pairs), std::abs(same.llki), std::abs(same.rntk)});
    const double k = g.uniform(-10.0, 10.0);
    auto zt2 = zt, zs2 = zs;
    for (auto& v : zt2) v += k;
    for (auto& v : zs2) v += k;
    const auto shifted = ldrld_total(zt2, zs2, label, cfg);
    worst_shift = std::max({worst_shift, std::abs(shifted.weighted_pairs - parts.weighted_pairs),
                            std::abs(shifted.llki - parts.llki), std::abs(shifted.rntk - parts.rntk)});
  }
  const bool ok = most_negative >= 0.0 && worst_zero <= 1e-10 && worst_shift <= 1e-10;
  char buf[160];
  std::snprintf(buf, sizeof buf, "min term %.1e, |teacher==student| %.1e, |shift| %.1e", most_negative,
                worst_zero, worst_shift);
  return {"loss identities", ok, buf};
}

}  // namespace

std::vector<CheckResult> run_losschecks(const LossCheckOptions& opts) {
  return {oracle_equivalence(opts), gradient_check(opts), pair_counts(),
          adw_golden(opts),         adw_monotonicity(opts), loss_identities(opts)};
}

void print_check_table(std::ostream& out, const std::vector<CheckResult>& results) {
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ')
        << r.detail << '\n';
  }
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.passed;
  out << (all ? "all checks passed" : std::to_string(failed) + " check(s) failed") << '\n';
}

}  // namespace ldrld::cli
