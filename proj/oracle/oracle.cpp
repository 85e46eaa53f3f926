#include "ldrld/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ldrld::oracle {

std::vector<std::size_t> rank_selection_sort(std::span<const double> z) {
  std::vector<bool> taken(z.size(), false);
  std::vector<std::size_t> order;
  for (std::size_t step = 0; step < z.size(); ++step) {
    std::size_t best = z.size();
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (taken[i]) continue;
      if (best == z.size() || z[i] > z[best]) best = i;
    }
    taken[best] = true;
    order.push_back(best);
  }
  return order;
}

TopSplit topd_recursive(std::span<const double> z_t, std::span<const double> z_s, std::size_t depth) {
  if (z_t.size() != z_s.size()) throw std::invalid_argument("length mismatch");
  if (depth < 2 || depth > z_s.size()) throw std::invalid_argument("depth out of range");
  // `excluded` plays the role of the -inf mask entries.
  std::vector<bool> excluded(z_s.size(), false);
  TopSplit out;
  out.depth = depth;
  for (std::size_t k = 0; k < z_s.size(); ++k) {
    std::size_t i_max = z_s.size();
    for (std::size_t i = 0; i < z_s.size(); ++i) {
      if (!excluded[i] && (i_max == z_s.size() || z_s[i] > z_s[i_max])) i_max = i;
    }
    excluded[i_max] = true;
    if (k < depth) {
      out.top_index.push_back(i_max);
      out.top_t.push_back(z_t[i_max]);
      out.top_s.push_back(z_s[i_max]);
    } else {
      out.rest_index.push_back(i_max);
      out.rest_t.push_back(z_t[i_max]);
      out.rest_s.push_back(z_s[i_max]);
    }
  }
  return out;
}

double softmax_kl(std::span<const double> t, std::span<const double> s, double tau) {
  double zt = 0.0, zs = 0.0;
  for (double v : t) zt += std::exp(v / tau);
  for (double v : s) zs += std::exp(v / tau);
  double kl = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double pt = std::exp(t[i] / tau) / zt;
    const double ps = std::exp(s[i] / tau) / zs;
    if (pt > 0.0) kl += pt * std::log(pt / ps);
  }
  return kl;
}

double adw_weight(std::size_t r1, std::size_t r2, double epsilon, double delta, double lambda) {
  const double ri = static_cast<double>(r1), rj = static_cast<double>(r2);
  return (1.0 / (std::fabs(rj - ri) + epsilon)) * (delta * std::exp(-lambda * (ri + rj)));
}

double pair_term(std::span<const double> top_t, std::span<const double> top_s, const DistillConfig& cfg) {
  const std::size_t d = top_s.size();
  double total = 0.0;
  for (std::size_t i = 1; i < d; ++i) {
    for (std::size_t j = i + 1; j <= d; ++j) {
      // Two-element softmax of the pair, written out as in the definition.
      const double eti = std::exp(top_t[i - 1] / cfg.tau), etj = std::exp(top_t[j - 1] / cfg.tau);
      const double esi = std::exp(top_s[i - 1] / cfg.tau), esj = std::exp(top_s[j - 1] / cfg.tau);
      const double pti = eti / (eti + etj), ptj = etj / (eti + etj);
      const double psi = esi / (esi + esj), psj = esj / (esi + esj);
      const double kl = pti * std::log(pti / psi) + ptj * std::log(ptj / psj);
      const double w = cfg.adw_enabled
                           ? adw_weight(i, j, cfg.adw.epsilon, cfg.adw.delta, cfg.adw.lambda)
                           : 1.0;
      total += w * kl;
    }
  }
  return total;
}

double ldrld(std::span<const double> z_t, std::span<const double> z_s, std::size_t label,
             const DistillConfig& cfg) {
  const std::size_t c = z_s.size();
  if (label >= c) throw std::invalid_argument("label out of range");
  double norm = 0.0;
  for (double v : z_s) norm += std::exp(v);
  const double task = -std::log(std::exp(z_s[label]) / norm);
  const double t2 = cfg.tau_square_scaling ? cfg.tau * cfg.tau : 1.0;

  if (cfg.method == Method::vanilla_kd) {
    return task + cfg.gamma * t2 * softmax_kl(z_t, z_s, cfg.tau);
  }
  if (cfg.depth < 2 || cfg.depth > c) throw std::invalid_argument("depth out of range");
  const TopSplit split = topd_recursive(z_t, z_s, cfg.depth);
  const double pairs = t2 * pair_term(split.top_t, split.top_s, cfg);
  const double llki = t2 * softmax_kl(split.top_t, split.top_s, cfg.tau);
  const double rntk = split.rest_s.size() >= 2 ? t2 * softmax_kl(split.rest_t, split.rest_s, cfg.tau) : 0.0;
  return task + cfg.alpha * (pairs + llki) + cfg.beta * rntk;
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double h) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + h;
    const double up = f(point);
    point[i] = orig - h;
    const double down = f(point);
    point[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("non-finite function value at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::vector<double> matmul_triple_loop(std::span<const double> a, std::span<const double> b,
                                       std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> c(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
  return c;
}

}  // namespace ldrld::oracle
