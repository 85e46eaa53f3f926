#pragma once

// Brute-force reference implementations used as ground truth by the test
// suites and the losscheck command. Nothing here calls into the production
// ranking, pairing, loss or tensor code; only plain data types are shared.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ldrld/distill_config.hpp"
#include "ldrld/ranking.hpp"

namespace ldrld::oracle {

/// Descending order by repeated selection of the largest remaining entry
/// (first occurrence wins ties).
std::vector<std::size_t> rank_selection_sort(std::span<const double> z);

/// Top-d by literal extraction: take the student's maximum, exclude it from
/// both vectors, repeat d times. Remaining entries follow in the same fashion.
TopSplit topd_recursive(std::span<const double> z_t, std::span<const double> z_s, std::size_t depth);

/// Whole objective evaluated term by term from the defining formulas.
double ldrld(std::span<const double> z_t, std::span<const double> z_s, std::size_t label,
             const DistillConfig& cfg);

/// Individual terms, each written out directly.
double pair_term(std::span<const double> top_t, std::span<const double> top_s, const DistillConfig& cfg);
double softmax_kl(std::span<const double> t, std::span<const double> s, double tau);
double adw_weight(std::size_t r1, std::size_t r2, double epsilon, double delta, double lambda);

/// Central differences of f at x with step h. Throws on non-finite values.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double h = 1e-5);

/// C[m x n] = A[m x k] B[k x n] by explicit triple sum.
std::vector<double> matmul_triple_loop(std::span<const double> a, std::span<const double> b,
                                       std::size_t m, std::size_t k, std::size_t n);

}  // namespace ldrld::oracle
