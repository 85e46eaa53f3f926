#pragma once

#include <cstddef>
#include <vector>

namespace ldrld {

/// Two 1-based rank positions within the top-d, first < second.
struct RankPair {
  std::size_t first;
  std::size_t second;

  friend bool operator==(const RankPair&, const RankPair&) = default;
};

/// Constants of the adaptive decay weight.
struct AdwParams {
  double epsilon = 1.50;  ///< keeps the inverse rank weight finite
  double delta = 2.0;     ///< scale of the exponential decay
  double lambda = 0.05;   ///< decay rate over the rank sum

  void validate() const;
};

/// Top-d pairs with their loss weights.
struct PairSet {
  std::vector<RankPair> pairs;
  std::vector<double> weights;
};

/// All d(d-1)/2 pairs, grown one rank at a time: (1,2); (1,3),(2,3); ...
std::vector<RankPair> generate_pairs(std::size_t depth);

/// 1 / (|r2 - r1| + epsilon)
double irw(std::size_t r1, std::size_t r2, const AdwParams& p);
/// delta * exp(-lambda * (r1 + r2))
double erd(std::size_t r1, std::size_t r2, const AdwParams& p);
/// irw * erd
double adw(std::size_t r1, std::size_t r2, const AdwParams& p);

/// Pairs for `depth`, weighted by adw() or uniformly 1 when ADW is off.
PairSet make_pair_set(std::size_t depth, const AdwParams& p, bool adw_enabled);

}  // namespace ldrld
