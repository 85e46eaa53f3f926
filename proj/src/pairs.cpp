#include "ldrld/pairs.hpp"

#include <cmath>
#include <string>

#include "ldrld/errors.hpp"

namespace ldrld {

void AdwParams::validate() const {
  if (!(epsilon > 0.0)) throw InvalidArgument("ADW epsilon must be > 0");
  if (!(delta > 0.0)) throw InvalidArgument("ADW delta must be > 0");
  if (!(lambda >= 0.0)) throw InvalidArgument("ADW lambda must be >= 0");
}

std::vector<RankPair> generate_pairs(std::size_t depth) {
  if (depth < 2) throw InvalidArgument("pair generation needs depth >= 2, got " + std::to_string(depth));
  std::vector<RankPair> pairs;
  pairs.reserve(depth * (depth - 1) / 2);
  // Extending the selection by rank j adds the pairs (i, j) for every earlier i.
  for (std::size_t j = 2; j <= depth; ++j) {
    for (std::size_t i = 1; i < j; ++i) pairs.push_back({i, j});
  }
  return pairs;
}

double irw(std::size_t r1, std::size_t r2, const AdwParams& p) {
  if (r1 == 0 || r2 == 0) throw InvalidArgument("ranks are 1-based");
  if (r1 == r2) throw InvalidArgument("IRW is undefined for a self-pair");
  const double gap = r1 > r2 ? static_cast<double>(r1 - r2) : static_cast<double>(r2 - r1);
  return 1.0 / (gap + p.epsilon);
}

double erd(std::size_t r1, std::size_t r2, const AdwParams& p) {
  if (r1 == 0 || r2 == 0) throw InvalidArgument("ranks are 1-based");
  return p.delta * std::exp(-p.lambda * static_cast<double>(r1 + r2));
}

double adw(std::size_t r1, std::size_t r2, const AdwParams& p) {
  return irw(r1, r2, p) * erd(r1, r2, p);
}

PairSet make_pair_set(std::size_t depth, const AdwParams& p, bool adw_enabled) {
  p.validate();
  PairSet set;
  set.pairs = generate_pairs(depth);
  set.weights.reserve(set.pairs.size());
  for (const auto& pr : set.pairs) {
    set.weights.push_back(adw_enabled ? adw(pr.first, pr.second, p) : 1.0);
  }
  return set;
}

}  // namespace ldrld
