#include "ldrld/ranking.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "ldrld/errors.hpp"

namespace ldrld {

RankOrder rank_by(std::span<const double> logits, Role source) {
  if (logits.size() < 2) throw InvalidArgument("ranking needs at least 2 classes");
  RankOrder order;
  order.source = source;
  order.perm.resize(logits.size());
  std::iota(order.perm.begin(), order.perm.end(), std::size_t{0});
  std::stable_sort(order.perm.begin(), order.perm.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  return order;
}

RankOrder rank_by_student(std::span<const double> z_s) { return rank_by(z_s, Role::student); }

TopSplit split_top_d(std::span<const double> z_t, std::span<const double> z_s,
                     const RankOrder& order, std::size_t depth) {
  const std::size_t classes = z_s.size();
  if (z_t.size() != classes) throw ShapeError("teacher and student logits differ in length");
  if (depth < 2 || depth > classes) {
    throw InvalidArgument("depth " + std::to_string(depth) + " outside [2, " +
                          std::to_string(classes) + "]");
  }
  if (order.source != Role::student) throw InvalidArgument("rank order must come from the student");
  if (order.perm.size() != classes) throw ShapeError("rank order length does not match logits");
  std::vector<bool> seen(classes, false);
  for (std::size_t idx : order.perm) {
    if (idx >= classes || seen[idx]) throw InvalidArgument("rank order is not a permutation");
    seen[idx] = true;
  }

  TopSplit split;
  split.depth = depth;
  const auto cut = order.perm.begin() + static_cast<std::ptrdiff_t>(depth);
  split.top_index.assign(order.perm.begin(), cut);
  split.rest_index.assign(cut, order.perm.end());
  for (std::size_t idx : split.top_index) {
    split.top_t.push_back(z_t[idx]);
    split.top_s.push_back(z_s[idx]);
  }
  for (std::size_t idx : split.rest_index) {
    split.rest_t.push_back(z_t[idx]);
    split.rest_s.push_back(z_s[idx]);
  }
  return split;
}

}  // namespace ldrld
