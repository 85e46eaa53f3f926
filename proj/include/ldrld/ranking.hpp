#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ldrld {

enum class Role { student, teacher };

/// Class indices sorted by descending logit; ties go to the lower index.
struct RankOrder {
  std::vector<std::size_t> perm;
  Role source = Role::student;
};

/// Teacher and student logits at the top-d ranks and at the remaining ranks,
/// both read through the same index sequence.
struct TopSplit {
  std::size_t depth = 0;
  std::vector<std::size_t> top_index;
  std::vector<std::size_t> rest_index;
  std::vector<double> top_t, top_s;
  std::vector<double> rest_t, rest_s;
};

RankOrder rank_by_student(std::span<const double> z_s);

/// Ranking by an arbitrary role's logits. The distillation objective only
/// ever ranks by the student; teacher ranking exists for diagnostics.
RankOrder rank_by(std::span<const double> logits, Role source);

/// Slices both roles through `order`. `order` must come from the student.
TopSplit split_top_d(std::span<const double> z_t, std::span<const double> z_s,
                     const RankOrder& order, std::size_t depth);

}  // namespace ldrld
