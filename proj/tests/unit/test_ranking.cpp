#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "ldrld/errors.hpp"
#include "ldrld/oracle.hpp"
#include "ldrld/ranking.hpp"
#include "support/generators.hpp"

using namespace ldrld;
using ldrld::testing::Gen;

using Idx = std::vector<std::size_t>;
using Vals = std::vector<double>;

TEST(RankByStudent, Examples) {
  EXPECT_EQ(rank_by_student(Vals{0.1, 3.0, 2.0}).perm, (Idx{1, 2, 0}));
  EXPECT_EQ(rank_by_student(Vals{5, 5, 1}).perm, (Idx{0, 1, 2}));
  EXPECT_EQ(rank_by_student(Vals{1, 5, 5, 5}).perm, (Idx{1, 2, 3, 0}));
  EXPECT_THROW(rank_by_student(Vals{1.0}), InvalidArgument);
}

TEST(RankByStudent, MatchesSelectionSortOracle) {
  Gen g(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto z = g.vec(20);
    // Force some ties.
    if (trial % 3 == 0) z[g.index(0, 19)] = z[g.index(0, 19)];
    const auto order = rank_by_student(z);
    EXPECT_EQ(order.perm, oracle::rank_selection_sort(z));
    EXPECT_EQ(order.source, Role::student);
    for (std::size_t r = 1; r < z.size(); ++r) EXPECT_GE(z[order.perm[r - 1]], z[order.perm[r]]);
  }
}

TEST(SplitTopD, DirectIndexing) {
  const Vals zs{4, 3, 2, 1}, zt{1, 2, 3, 4};
  const auto s = split_top_d(zt, zs, rank_by_student(zs), 2);
  EXPECT_EQ(s.top_s, (Vals{4, 3}));
  EXPECT_EQ(s.top_t, (Vals{1, 2}));
  EXPECT_EQ(s.rest_s, (Vals{2, 1}));
  EXPECT_EQ(s.rest_t, (Vals{3, 4}));
}

TEST(SplitTopD, FullDepthLeavesNothing) {
  const Vals zs{0.5, -1, 2}, zt{1, 1, 1};
  const auto s = split_top_d(zt, zs, rank_by_student(zs), 3);
  EXPECT_TRUE(s.rest_s.empty());
  EXPECT_TRUE(s.rest_t.empty());
  EXPECT_EQ(s.top_index, (Idx{2, 0, 1}));
}

TEST(SplitTopD, Errors) {
  const Vals zs{0.5, -1, 2}, zt{1, 1, 1};
  const auto order = rank_by_student(zs);
  EXPECT_THROW(split_top_d(zt, zs, order, 1), InvalidArgument);
  EXPECT_THROW(split_top_d(zt, zs, order, 4), InvalidArgument);
  EXPECT_THROW(split_top_d(Vals{1, 1}, zs, order, 2), ShapeError);
  EXPECT_THROW(split_top_d(zt, zs, rank_by(zt, Role::teacher), 2), InvalidArgument);
  RankOrder bad{{0, 0, 1}, Role::student};
  EXPECT_THROW(split_top_d(zt, zs, bad, 2), InvalidArgument);
}

TEST(SplitTopD, EqualsRecursiveExtractAndExclude) {
  Gen g(19);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t c = g.index(2, 30);
    const std::size_t d = g.index(2, c);
    const auto zt = g.vec(c), zs = g.vec(c);
    const auto fast = split_top_d(zt, zs, rank_by_student(zs), d);
    const auto slow = oracle::topd_recursive(zt, zs, d);
    EXPECT_EQ(fast.top_index, slow.top_index);
    EXPECT_EQ(fast.rest_index, slow.rest_index);
    EXPECT_EQ(fast.top_t, slow.top_t);
    EXPECT_EQ(fast.top_s, slow.top_s);
    EXPECT_EQ(fast.rest_t, slow.rest_t);
    EXPECT_EQ(fast.rest_s, slow.rest_s);
  }
  // C=15, d=7 specifically.
  const auto zt = g.vec(15), zs = g.vec(15);
  EXPECT_EQ(split_top_d(zt, zs, rank_by_student(zs), 7).top_t, oracle::topd_recursive(zt, zs, 7).top_t);
}

TEST(SplitTopD, PermutationEquivariance) {
  Gen g(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = g.index(3, 25);
    const std::size_t d = g.index(2, c);
    const auto zt = g.vec(c), zs = g.vec(c);
    Idx sigma(c);
    std::iota(sigma.begin(), sigma.end(), std::size_t{0});
    std::shuffle(sigma.begin(), sigma.end(), g.engine());
    // Class k of the permuted problem is class sigma[k] of the original.
    Vals pt(c), ps(c);
    for (std::size_t k = 0; k < c; ++k) {
      pt[k] = zt[sigma[k]];
      ps[k] = zs[sigma[k]];
    }
    const auto a = split_top_d(zt, zs, rank_by_student(zs), d);
    const auto b = split_top_d(pt, ps, rank_by_student(ps), d);
    EXPECT_EQ(a.top_s, b.top_s);
    EXPECT_EQ(a.top_t, b.top_t);
    for (std::size_t r = 0; r < d; ++r) EXPECT_EQ(sigma[b.top_index[r]], a.top_index[r]);
  }
}

TEST(SplitTopD, TeacherAndStudentShareClassPerRank) {
  Gen g(29);
  const auto zt = g.vec(12), zs = g.vec(12);
  const auto s = split_top_d(zt, zs, rank_by_student(zs), 5);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(s.top_t[r], zt[s.top_index[r]]);
    EXPECT_EQ(s.top_s[r], zs[s.top_index[r]]);
  }
  for (std::size_t r = 1; r < 5; ++r) EXPECT_GE(s.top_s[r - 1], s.top_s[r]);
  Idx all = s.top_index;
  all.insert(all.end(), s.rest_index.begin(), s.rest_index.end());
  std::sort(all.begin(), all.end());
  Idx expected(12);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  EXPECT_EQ(all, expected);
}

TEST(RankBy, TeacherOrderForDiagnostics) {
  const Vals zt{0.0, 9.0, 1.0};
  const auto order = rank_by(zt, Role::teacher);
  EXPECT_EQ(order.perm, (Idx{1, 2, 0}));
  EXPECT_EQ(order.source, Role::teacher);
}
