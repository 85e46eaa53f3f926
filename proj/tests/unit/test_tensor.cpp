#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "ldrld/errors.hpp"
#include "ldrld/oracle.hpp"
#include "ldrld/tensor.hpp"
#include "support/generators.hpp"

using namespace ldrld;
using ldrld::testing::close_rel;
using ldrld::testing::Gen;

namespace {

// Compares autodiff against central differences for a scalar function of one
// input tensor, coordinate by coordinate.
void expect_grad_matches_fd(const std::function<Tensor(const Tensor&)>& f, Shape shape,
                            std::vector<double> x) {
  Tensor leaf = Tensor::from(shape, x, true);
  backward(f(leaf));
  const std::vector<double> autodiff(leaf.grad().begin(), leaf.grad().end());
  const auto fd = oracle::fd_gradient(
      [&](std::span<const double> p) {
        return f(Tensor::from(shape, std::vector<double>(p.begin(), p.end()))).item();
      },
      x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_TRUE(close_rel(autodiff[i], fd[i], 1e-4, 1e-7))
        << "coordinate " << i << ": autodiff " << autodiff[i] << " vs fd " << fd[i];
  }
}

}  // namespace

TEST(Tensor, ConstructionChecksShape) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::from({1, 1, 1}, {1}), ShapeError);
  EXPECT_THROW(Tensor::vector(std::vector<double>{1.0, NAN}), NumericError);
  auto t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
}

TEST(Tensor, MatmulIdentityAndDot) {
  auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto b = Tensor::matrix(2, 2, {3, 4, 5, 6});
  auto c = matmul(eye, b);
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()), (std::vector<double>{3, 4, 5, 6}));
  auto d = matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  EXPECT_DOUBLE_EQ(d.item(), 11.0);
}

TEST(Tensor, MatmulMatchesTripleLoopOracle) {
  Gen g(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = g.vec(12), b = g.vec(8);
    auto c = matmul(Tensor::matrix(3, 4, a), Tensor::matrix(4, 2, b));
    auto ref = oracle::matmul_triple_loop(a, b, 3, 4, 2);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c.data()[i], ref[i], 1e-12);
  }
}

TEST(Tensor, MatmulShapeMismatch) {
  EXPECT_THROW(matmul(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)),
                      Tensor::matrix(2, 3, std::vector<double>(6, 1.0))),
               ShapeError);
}

TEST(Tensor, SoftmaxMaskedExamples) {
  auto sym = softmax_masked(Tensor::vector(std::vector<double>{2.5, 2.5}), {true, true}, 3.0);
  EXPECT_DOUBLE_EQ(sym[0], 0.5);
  EXPECT_DOUBLE_EQ(sym[1], 0.5);

  auto leak = softmax_masked(Tensor::vector(std::vector<double>{0, 0, 100}), {true, true, false}, 1.0);
  EXPECT_DOUBLE_EQ(leak[0], 0.5);
  EXPECT_DOUBLE_EQ(leak[1], 0.5);
  EXPECT_EQ(leak[2], 0.0);

  auto p = softmax_masked(Tensor::vector(std::vector<double>{1, 2, 3}), {true, false, true}, 4.0);
  const double z = std::exp(1.0 / 4) + std::exp(3.0 / 4);
  EXPECT_NEAR(p[0], std::exp(1.0 / 4) / z, 1e-12);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[2], std::exp(3.0 / 4) / z, 1e-12);
}

TEST(Tensor, SoftmaxMaskedErrors) {
  auto z = Tensor::vector(std::vector<double>{1, 2});
  EXPECT_THROW(softmax_masked(z, {false, false}, 1.0), InvalidArgument);
  EXPECT_THROW(softmax_masked(z, {true, true}, 0.0), InvalidArgument);
  EXPECT_THROW(softmax_masked(z, {true, true}, -1.0), InvalidArgument);
  EXPECT_THROW(softmax_masked(z, {true}, 1.0), ShapeError);
}

TEST(Tensor, SoftmaxMaskedSumsToOne) {
  Gen g(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = g.index(1, 30);
    Mask mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = g.coin();
    mask[g.index(0, n - 1)] = true;
    auto p = softmax_masked(Tensor::vector(g.vec(n, -50, 50)), mask, g.uniform(0.1, 10));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) total += p[i];
      else EXPECT_EQ(p[i], 0.0);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Tensor, BackwardSimpleCases) {
  auto x = Tensor::vector(std::vector<double>{1, 2, 3, 4, 5}, true);
  backward(sum(x));
  for (double gi : x.grad()) EXPECT_DOUBLE_EQ(gi, 1.0);

  auto y = Tensor::vector(std::vector<double>{1, 2}, true);
  backward(sum(mul(y, y)));
  EXPECT_DOUBLE_EQ(y.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(y.grad()[1], 4.0);
}

TEST(Tensor, BackwardRejectsNonScalar) {
  auto x = Tensor::vector(std::vector<double>{1, 2}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ShapeError);
  EXPECT_THROW(backward(sum(Tensor::vector(std::vector<double>{1, 2}))), InvalidArgument);
}

TEST(Tensor, NoGradGuardStopsRecording) {
  auto x = Tensor::vector(std::vector<double>{1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = sum(x);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(sum(x).requires_grad());
}

TEST(Tensor, TapeVisitsEachNodeOnceInReverseTopologicalOrder) {
  // Diamond: x feeds two branches that meet again.
  auto x = Tensor::vector(std::vector<double>{0.5, -1.5, 2.0}, true);
  auto a = scale(x, 2.0);
  auto b = relu(x);
  auto c = mul(a, b);
  auto d = add(c, a);
  auto loss = sum(d);
  ComputationTape tape(loss);
  const auto order = tape.backward_order();
  EXPECT_EQ(order.size(), 6u);
  EXPECT_EQ(std::set<std::uint64_t>(order.begin(), order.end()).size(), order.size());
  auto pos = [&](const Tensor& t) {
    return std::find(order.begin(), order.end(), t.id()) - order.begin();
  };
  EXPECT_EQ(pos(loss), 0);
  EXPECT_LT(pos(d), pos(c));
  EXPECT_LT(pos(d), pos(a));
  EXPECT_LT(pos(c), pos(a));
  EXPECT_LT(pos(c), pos(b));
  EXPECT_LT(pos(a), pos(x));
  EXPECT_LT(pos(b), pos(x));
  tape.backward();
  // d/dx sum(2x * relu(x) + 2x)
  EXPECT_DOUBLE_EQ(x.grad()[0], 4 * 0.5 + 2);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 4 * 2.0 + 2);
}

TEST(Tensor, ForwardIsDeterministic) {
  Gen g(5);
  auto a = g.vec(64 * 32), b = g.vec(32 * 16);
  auto c1 = matmul(Tensor::matrix(64, 32, a), Tensor::matrix(32, 16, b));
  auto c2 = matmul(Tensor::matrix(64, 32, a), Tensor::matrix(32, 16, b));
  EXPECT_TRUE(std::equal(c1.data().begin(), c1.data().end(), c2.data().begin()));
}

TEST(Tensor, OnlyLeavesAreWritable) {
  auto x = Tensor::vector(std::vector<double>{1, 2}, true);
  auto y = scale(x, 2.0);
  EXPECT_NO_THROW(x.mutable_data()[0] = 3.0);
  EXPECT_THROW(y.mutable_data(), InvalidArgument);
}

// Gradient == central finite difference for every differentiable primitive.
TEST(TensorGradients, MatchFiniteDifferences) {
  Gen g(42);
  for (int trial = 0; trial < 10; ++trial) {
    const auto other = g.vec(12);
    const auto coeffs = g.vec(6);
    const auto coeffs4 = g.vec(4);
    Mask mask{true, false, true, true, false, true};

    expect_grad_matches_fd(
        [&](const Tensor& a) { return weighted_sum(row(matmul(a, Tensor::matrix(4, 3, other)), 1), std::vector<double>(coeffs.begin(), coeffs.begin() + 3)); },
        {2, 4}, g.vec(8));
    expect_grad_matches_fd(
        [&](const Tensor& b) { return sum(mul(matmul(Tensor::matrix(3, 4, other), b), matmul(Tensor::matrix(3, 4, other), b))); },
        {4, 2}, g.vec(8));
    expect_grad_matches_fd(
        [&](const Tensor& a) { return weighted_sum(add(a, a), coeffs); }, {6}, g.vec(6));
    expect_grad_matches_fd(
        [&](const Tensor& a) {
          return sum(mul(add_bias(Tensor::matrix(2, 3, std::vector<double>(other.begin(), other.begin() + 6)), a),
                         add_bias(Tensor::matrix(2, 3, std::vector<double>(other.begin() + 6, other.end())), a)));
        },
        {3}, g.vec(3));
    // Keep inputs away from the ReLU kink.
    auto away = g.vec(6);
    for (double& v : away) v = v >= 0 ? v + 0.1 : v - 0.1;
    expect_grad_matches_fd([&](const Tensor& a) { return weighted_sum(relu(a), coeffs); }, {6}, away);
    expect_grad_matches_fd([&](const Tensor& a) { return mean(scale(mul(a, a), 0.3)); }, {6}, g.vec(6));
    expect_grad_matches_fd(
        [&](const Tensor& a) { return weighted_sum(gather(a, std::vector<std::size_t>{5, 0, 5, 2}), coeffs4); },
        {6}, g.vec(6));
    expect_grad_matches_fd(
        [&](const Tensor& a) { return weighted_sum(softmax_masked(a, mask, 1.7), coeffs); }, {6}, g.vec(6));
    expect_grad_matches_fd(
        [&](const Tensor& a) { return weighted_sum(log_softmax_masked(a, mask, 0.8), coeffs); }, {6}, g.vec(6));
    const auto target = log_softmax_masked(Tensor::vector(g.vec(6)), mask, 2.0);
    expect_grad_matches_fd(
        [&](const Tensor& a) { return kl_div(target.data(), log_softmax_masked(a, mask, 2.0), mask); }, {6},
        g.vec(6));
    expect_grad_matches_fd(
        [&](const Tensor& a) {
          std::vector<Tensor> terms{weighted_sum(a, coeffs), sum(mul(a, a)), scale(sum(a), -2.0)};
          return sum_scalars(terms);
        },
        {6}, g.vec(6));
  }
}

TEST(Tensor, KlDivIsZeroForIdenticalDistributions) {
  Mask all(4, true);
  auto q = log_softmax_masked(Tensor::vector(std::vector<double>{0.3, -1, 2, 0}), all, 1.5);
  EXPECT_EQ(kl_div(q.data(), q, all).item(), 0.0);
}
