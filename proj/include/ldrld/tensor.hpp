#pragma once

// Dense 1-D/2-D double tensors with reverse-mode differentiation.
//
// A Tensor is a shared handle to a node in a computation graph. Operations
// whose inputs require gradients record a backward rule; backward() walks the
// graph from a scalar root in reverse topological order and accumulates
// gradients into every node that requires them. Graphs are confined to the
// thread that built them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ldrld {

using Shape = std::vector<std::size_t>;
using Mask = std::vector<bool>;

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::span<const double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  /// Writable view of a leaf's values (parameters). Throws for op outputs.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  /// Accumulated gradient; zeros if backward never reached this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  /// Creation sequence number, unique per process.
  std::uint64_t id() const;

  /// Fresh leaf holding a copy of this tensor's values.
  Tensor detach(bool requires_grad = false) const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;

  friend class ComputationTape;
  friend struct TensorAccess;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Nodes reachable from a root, in forward topological order.
class ComputationTape {
 public:
  explicit ComputationTape(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  /// Node ids in the order backward() visits them (reverse topological).
  std::vector<std::uint64_t> backward_order() const;
  /// Seeds d(root)/d(root) = 1 and replays every recorded rule once.
  void backward();

 private:
  std::shared_ptr<detail::Node> root_;
  std::vector<detail::Node*> order_;
};

/// Populates grads of every requires_grad tensor feeding a scalar loss.
void backward(const Tensor& loss);

// Primitive operations. Each records a gradient rule when any input
// requires grad and grad mode is on.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// m[r, c] + bias[c] for every row r.
Tensor add_bias(const Tensor& m, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Ordered sum of scalar tensors.
Tensor sum_scalars(std::span<const Tensor> terms);
/// Row r of a 2-D tensor as a 1-D tensor.
Tensor row(const Tensor& m, std::size_t r);
/// out[k] = v[indices[k]] for a 1-D tensor.
Tensor gather(const Tensor& v, std::span<const std::size_t> indices);
/// Scalar sum_i coeffs[i] * v[i]; coeffs are constants.
Tensor weighted_sum(const Tensor& v, std::span<const double> coeffs);

/// exp(z_i/t) / sum_{mask} exp(z_j/t) on masked entries, exactly 0 elsewhere.
Tensor softmax_masked(const Tensor& z, const Mask& mask, double temperature);
/// Log of softmax_masked on masked entries, 0 elsewhere.
Tensor log_softmax_masked(const Tensor& z, const Mask& mask, double temperature);
/// sum_{mask, p_i > 0} p_i (log p_i - log_q_i) with p = exp(target_log_probs).
/// Targets are constants; the gradient flows into log_q only.
Tensor kl_div(std::span<const double> target_log_probs, const Tensor& log_q, const Mask& mask);

}  // namespace ldrld
