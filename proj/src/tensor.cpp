#include "ldrld/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "ldrld/errors.hpp"

namespace ldrld {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::Node;

namespace {

std::atomic<std::uint64_t> next_id{1};
thread_local bool grad_enabled = true;

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty() || shape.size() > 2) throw ShapeError("tensor rank must be 1 or 2");
  if (product(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  node->id = next_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}

void check_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

// Output node of an operation. Records the backward rule only when needed.
std::shared_ptr<Node> make_result(const char* op, Shape shape, std::vector<double> data,
                                  std::vector<std::shared_ptr<Node>> parents,
                                  std::function<void(Node&)> backward_fn) {
  check_finite(op, data);
  auto node = make_leaf(std::move(shape), std::move(data), false);
  node->leaf = false;
  const bool needs = grad_enabled && std::any_of(parents.begin(), parents.end(),
                                                 [](const auto& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return node;
}

Node& checked(const std::shared_ptr<Node>& n) {
  if (!n) throw InvalidArgument("use of an undefined tensor");
  return *n;
}

void require_rank(const Node& n, std::size_t rank, const char* op) {
  if (n.shape.size() != rank) {
    throw ShapeError(std::string(op) + " expects a rank-" + std::to_string(rank) +
                     " tensor, got " + shape_str(n.shape));
  }
}

void require_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("temperature must be positive");
}

}  // namespace

struct TensorAccess {
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

namespace {
const std::shared_ptr<Node>& N(const Tensor& t) {
  checked(TensorAccess::node(t));
  return TensorAccess::node(t);
}
Tensor wrap(std::shared_ptr<Node> n) { return TensorAccess::wrap(std::move(n)); }
}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  check_finite("tensor construction", data);
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = product(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::span<const double> values, bool requires_grad) {
  return from({values.size()}, std::vector<double>(values.begin(), values.end()), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                      bool requires_grad) {
  return from({rows, cols}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::size_t Tensor::size() const { return checked(node_).data.size(); }

std::size_t Tensor::rows() const {
  require_rank(checked(node_), 2, "rows()");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  require_rank(checked(node_), 2, "cols()");
  return node_->shape[1];
}

std::span<const double> Tensor::data() const { return checked(node_).data; }

std::span<double> Tensor::mutable_data() {
  if (!checked(node_).leaf) throw InvalidArgument("only leaf tensors are writable");
  return node_->data;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a tensor with " + std::to_string(size()) + " values");
  return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& n = checked(node_);
  require_rank(n, 2, "at()");
  return n.data[r * n.shape[1] + c];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::is_leaf() const { return checked(node_).leaf; }
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const {
  return checked(node_).grad_buffer();
}

void Tensor::zero_grad() {
  auto& g = checked(node_).grad;
  std::fill(g.begin(), g.end(), 0.0);
}

std::uint64_t Tensor::id() const { return checked(node_).id; }

Tensor Tensor::detach(bool requires_grad) const {
  const auto& n = checked(node_);
  return Tensor(make_leaf(n.shape, n.data, requires_grad));
}

// ---------------------------------------------------------------------------
// Grad mode and tape

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

bool grad_mode_enabled() { return grad_enabled; }

ComputationTape::ComputationTape(const Tensor& root) : root_(N(root)) {
  // Iterative post-order DFS: parents are emitted before their consumers.
  std::vector<std::pair<Node*, std::size_t>> stack;
  std::unordered_set<Node*> seen;
  if (!root_->requires_grad) return;
  stack.emplace_back(root_.get(), 0);
  seen.insert(root_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

std::vector<std::uint64_t> ComputationTape::backward_order() const {
  std::vector<std::uint64_t> ids;
  ids.reserve(order_.size());
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) ids.push_back((*it)->id);
  return ids;
}

void ComputationTape::backward() {
  if (order_.empty()) throw InvalidArgument("backward() on a tensor that does not require grad");
  root_->grad_buffer()[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node& n = **it;
    if (n.backward_fn && !n.grad.empty()) n.backward_fn(n);
  }
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
  }
  ComputationTape(loss).backward();
}

// ---------------------------------------------------------------------------
// Operations

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& A = N(a);
  const auto& B = N(b);
  require_rank(*A, 2, "matmul");
  require_rank(*B, 2, "matmul");
  const std::size_t m = A->shape[0], k = A->shape[1], n = B->shape[1];
  if (B->shape[0] != k) {
    throw ShapeError("matmul: " + shape_str(A->shape) + " x " + shape_str(B->shape));
  }
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A->data[i * k + p];
      const double* brow = B->data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return wrap(make_result("matmul", {m, n}, std::move(out), {A, B}, [m, k, n](Node& self) {
    Node& a_ = *self.parents[0];
    Node& b_ = *self.parents[1];
    const auto& g = self.grad;
    if (a_.requires_grad) {
      auto& ga = a_.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b_.data[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (b_.requires_grad) {
      auto& gb = b_.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a_.data[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
      }
    }
  }));
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto& A = N(a);
  const auto& B = N(b);
  if (A->shape != B->shape) {
    throw ShapeError("add: " + shape_str(A->shape) + " vs " + shape_str(B->shape));
  }
  std::vector<double> out(A->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A->data[i] + B->data[i];
  return wrap(make_result("add", A->shape, std::move(out), {A, B}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  }));
}

Tensor add_bias(const Tensor& m, const Tensor& bias) {
  const auto& M = N(m);
  const auto& B = N(bias);
  require_rank(*M, 2, "add_bias");
  require_rank(*B, 1, "add_bias");
  const std::size_t r = M->shape[0], c = M->shape[1];
  if (B->shape[0] != c) {
    throw ShapeError("add_bias: " + shape_str(M->shape) + " + " + shape_str(B->shape));
  }
  std::vector<double> out(M->data);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += B->data[j];
  }
  return wrap(make_result("add_bias", M->shape, std::move(out), {M, B}, [r, c](Node& self) {
    Node& m_ = *self.parents[0];
    Node& b_ = *self.parents[1];
    if (m_.requires_grad) {
      auto& g = m_.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b_.requires_grad) {
      auto& g = b_.grad_buffer();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
      }
    }
  }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto& A = N(a);
  const auto& B = N(b);
  if (A->shape != B->shape) {
    throw ShapeError("mul: " + shape_str(A->shape) + " vs " + shape_str(B->shape));
  }
  std::vector<double> out(A->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A->data[i] * B->data[i];
  return wrap(make_result("mul", A->shape, std::move(out), {A, B}, [](Node& self) {
    Node& a_ = *self.parents[0];
    Node& b_ = *self.parents[1];
    if (a_.requires_grad) {
      auto& g = a_.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b_.data[i];
    }
    if (b_.requires_grad) {
      auto& g = b_.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a_.data[i];
    }
  }));
}

Tensor scale(const Tensor& a, double factor) {
  const auto& A = N(a);
  std::vector<double> out(A->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A->data[i] * factor;
  return wrap(make_result("scale", A->shape, std::move(out), {A}, [factor](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  }));
}

Tensor relu(const Tensor& a) {
  const auto& A = N(a);
  std::vector<double> out(A->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A->data[i] > 0.0 ? A->data[i] : 0.0;
  return wrap(make_result("relu", A->shape, std::move(out), {A}, [](Node& self) {
    Node& a_ = *self.parents[0];
    auto& g = a_.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (a_.data[i] > 0.0) g[i] += self.grad[i];
    }
  }));
}

Tensor sum(const Tensor& a) {
  const auto& A = N(a);
  double total = 0.0;
  for (double v : A->data) total += v;
  return wrap(make_result("sum", {1}, {total}, {A}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (double& gi : g) gi += self.grad[0];
  }));
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(N(a)->data.size());
  return scale(sum(a), 1.0 / n);
}

Tensor sum_scalars(std::span<const Tensor> terms) {
  if (terms.empty()) throw InvalidArgument("sum_scalars of an empty list");
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(terms.size());
  double total = 0.0;
  for (const auto& t : terms) {
    const auto& n = N(t);
    if (n->data.size() != 1) throw ShapeError("sum_scalars expects scalar terms");
    total += n->data[0];
    parents.push_back(n);
  }
  return wrap(make_result("sum_scalars", {1}, {total}, std::move(parents), [](Node& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->grad_buffer()[0] += self.grad[0];
    }
  }));
}

Tensor row(const Tensor& m, std::size_t r) {
  const auto& M = N(m);
  require_rank(*M, 2, "row");
  const std::size_t c = M->shape[1];
  if (r >= M->shape[0]) throw ShapeError("row index out of range");
  std::vector<double> out(M->data.begin() + static_cast<std::ptrdiff_t>(r * c),
                          M->data.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
  return wrap(make_result("row", {c}, std::move(out), {M}, [r, c](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t j = 0; j < c; ++j) g[r * c + j] += self.grad[j];
  }));
}

Tensor gather(const Tensor& v, std::span<const std::size_t> indices) {
  const auto& V = N(v);
  require_rank(*V, 1, "gather");
  std::vector<double> out(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= V->data.size()) throw ShapeError("gather index out of range");
    out[k] = V->data[indices[k]];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t n = idx.size();
  return wrap(make_result("gather", {n}, std::move(out), {V},
                          [idx = std::move(idx)](Node& self) {
                            auto& g = self.parents[0]->grad_buffer();
                            for (std::size_t k = 0; k < idx.size(); ++k) g[idx[k]] += self.grad[k];
                          }));
}

Tensor weighted_sum(const Tensor& v, std::span<const double> coeffs) {
  const auto& V = N(v);
  if (coeffs.size() != V->data.size()) throw ShapeError("weighted_sum: coefficient count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) total += coeffs[i] * V->data[i];
  std::vector<double> c(coeffs.begin(), coeffs.end());
  return wrap(make_result("weighted_sum", {1}, {total}, {V}, [c = std::move(c)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < c.size(); ++i) g[i] += c[i] * self.grad[0];
  }));
}

namespace {

struct MaskedSoftmax {
  std::vector<double> probs;  // 0 outside the mask
  double log_norm = 0.0;      // log sum exp((z - max)/t) over the mask
  double max = 0.0;
};

MaskedSoftmax masked_softmax_values(const std::vector<double>& z, const Mask& mask, double t) {
  if (mask.size() != z.size()) throw ShapeError("mask length does not match logits");
  require_temperature(t);
  MaskedSoftmax out;
  bool any = false;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!mask[i]) continue;
    out.max = any ? std::max(out.max, z[i]) : z[i];
    any = true;
  }
  if (!any) throw InvalidArgument("softmax over an empty mask");
  out.probs.assign(z.size(), 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!mask[i]) continue;
    out.probs[i] = std::exp((z[i] - out.max) / t);
    norm += out.probs[i];
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (mask[i]) out.probs[i] /= norm;
  }
  out.log_norm = std::log(norm);
  return out;
}

}  // namespace

Tensor softmax_masked(const Tensor& z, const Mask& mask, double temperature) {
  const auto& Z = N(z);
  require_rank(*Z, 1, "softmax_masked");
  auto sm = masked_softmax_values(Z->data, mask, temperature);
  std::vector<double> p = sm.probs;
  return wrap(make_result(
      "softmax_masked", Z->shape, std::move(sm.probs), {Z},
      [p = std::move(p), mask, temperature](Node& self) {
        double dot = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (mask[i]) dot += p[i] * self.grad[i];
        }
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (mask[i]) g[i] += p[i] * (self.grad[i] - dot) / temperature;
        }
      }));
}

Tensor log_softmax_masked(const Tensor& z, const Mask& mask, double temperature) {
  const auto& Z = N(z);
  require_rank(*Z, 1, "log_softmax_masked");
  auto sm = masked_softmax_values(Z->data, mask, temperature);
  std::vector<double> out(Z->data.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i]) out[i] = (Z->data[i] - sm.max) / temperature - sm.log_norm;
  }
  return wrap(make_result(
      "log_softmax_masked", Z->shape, std::move(out), {Z},
      [p = std::move(sm.probs), mask, temperature](Node& self) {
        double total = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (mask[i]) total += self.grad[i];
        }
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (mask[i]) g[i] += (self.grad[i] - p[i] * total) / temperature;
        }
      }));
}

Tensor kl_div(std::span<const double> target_log_probs, const Tensor& log_q, const Mask& mask) {
  const auto& Q = N(log_q);
  require_rank(*Q, 1, "kl_div");
  if (target_log_probs.size() != Q->data.size() || mask.size() != Q->data.size()) {
    throw ShapeError("kl_div: length mismatch");
  }
  std::vector<double> weights(Q->data.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!mask[i]) continue;
    const double p = std::exp(target_log_probs[i]);
    if (p == 0.0) continue;  // 0 log 0 = 0
    weights[i] = p;
    total += p * (target_log_probs[i] - Q->data[i]);
  }
  return wrap(make_result("kl_div", {1}, {total}, {Q}, [w = std::move(weights)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < w.size(); ++i) g[i] -= w[i] * self.grad[0];
  }));
}

}  // namespace ldrld
