#pragma once

// Dense f64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a shared node. Ops record their parents and
// a backward closure; backward() walks the recorded graph in reverse
// topological order. Gradients are never accumulated implicitly across two
// backward passes: every gradient-tracked node reachable from the loss must
// be reset (zero_grad / reset_grads) before it can take part in another pass.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tspkit {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Shape/contract violations in tensor ops.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced or consumed by an op.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misuse of the differentiation tape (non-scalar loss, double backward, ...).
class GradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward() reaches the node
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grad buffers.
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev,
                      bool requires_grad = false);
  static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t extent(std::size_t dim) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view, only for leaves (parameter updates, test setup).
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // New leaf holding a copy of the values, detached from any graph.
  Tensor detach(bool requires_grad = false) const;

  // Internal: used by op implementations.
  static Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward_fn);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& checked() const;

  std::shared_ptr<detail::Node> node_;
};

// Reverse-mode pass from a scalar loss. Populates grad on every reachable
// gradient-tracked tensor. Throws GradError if the loss is not scalar, is not
// connected to any tracked tensor, or if any reachable tracked tensor still
// holds a gradient from a previous pass.
void backward(const Tensor& loss);

// Clears gradients on every node reachable from root (the explicit reset).
void reset_grads(const Tensor& root);

// ---- ops ------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
// x[..., n] + bias[n]
Tensor add_lastdim(const Tensor& x, const Tensor& bias);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// [m,k]x[k,n] -> [m,n], or batched [b,m,k]x[b,k,n] -> [b,m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
Tensor transpose(const Tensor& x);  // swaps the last two dims
Tensor concat(const std::vector<Tensor>& parts, std::size_t dim);
Tensor slice(const Tensor& x, std::size_t dim, std::size_t start, std::size_t length);

Tensor softmax_lastdim(const Tensor& x);
Tensor gelu(const Tensor& x);

// S[i,j,k] = A[i,j] * F[j,k]; A is [N,P], F is [P,C], S is [N,P,C].
Tensor broadcast_token_product(const Tensor& attention, const Tensor& features);

// Resizes [B,C,H,W] with align_corners=false bilinear sampling.
Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

inline constexpr std::uint8_t kIgnoreLabel = 255;

// Mean negative log-softmax over the class dim of [B,K,H,W] logits, skipping
// pixels whose target is kIgnoreLabel. targets is B*H*W labels, row-major.
Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> targets);

}  // namespace tspkit
