#include "tspkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace tspkit {

using detail::Node;

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_to_string(shape));
  }
}

void check_finite(std::span<const double> values, const char* op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(op) + ": non-finite value at flat index " +
                         std::to_string(i));
    }
  }
}

std::vector<double>* grad_if_tracked(Node& self, std::size_t parent) {
  Node& p = *self.parents[parent];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Node& Tensor::checked() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return *node_;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  check_finite(values, "Tensor::from");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  std::vector<double> v(shape_numel(shape), value);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev, bool requires_grad) {
  check_shape(shape);
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, double lo, double hi,
                       bool requires_grad) {
  check_shape(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return from(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::extent(std::size_t dim) const {
  const Shape& s = shape();
  if (dim >= s.size()) {
    throw ShapeError("dim " + std::to_string(dim) + " out of range for " + shape_to_string(s));
  }
  return s[dim];
}

std::size_t Tensor::numel() const { return checked().data.size(); }

std::span<const double> Tensor::data() const { return checked().data; }

std::span<double> Tensor::mutable_data() {
  Node& n = checked();
  if (!n.is_leaf) throw GradError("mutable_data() is only available on leaf tensors");
  return n.data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(shape()));
  return data()[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw ShapeError("at(): rank mismatch");
  std::size_t flat = 0;
  std::size_t d = 0;
  for (std::size_t i : index) {
    if (i >= s[d]) throw ShapeError("at(): index out of range");
    flat = flat * s[d] + i;
    ++d;
  }
  return data()[flat];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }
bool Tensor::is_leaf() const { return checked().is_leaf; }
bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<const double> Tensor::grad() const {
  const Node& n = checked();
  if (n.grad.empty()) throw GradError("tensor has no gradient; run backward() first");
  return n.grad;
}

std::span<double> Tensor::mutable_grad() {
  Node& n = checked();
  if (n.grad.empty()) throw GradError("tensor has no gradient; run backward() first");
  return n.grad;
}

void Tensor::zero_grad() { checked().grad.clear(); }

Tensor Tensor::detach(bool requires_grad) const {
  return from(shape(), checked().data, requires_grad);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, const char* op,
                           std::vector<Tensor> parents,
                           std::function<void(Node&)> backward_fn) {
  check_finite(values, op);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->is_leaf = false;
  node->op = op;
  bool tracked = std::any_of(parents.begin(), parents.end(),
                             [](const Tensor& p) { return p.requires_grad(); });
  if (tracked) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (Tensor& p : parents) node->parents.push_back(p.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

// ---- tape ------------------------------------------------------------------

namespace {

std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

}  // namespace

void backward(const Tensor& loss) {
  Node* root = loss.node().get();
  if (!root) throw GradError("backward() on undefined tensor");
  if (root->data.size() != 1) {
    throw GradError("backward() needs a scalar loss, got shape " + shape_to_string(root->shape));
  }
  if (!root->requires_grad) throw GradError("loss is not connected to any gradient-tracked tensor");
  std::vector<Node*> order = topo_order(root);
  for (Node* n : order) {
    if (!n->grad.empty()) {
      throw GradError(
          "backward() reached a tensor that still holds a gradient; reset gradients before "
          "running another backward pass");
    }
  }
  root->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    n->ensure_grad();
    if (n->backward_fn) n->backward_fn(*n);
  }
}

void reset_grads(const Tensor& root) {
  Node* r = root.node().get();
  if (!r) return;
  std::vector<Node*> stack{r};
  std::unordered_set<Node*> seen{r};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    n->grad.clear();
    for (auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
}

// ---- elementwise -------------------------------------------------------------

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* g = grad_if_tracked(self, p)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_result(a.shape(), std::move(out), "sub", {a, b}, [](Node& self) {
    if (auto* g = grad_if_tracked(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_if_tracked(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    const auto& ad = self.parents[0]->data;
    const auto& bd = self.parents[1]->data;
    if (auto* g = grad_if_tracked(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bd[i];
    }
    if (auto* g = grad_if_tracked(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * ad[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  return Tensor::make_result(x.shape(), std::move(out), "scale", {x}, [factor](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_lastdim(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.shape().back();
  if (bias.rank() != 1 || bias.extent(0) != n) {
    throw ShapeError("add_lastdim: bias " + shape_to_string(bias.shape()) +
                     " does not match last dim of " + shape_to_string(x.shape()));
  }
  auto xv = x.data(), bv = bias.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % n];
  return Tensor::make_result(x.shape(), std::move(out), "add_lastdim", {x, bias},
                             [n](Node& self) {
                               if (auto* g = grad_if_tracked(self, 0)) {
                                 for (std::size_t i = 0; i < g->size(); ++i)
                                   (*g)[i] += self.grad[i];
                               }
                               if (auto* g = grad_if_tracked(self, 1)) {
                                 for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   (*g)[i % n] += self.grad[i];
                               }
                             });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result({1}, {s}, "sum", {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

// ---- matmul ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool batched = a.rank() == 3;
  if (!((a.rank() == 2 && b.rank() == 2) || (a.rank() == 3 && b.rank() == 3)) ||
      (batched && a.extent(0) != b.extent(0)) ||
      a.shape()[a.rank() - 1] != b.shape()[b.rank() - 2]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::size_t batch = batched ? a.extent(0) : 1;
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t k = a.shape()[a.rank() - 1];
  const std::size_t n = b.shape()[b.rank() - 1];
  auto ad = a.data(), bd = b.data();
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t z = 0; z < batch; ++z) {
    const double* A = ad.data() + z * m * k;
    const double* B = bd.data() + z * k * n;
    double* C = out.data() + z * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
  Shape out_shape = batched ? Shape{batch, m, n} : Shape{m, n};
  return Tensor::make_result(
      std::move(out_shape), std::move(out), "matmul", {a, b}, [batch, m, k, n](Node& self) {
        const auto& ad = self.parents[0]->data;
        const auto& bd = self.parents[1]->data;
        auto* ga = grad_if_tracked(self, 0);
        auto* gb = grad_if_tracked(self, 1);
        for (std::size_t z = 0; z < batch; ++z) {
          const double* G = self.grad.data() + z * m * n;
          const double* A = ad.data() + z * m * k;
          const double* B = bd.data() + z * k * n;
          if (ga) {
            double* GA = ga->data() + z * m * k;
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
                GA[i * k + p] += acc;
              }
            }
          }
          if (gb) {
            double* GB = gb->data() + z * k * n;
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                const double aip = A[i * k + p];
                for (std::size_t j = 0; j < n; ++j) GB[p * n + j] += aip * G[i * n + j];
              }
            }
          }
        }
      });
}

// ---- layout ------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  check_shape(shape);
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), "reshape", {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const Shape& in = x.shape();
  const std::size_t r = in.size();
  if (order.size() != r) throw ShapeError("permute: order rank mismatch");
  std::vector<bool> used(r, false);
  for (std::size_t d : order) {
    if (d >= r || used[d]) throw ShapeError("permute: invalid order");
    used[d] = true;
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t d = r - 1; d-- > 0;) in_strides[d] = in_strides[d + 1] * in[d + 1];
  Shape out_shape(r);
  std::vector<std::size_t> src_strides(r);
  for (std::size_t d = 0; d < r; ++d) {
    out_shape[d] = in[order[d]];
    src_strides[d] = in_strides[order[d]];
  }
  // Flat gather map: out[i] = in[map[i]].
  const std::size_t total = x.numel();
  auto gather = std::make_shared<std::vector<std::size_t>>(total);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < total; ++i) {
    (*gather)[i] = src;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        src += src_strides[d];
        break;
      }
      src -= src_strides[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
  auto xv = x.data();
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = xv[(*gather)[i]];
  return Tensor::make_result(std::move(out_shape), std::move(out), "permute", {x},
                             [gather](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                 g[(*gather)[i]] += self.grad[i];
                             });
}

Tensor transpose(const Tensor& x) {
  const std::size_t r = x.rank();
  if (r < 2) throw ShapeError("transpose needs rank >= 2");
  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::swap(order[r - 1], order[r - 2]);
  return permute(x, order);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t dim) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (dim >= first.size()) throw ShapeError("concat: dim out of range");
  Shape out_shape = first;
  out_shape[dim] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == dim || s[d] == first[d];
    if (!ok) {
      throw ShapeError("concat: incompatible shapes " + shape_to_string(first) + " and " +
                       shape_to_string(s));
    }
    out_shape[dim] += s[dim];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < dim; ++d) outer *= first[d];
  for (std::size_t d = dim + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_row = out_shape[dim] * inner;
  std::vector<double> out(outer * out_row);
  auto offsets = std::make_shared<std::vector<std::size_t>>();
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t chunk = p.extent(dim) * inner;
    auto pv = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.data() + o * chunk, chunk, out.data() + o * out_row + offset);
    }
    offsets->push_back(offset);
    offset += chunk;
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), "concat", parts,
                             [offsets, outer, out_row](Node& self) {
                               for (std::size_t k = 0; k < self.parents.size(); ++k) {
                                 auto* g = grad_if_tracked(self, k);
                                 if (!g) continue;
                                 const std::size_t chunk = g->size() / outer;
                                 for (std::size_t o = 0; o < outer; ++o) {
                                   const double* src =
                                       self.grad.data() + o * out_row + (*offsets)[k];
                                   double* dst = g->data() + o * chunk;
                                   for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                                 }
                               }
                             });
}

Tensor slice(const Tensor& x, std::size_t dim, std::size_t start, std::size_t length) {
  const Shape& in = x.shape();
  if (dim >= in.size() || length == 0 || start + length > in[dim]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") invalid on dim " + std::to_string(dim) +
                     " of " + shape_to_string(in));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < dim; ++d) outer *= in[d];
  for (std::size_t d = dim + 1; d < in.size(); ++d) inner *= in[d];
  const std::size_t in_row = in[dim] * inner;
  const std::size_t chunk = length * inner;
  const std::size_t offset = start * inner;
  Shape out_shape = in;
  out_shape[dim] = length;
  auto xv = x.data();
  std::vector<double> out(outer * chunk);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.data() + o * in_row + offset, chunk, out.data() + o * chunk);
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), "slice", {x},
                             [outer, in_row, chunk, offset](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t o = 0; o < outer; ++o) {
                                 for (std::size_t i = 0; i < chunk; ++i)
                                   g[o * in_row + offset + i] += self.grad[o * chunk + i];
                               }
                             });
}

// ---- nonlinearities ------------------------------------------------------------

Tensor softmax_lastdim(const Tensor& x) {
  check_finite(x.data(), "softmax_lastdim input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      denom += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= denom;
  }
  return Tensor::make_result(x.shape(), std::move(out), "softmax_lastdim", {x},
                             [n, rows](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               const auto& y = self.data;
                               for (std::size_t r = 0; r < rows; ++r) {
                                 const std::size_t base = r * n;
                                 double dot = 0.0;
                                 for (std::size_t j = 0; j < n; ++j)
                                   dot += self.grad[base + j] * y[base + j];
                                 for (std::size_t j = 0; j < n; ++j)
                                   g[base + j] += y[base + j] * (self.grad[base + j] - dot);
                               }
                             });
}

Tensor gelu(const Tensor& x) {
  static const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  }
  return Tensor::make_result(x.shape(), std::move(out), "gelu", {x}, [](Node& self) {
    static const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * M_PI);
    auto& g = self.parents[0]->ensure_grad();
    const auto& xd = self.parents[0]->data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xd[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

// ---- region combination ----------------------------------------------------------

Tensor broadcast_token_product(const Tensor& attention, const Tensor& features) {
  if (attention.rank() != 2 || features.rank() != 2 ||
      attention.extent(1) != features.extent(0)) {
    throw ShapeError("broadcast_token_product: expected [N,P] and [P,C], got " +
                     shape_to_string(attention.shape()) + " and " +
                     shape_to_string(features.shape()));
  }
  const std::size_t n = attention.extent(0), p = attention.extent(1), c = features.extent(1);
  auto av = attention.data(), fv = features.data();
  std::vector<double> out(n * p * c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double a = av[i * p + j];
      double* o = out.data() + (i * p + j) * c;
      const double* f = fv.data() + j * c;
      for (std::size_t k = 0; k < c; ++k) o[k] = a * f[k];
    }
  }
  return Tensor::make_result(
      {n, p, c}, std::move(out), "broadcast_token_product", {attention, features},
      [n, p, c](Node& self) {
        const auto& ad = self.parents[0]->data;
        const auto& fd = self.parents[1]->data;
        auto* ga = grad_if_tracked(self, 0);
        auto* gf = grad_if_tracked(self, 1);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < p; ++j) {
            const double* gs = self.grad.data() + (i * p + j) * c;
            const double* f = fd.data() + j * c;
            if (ga) {
              double acc = 0.0;
              for (std::size_t k = 0; k < c; ++k) acc += gs[k] * f[k];
              (*ga)[i * p + j] += acc;
            }
            if (gf) {
              const double a = ad[i * p + j];
              double* g = gf->data() + j * c;
              for (std::size_t k = 0; k < c; ++k) g[k] += a * gs[k];
            }
          }
        }
      });
}

// ---- resampling ------------------------------------------------------------------

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

AxisTaps bilinear_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t i0 = std::min(static_cast<std::size_t>(src), in - 1);
    t.lo[o] = i0;
    t.hi[o] = std::min(i0 + 1, in - 1);
    t.frac[o] = src - static_cast<double>(i0);
  }
  return t;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  if (x.rank() != 4) throw ShapeError("upsample_bilinear expects [B,C,H,W], got " +
                                      shape_to_string(x.shape()));
  if (out_h == 0 || out_w == 0) throw ShapeError("upsample_bilinear: output extents must be >= 1");
  const std::size_t planes = x.extent(0) * x.extent(1);
  const std::size_t in_h = x.extent(2), in_w = x.extent(3);
  auto ty = std::make_shared<AxisTaps>(bilinear_taps(in_h, out_h));
  auto tx = std::make_shared<AxisTaps>(bilinear_taps(in_w, out_w));
  auto xv = x.data();
  std::vector<double> out(planes * out_h * out_w);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* in = xv.data() + pl * in_h * in_w;
    double* o = out.data() + pl * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const double fy = ty->frac[y];
      const double* r0 = in + ty->lo[y] * in_w;
      const double* r1 = in + ty->hi[y] * in_w;
      for (std::size_t xo = 0; xo < out_w; ++xo) {
        const double fx = tx->frac[xo];
        const std::size_t x0 = tx->lo[xo], x1 = tx->hi[xo];
        const double top = r0[x0] + (r0[x1] - r0[x0]) * fx;
        const double bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
        o[y * out_w + xo] = top + (bottom - top) * fy;
      }
    }
  }
  Shape out_shape{x.extent(0), x.extent(1), out_h, out_w};
  return Tensor::make_result(
      std::move(out_shape), std::move(out), "upsample_bilinear", {x},
      [ty, tx, planes, in_h, in_w, out_h, out_w](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t pl = 0; pl < planes; ++pl) {
          double* gi = g.data() + pl * in_h * in_w;
          const double* go = self.grad.data() + pl * out_h * out_w;
          for (std::size_t y = 0; y < out_h; ++y) {
            const double fy = ty->frac[y];
            double* r0 = gi + ty->lo[y] * in_w;
            double* r1 = gi + ty->hi[y] * in_w;
            for (std::size_t xo = 0; xo < out_w; ++xo) {
              const double fx = tx->frac[xo];
              const std::size_t x0 = tx->lo[xo], x1 = tx->hi[xo];
              const double v = go[y * out_w + xo];
              r0[x0] += v * (1 - fy) * (1 - fx);
              r0[x1] += v * (1 - fy) * fx;
              r1[x0] += v * fy * (1 - fx);
              r1[x1] += v * fy * fx;
            }
          }
        }
      });
}

// ---- loss ------------------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> targets) {
  if (logits.rank() != 4) {
    throw ShapeError("cross_entropy expects [B,K,H,W] logits, got " +
                     shape_to_string(logits.shape()));
  }
  const std::size_t batch = logits.extent(0), classes = logits.extent(1);
  const std::size_t plane = logits.extent(2) * logits.extent(3);
  if (targets.size() != batch * plane) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for logits " + shape_to_string(logits.shape()));
  }
  std::size_t counted = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::uint8_t t = targets[i];
    if (t == kIgnoreLabel) continue;
    if (t >= classes) {
      throw std::invalid_argument("cross_entropy: target " + std::to_string(t) +
                                  " out of range for " + std::to_string(classes) + " classes");
    }
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("cross_entropy: every target pixel is ignored");

  auto lv = logits.data();
  auto probs = std::make_shared<std::vector<double>>(lv.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* L = lv.data() + b * classes * plane;
    double* P = probs->data() + b * classes * plane;
    for (std::size_t px = 0; px < plane; ++px) {
      double mx = L[px];
      for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, L[k * plane + px]);
      double denom = 0.0;
      for (std::size_t k = 0; k < classes; ++k) {
        P[k * plane + px] = std::exp(L[k * plane + px] - mx);
        denom += P[k * plane + px];
      }
      for (std::size_t k = 0; k < classes; ++k) P[k * plane + px] /= denom;
      const std::uint8_t t = targets[b * plane + px];
      if (t != kIgnoreLabel) total += -(L[t * plane + px] - mx - std::log(denom));
    }
  }
  const double inv = 1.0 / static_cast<double>(counted);
  auto tgt = std::make_shared<std::vector<std::uint8_t>>(targets.begin(), targets.end());
  return Tensor::make_result(
      {1}, {total * inv}, "cross_entropy", {logits},
      [probs, tgt, batch, classes, plane, inv](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        const double up = self.grad[0] * inv;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t px = 0; px < plane; ++px) {
            const std::uint8_t t = (*tgt)[b * plane + px];
            if (t == kIgnoreLabel) continue;
            for (std::size_t k = 0; k < classes; ++k) {
              const std::size_t i = (b * classes + k) * plane + px;
              g[i] += up * ((*probs)[i] - (k == t ? 1.0 : 0.0));
            }
          }
        }
      });
}

}  // namespace tspkit
