// SPDX-License-Identifier: Apache-2.0

#include "pig/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "pig/errors.hpp"
#include "pig/rng.hpp"

namespace pig {

namespace {

size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) {
    if (d == 0) throw ShapeError("zero dimension in shape");
    n *= d;
  }
  return n;
}

std::string shape_to_str(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

void require_2d(const Tensor& a, const char* op) {
  if (a.ndim() != 2) throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + a.shape_str());
}

std::shared_ptr<TensorNode> make_node(std::vector<size_t> shape) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data.assign(shape_numel(n->shape), 0.0);
  return n;
}

thread_local bool g_no_grad = false;

// Wires up an op result: requires_grad is inherited, and only
// grad-requiring parents enter the traversal graph.
Tensor finish(std::shared_ptr<TensorNode> out, std::initializer_list<Tensor> inputs,
              std::function<void(TensorNode&)> backprop) {
  bool rg = false;
  if (!g_no_grad) {
    for (const Tensor& t : inputs) rg = rg || t.requires_grad();
  }
  if (rg) {
    out->requires_grad = true;
    for (const Tensor& t : inputs) {
      if (t.requires_grad()) out->parents.push_back(t.node());
    }
    out->backprop = std::move(backprop);
  }
  return Tensor(std::move(out));
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = prev_; }
bool NoGradGuard::active() { return g_no_grad; }

void TensorNode::accumulate(const double* g, size_t n) {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  for (size_t i = 0; i < n; ++i) grad[i] += g[i];
}

Tensor Tensor::zeros(const std::vector<size_t>& shape, bool requires_grad) {
  auto n = make_node(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(const std::vector<size_t>& shape, double value, bool requires_grad) {
  auto n = make_node(shape);
  std::fill(n->data.begin(), n->data.end(), value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(const std::vector<size_t>& shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("from_data: " + std::to_string(data.size()) + " values for shape " +
                     shape_to_str(shape));
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(const std::vector<size_t>& shape, Rng& rng, double stddev, bool requires_grad) {
  auto n = make_node(shape);
  for (double& v : n->data) v = rng.normal(0.0, stddev);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

size_t Tensor::rows() const {
  require_2d(*this, "rows");
  return node_->shape[0];
}

size_t Tensor::cols() const {
  require_2d(*this, "cols");
  return node_->shape[1];
}

double Tensor::at(size_t r, size_t c) const {
  require_2d(*this, "at");
  return node_->data[r * node_->shape[1] + c];
}

double Tensor::value() const {
  if (size() != 1) throw UsageError("value(): tensor is not scalar, shape " + shape_str());
  return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) throw UsageError("grad(): no gradient present; call backward() first");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (size() != 1) throw UsageError("backward(): loss must be scalar, got shape " + shape_str());
  if (!node_->requires_grad) throw UsageError("backward(): loss does not require grad");

  // Iterative DFS post-order over grad-requiring ancestors.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [cur, idx] = stack.back();
    if (idx < cur->parents.size()) {
      TensorNode* p = cur->parents[idx++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(cur);
      stack.pop_back();
    }
  }

  // Non-leaf gradients are per-sweep scratch; leaf gradients persist and
  // accumulate across sweeps until zero_grad().
  for (TensorNode* n : topo) {
    if (!n->is_leaf()) n->grad.assign(n->size(), 0.0);
  }
  if (node_->is_leaf()) {
    if (node_->grad.empty()) node_->grad.assign(1, 0.0);
    node_->grad[0] += 1.0;
    return;
  }
  node_->grad.assign(1, 1.0);

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

void Tensor::check_finite(const std::string& what) const {
  for (double v : node_->data) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
  }
  for (double v : node_->grad) {
    if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + what);
  }
}

bool Tensor::all_finite() const {
  for (double v : node_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_str(node_->shape); }

// ---------------------------------------------------------------- elementwise

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& a, Fwd fwd, Bwd bwd) {
  auto out = make_node(a.shape());
  const auto& x = a.data();
  for (size_t i = 0; i < x.size(); ++i) out->data[i] = fwd(x[i]);
  auto an = a.node();
  return finish(std::move(out), {a}, [an, bwd](TensorNode& self) {
    std::vector<double> g(self.size());
    for (size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * bwd(an->data[i], self.data[i]);
    an->accumulate(g.data(), g.size());
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto out = make_node(a.shape());
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] + b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return finish(std::move(out), {a, b}, [an, bn](TensorNode& self) {
    if (an->requires_grad) an->accumulate(self.grad.data(), self.grad.size());
    if (bn->requires_grad) bn->accumulate(self.grad.data(), self.grad.size());
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto out = make_node(a.shape());
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] - b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return finish(std::move(out), {a, b}, [an, bn](TensorNode& self) {
    if (an->requires_grad) an->accumulate(self.grad.data(), self.grad.size());
    if (bn->requires_grad) {
      std::vector<double> g(self.size());
      for (size_t i = 0; i < g.size(); ++i) g[i] = -self.grad[i];
      bn->accumulate(g.data(), g.size());
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto out = make_node(a.shape());
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] * b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return finish(std::move(out), {a, b}, [an, bn](TensorNode& self) {
    std::vector<double> g(self.size());
    if (an->requires_grad) {
      for (size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * bn->data[i];
      an->accumulate(g.data(), g.size());
    }
    if (bn->requires_grad) {
      for (size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * an->data[i];
      bn->accumulate(g.data(), g.size());
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  return unary_elementwise(
      a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_elementwise(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp_t(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_t(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor reciprocal(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Tensor gelu(const Tensor& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return unary_elementwise(
      a,
      [=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [=](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

Tensor elementwise_max(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise_max");
  auto out = make_node(a.shape());
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = std::max(a.data()[i], b.data()[i]);
  auto an = a.node();
  auto bn = b.node();
  return finish(std::move(out), {a, b}, [an, bn](TensorNode& self) {
    std::vector<double> g(self.size());
    if (an->requires_grad) {
      for (size_t i = 0; i < g.size(); ++i) g[i] = (an->data[i] >= bn->data[i]) ? self.grad[i] : 0.0;
      an->accumulate(g.data(), g.size());
    }
    if (bn->requires_grad) {
      for (size_t i = 0; i < g.size(); ++i) g[i] = (an->data[i] >= bn->data[i]) ? 0.0 : self.grad[i];
      bn->accumulate(g.data(), g.size());
    }
  });
}

Tensor mul_by_scalar_tensor(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw ShapeError("mul_by_scalar_tensor: scalar operand has shape " + s.shape_str());
  const double sv = s.data()[0];
  auto out = make_node(a.shape());
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] * sv;
  auto an = a.node();
  auto sn = s.node();
  return finish(std::move(out), {a, s}, [an, sn](TensorNode& self) {
    const double svv = sn->data[0];
    if (an->requires_grad) {
      std::vector<double> g(self.size());
      for (size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * svv;
      an->accumulate(g.data(), g.size());
    }
    if (sn->requires_grad) {
      double g = 0.0;
      for (size_t i = 0; i < self.size(); ++i) g += self.grad[i] * an->data[i];
      sn->accumulate(&g, 1);
    }
  });
}

// ------------------------------------------------------------------- matrix

namespace {

// C[p x r] = A[p x q] . B[q x r], row-major i-k-j loops.
void gemm(const double* a, const double* b, double* c, size_t p, size_t q, size_t r) {
  std::fill(c, c + p * r, 0.0);
  for (size_t i = 0; i < p; ++i) {
    const double* arow = a + i * q;
    double* crow = c + i * r;
    for (size_t k = 0; k < q; ++k) {
      const double aik = arow[k];
      const double* brow = b + k * r;
      for (size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C[p x r] = A[p x q] . B[r x q]^T
void gemm_nt(const double* a, const double* b, double* c, size_t p, size_t q, size_t r) {
  for (size_t i = 0; i < p; ++i) {
    const double* arow = a + i * q;
    for (size_t j = 0; j < r; ++j) {
      const double* brow = b + j * q;
      double acc = 0.0;
      for (size_t k = 0; k < q; ++k) acc += arow[k] * brow[k];
      c[i * r + j] = acc;
    }
  }
}

// C[q x r] = A[p x q]^T . B[p x r]
void gemm_tn(const double* a, const double* b, double* c, size_t p, size_t q, size_t r) {
  std::fill(c, c + q * r, 0.0);
  for (size_t k = 0; k < p; ++k) {
    const double* arow = a + k * q;
    const double* brow = b + k * r;
    for (size_t i = 0; i < q; ++i) {
      const double aki = arow[i];
      double* crow = c + i * r;
      for (size_t j = 0; j < r; ++j) crow[j] += aki * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " + b.shape_str());
  }
  const size_t p = a.rows(), q = a.cols(), r = b.cols();
  auto out = make_node({p, r});
  gemm(a.data().data(), b.data().data(), out->data.data(), p, q, r);
  auto an = a.node();
  auto bn = b.node();
  return finish(std::move(out), {a, b}, [an, bn, p, q, r](TensorNode& self) {
    if (an->requires_grad) {
      std::vector<double> g(p * q);
      gemm_nt(self.grad.data(), bn->data.data(), g.data(), p, r, q);  // dA = dC . B^T
      an->accumulate(g.data(), g.size());
    }
    if (bn->requires_grad) {
      std::vector<double> g(q * r);
      gemm_tn(an->data.data(), self.grad.data(), g.data(), p, q, r);  // dB = A^T . dC
      bn->accumulate(g.data(), g.size());
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions disagree, " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  const size_t p = a.rows(), q = a.cols(), r = b.rows();
  auto out = make_node({p, r});
  gemm_nt(a.data().data(), b.data().data(), out->data.data(), p, q, r);
  auto an = a.node();
  auto bn = b.node();
  return finish(std::move(out), {a, b}, [an, bn, p, q, r](TensorNode& self) {
    if (an->requires_grad) {
      std::vector<double> g(p * q);
      gemm(self.grad.data(), bn->data.data(), g.data(), p, r, q);  // dA = dC . B
      an->accumulate(g.data(), g.size());
    }
    if (bn->requires_grad) {
      std::vector<double> g(r * q);
      gemm_tn(self.grad.data(), an->data.data(), g.data(), p, r, q);  // dB = dC^T . A
      bn->accumulate(g.data(), g.size());
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const size_t r = a.rows(), c = a.cols();
  auto out = make_node({c, r});
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) out->data[j * r + i] = a.data()[i * c + j];
  }
  auto an = a.node();
  return finish(std::move(out), {a}, [an, r, c](TensorNode& self) {
    std::vector<double> g(r * c);
    for (size_t i = 0; i < r; ++i) {
      for (size_t j = 0; j < c; ++j) g[i * c + j] = self.grad[j * r + i];
    }
    an->accumulate(g.data(), g.size());
  });
}

Tensor add_row_broadcast(const Tensor& mat, const Tensor& row) {
  require_2d(mat, "add_row_broadcast");
  if (row.ndim() != 1 || row.size() != mat.cols()) {
    throw ShapeError("add_row_broadcast: row " + row.shape_str() + " vs matrix " + mat.shape_str());
  }
  const size_t r = mat.rows(), c = mat.cols();
  auto out = make_node({r, c});
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) out->data[i * c + j] = mat.data()[i * c + j] + row.data()[j];
  }
  auto mn = mat.node();
  auto rn = row.node();
  return finish(std::move(out), {mat, row}, [mn, rn, r, c](TensorNode& self) {
    if (mn->requires_grad) mn->accumulate(self.grad.data(), self.grad.size());
    if (rn->requires_grad) {
      std::vector<double> g(c, 0.0);
      for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
      }
      rn->accumulate(g.data(), g.size());
    }
  });
}

// ------------------------------------------------------------ shape / gather

Tensor reshape(const Tensor& a, const std::vector<size_t>& new_shape) {
  if (shape_numel(new_shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + a.shape_str() + " as " + shape_to_str(new_shape));
  }
  auto out = std::make_shared<TensorNode>();
  out->shape = new_shape;
  out->data = a.data();
  auto an = a.node();
  return finish(std::move(out), {a},
                [an](TensorNode& self) { an->accumulate(self.grad.data(), self.grad.size()); });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no parts");
  const size_t c = parts.front().cols();
  size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != c) {
      throw ShapeError("concat_rows: column mismatch " + parts.front().shape_str() + " vs " +
                       p.shape_str());
    }
    total += p.rows();
  }
  auto out = make_node({total, c});
  size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out->data.begin() + static_cast<long>(off));
    off += p.size();
  }
  bool rg = false;
  for (const Tensor& p : parts) rg = rg || p.requires_grad();
  if (!rg) return Tensor(std::move(out));
  out->requires_grad = true;
  std::vector<std::shared_ptr<TensorNode>> nodes;
  for (const Tensor& p : parts) {
    nodes.push_back(p.node());
    if (p.requires_grad()) out->parents.push_back(p.node());
  }
  out->backprop = [nodes](TensorNode& self) {
    size_t off2 = 0;
    for (const auto& n : nodes) {
      if (n->requires_grad) n->accumulate(self.grad.data() + off2, n->size());
      off2 += n->size();
    }
  };
  return Tensor(std::move(out));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no parts");
  const size_t r = parts.front().rows();
  size_t total_c = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != r) {
      throw ShapeError("concat_cols: row mismatch " + parts.front().shape_str() + " vs " +
                       p.shape_str());
    }
    total_c += p.cols();
  }
  auto out = make_node({r, total_c});
  size_t coff = 0;
  for (const Tensor& p : parts) {
    const size_t pc = p.cols();
    for (size_t i = 0; i < r; ++i) {
      std::copy(p.data().begin() + static_cast<long>(i * pc),
                p.data().begin() + static_cast<long>((i + 1) * pc),
                out->data.begin() + static_cast<long>(i * total_c + coff));
    }
    coff += pc;
  }
  bool rg = false;
  for (const Tensor& p : parts) rg = rg || p.requires_grad();
  if (!rg) return Tensor(std::move(out));
  out->requires_grad = true;
  std::vector<std::shared_ptr<TensorNode>> nodes;
  std::vector<size_t> widths;
  for (const Tensor& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.cols());
    if (p.requires_grad()) out->parents.push_back(p.node());
  }
  out->backprop = [nodes, widths, r, total_c](TensorNode& self) {
    size_t coff2 = 0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      const auto& n = nodes[k];
      const size_t pc = widths[k];
      if (n->requires_grad) {
        std::vector<double> g(r * pc);
        for (size_t i = 0; i < r; ++i) {
          for (size_t j = 0; j < pc; ++j) g[i * pc + j] = self.grad[i * total_c + coff2 + j];
        }
        n->accumulate(g.data(), g.size());
      }
      coff2 += pc;
    }
  };
  return Tensor(std::move(out));
}

Tensor slice_rows(const Tensor& a, size_t begin, size_t count) {
  require_2d(a, "slice_rows");
  if (begin + count > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + std::to_string(a.rows()) +
                     " rows");
  }
  const size_t c = a.cols();
  auto out = make_node({count, c});
  std::copy(a.data().begin() + static_cast<long>(begin * c),
            a.data().begin() + static_cast<long>((begin + count) * c), out->data.begin());
  auto an = a.node();
  return finish(std::move(out), {a}, [an, begin, count, c](TensorNode& self) {
    if (an->grad.empty()) an->grad.assign(an->size(), 0.0);
    for (size_t i = 0; i < count * c; ++i) an->grad[begin * c + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<size_t>& indices) {
  require_2d(a, "gather_rows");
  const size_t c = a.cols();
  for (size_t idx : indices) {
    if (idx >= a.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(idx) + " out of " +
                       std::to_string(a.rows()) + " rows");
    }
  }
  auto out = make_node({indices.size(), c});
  for (size_t i = 0; i < indices.size(); ++i) {
    std::copy(a.data().begin() + static_cast<long>(indices[i] * c),
              a.data().begin() + static_cast<long>((indices[i] + 1) * c),
              out->data.begin() + static_cast<long>(i * c));
  }
  auto an = a.node();
  auto idx = indices;
  return finish(std::move(out), {a}, [an, idx, c](TensorNode& self) {
    if (an->grad.empty()) an->grad.assign(an->size(), 0.0);
    for (size_t i = 0; i < idx.size(); ++i) {
      for (size_t j = 0; j < c; ++j) an->grad[idx[i] * c + j] += self.grad[i * c + j];
    }
  });
}

Tensor take(const Tensor& a, size_t r, size_t c) {
  require_2d(a, "take");
  if (r >= a.rows() || c >= a.cols()) {
    throw ShapeError("take: (" + std::to_string(r) + ", " + std::to_string(c) + ") out of " +
                     a.shape_str());
  }
  const size_t cols = a.cols();
  auto out = make_node({1});
  out->data[0] = a.data()[r * cols + c];
  auto an = a.node();
  return finish(std::move(out), {a}, [an, r, c, cols](TensorNode& self) {
    if (an->grad.empty()) an->grad.assign(an->size(), 0.0);
    an->grad[r * cols + c] += self.grad[0];
  });
}

// --------------------------------------------------------------- reductions

Tensor sum_all(const Tensor& a) {
  auto out = make_node({1});
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  out->data[0] = acc;
  auto an = a.node();
  return finish(std::move(out), {a}, [an](TensorNode& self) {
    std::vector<double> g(an->size(), self.grad[0]);
    an->accumulate(g.data(), g.size());
  });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.size())); }

// ------------------------------------------------------------ normalization

Tensor softmax_rows(const Tensor& a, bool causal) { return softmax(a, -1, causal); }

Tensor softmax(const Tensor& a, int axis, bool causal) {
  require_2d(a, "softmax");
  if (axis == 0) {
    if (causal) throw UsageError("softmax: causal mask is defined for the row axis only");
    return transpose(softmax(transpose(a), -1, false));
  }
  if (axis != -1 && axis != 1) throw UsageError("softmax: axis must be -1, 0, or 1");
  const size_t r = a.rows(), c = a.cols();
  if (causal && r > c) throw ShapeError("softmax: causal mask needs rows <= cols, got " + a.shape_str());
  for (double v : a.data()) {
    if (std::isnan(v)) throw NumericError("softmax: NaN input");
  }
  auto out = make_node({r, c});
  for (size_t i = 0; i < r; ++i) {
    const double* x = a.data().data() + i * c;
    double* y = out->data.data() + i * c;
    const size_t lim = causal ? i + 1 : c;  // columns j >= lim are masked
    double mx = x[0];
    for (size_t j = 1; j < lim; ++j) mx = std::max(mx, x[j]);
    double denom = 0.0;
    for (size_t j = 0; j < lim; ++j) {
      y[j] = std::exp(x[j] - mx);
      denom += y[j];
    }
    const double inv = 1.0 / denom;
    for (size_t j = 0; j < lim; ++j) y[j] *= inv;
    for (size_t j = lim; j < c; ++j) y[j] = 0.0;
  }
  auto an = a.node();
  return finish(std::move(out), {a}, [an, r, c, causal](TensorNode& self) {
    std::vector<double> g(r * c, 0.0);
    for (size_t i = 0; i < r; ++i) {
      const double* s = self.data.data() + i * c;
      const double* go = self.grad.data() + i * c;
      const size_t lim = causal ? i + 1 : c;
      double dot = 0.0;
      for (size_t j = 0; j < lim; ++j) dot += go[j] * s[j];
      for (size_t j = 0; j < lim; ++j) g[i * c + j] = s[j] * (go[j] - dot);
    }
    an->accumulate(g.data(), g.size());
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_2d(x, "layer_norm");
  const size_t r = x.rows(), d = x.cols();
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer_norm: gamma/beta size must match feature dim " + std::to_string(d));
  }
  auto out = make_node({r, d});
  // Per-row inverse stddev and normalized values, kept for backward.
  std::vector<double> inv_std(r), xhat(r * d);
  for (size_t i = 0; i < r; ++i) {
    const double* row = x.data().data() + i * d;
    double mean = 0.0;
    for (size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double dv = row[j] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * is;
      xhat[i * d + j] = h;
      out->data[i * d + j] = h * gamma.data()[j] + beta.data()[j];
    }
  }
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  return finish(std::move(out), {x, gamma, beta},
                [xn, gn, bn, r, d, inv_std = std::move(inv_std),
                 xhat = std::move(xhat)](TensorNode& self) {
    if (gn->requires_grad) {
      std::vector<double> g(d, 0.0);
      for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < d; ++j) g[j] += self.grad[i * d + j] * xhat[i * d + j];
      }
      gn->accumulate(g.data(), g.size());
    }
    if (bn->requires_grad) {
      std::vector<double> g(d, 0.0);
      for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < d; ++j) g[j] += self.grad[i * d + j];
      }
      bn->accumulate(g.data(), g.size());
    }
    if (xn->requires_grad) {
      std::vector<double> g(r * d);
      const double invd = 1.0 / static_cast<double>(d);
      for (size_t i = 0; i < r; ++i) {
        double mean_gy = 0.0, mean_gyx = 0.0;
        for (size_t j = 0; j < d; ++j) {
          const double gy = self.grad[i * d + j] * gn->data[j];
          mean_gy += gy;
          mean_gyx += gy * xhat[i * d + j];
        }
        mean_gy *= invd;
        mean_gyx *= invd;
        for (size_t j = 0; j < d; ++j) {
          const double gy = self.grad[i * d + j] * gn->data[j];
          g[i * d + j] = (gy - mean_gy - xhat[i * d + j] * mean_gyx) * inv_std[i];
        }
      }
      xn->accumulate(g.data(), g.size());
    }
  });
}

}  // namespace pig
