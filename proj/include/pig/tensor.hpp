// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pig {

class Rng;

// One node of the dynamic autodiff tape. Op results record their
// grad-requiring parents plus a closure that pushes the node's gradient
// back into them; the tape is rebuilt every forward pass.
struct TensorNode {
  std::vector<size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  size_t size() const { return data.size(); }
  bool is_leaf() const { return !backprop; }
  void accumulate(const double* g, size_t n);
};

// Dense row-major f64 tensor handle with value semantics over a shared node.
// All training math is 64-bit; f32 appears only in the persisted index.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(const std::vector<size_t>& shape, bool requires_grad = false);
  static Tensor full(const std::vector<size_t>& shape, double value, bool requires_grad = false);
  static Tensor from_data(const std::vector<size_t>& shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(const std::vector<size_t>& shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<size_t>& shape() const { return node_->shape; }
  size_t size() const { return node_->data.size(); }
  size_t ndim() const { return node_->shape.size(); }
  // 2-D accessors; rank is validated.
  size_t rows() const;
  size_t cols() const;
  double at(size_t r, size_t c) const;

  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& mutable_data() { return node_->data; }
  double value() const;  // scalar tensors only

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  // Reverse-mode sweep from a scalar. Non-leaf gradients are scratch and
  // reset per sweep; leaf gradients accumulate until zero_grad().
  void backward() const;

  void check_finite(const std::string& what) const;
  bool all_finite() const;

  std::shared_ptr<TensorNode> node() const { return node_; }

  std::string shape_str() const;

 private:
  std::shared_ptr<TensorNode> node_;
};

// Scoped tape suppression for inference paths: ops constructed while a
// guard is alive compute values only and record no gradient graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool prev_;
};

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor elementwise_max(const Tensor& a, const Tensor& b);  // ties route grad to a
// out = a * s where s is a scalar tensor (both differentiable).
Tensor mul_by_scalar_tensor(const Tensor& a, const Tensor& s);

// ---- matrix ops (2-D) ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a . b^T
Tensor transpose(const Tensor& a);
// mat[r x c] + row[c] broadcast over rows.
Tensor add_row_broadcast(const Tensor& mat, const Tensor& row);

// ---- shape / gather ----
Tensor reshape(const Tensor& a, const std::vector<size_t>& new_shape);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, size_t begin, size_t count);
Tensor gather_rows(const Tensor& a, const std::vector<size_t>& indices);
Tensor take(const Tensor& a, size_t r, size_t c);  // scalar pick

// ---- reductions ----
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// ---- normalization ----
// Row softmax with max-shift; NaN input raises NumericError. With
// causal=true, entry (i, j) for j > i is exactly zero in the output and
// receives exactly zero gradient. axis=0 softmaxes columns instead.
Tensor softmax(const Tensor& a, int axis = -1, bool causal = false);
Tensor softmax_rows(const Tensor& a, bool causal = false);
// Per-row layer normalization with epsilon inside the square root.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

}  // namespace pig
