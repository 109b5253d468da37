#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stk/common.hpp"

// Minimal dense-tensor kernel with reverse-mode gradients. Tensors are
// row-major, 64-bit, at most 2-D ([rows, cols]; 1-D vectors are [n]). Ops
// record a dynamic tape only when an input requires gradients; backward()
// walks the tape in reverse topological order.
namespace stk {

struct TensorImpl;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int rows() const;  // 1 for 1-D
  int cols() const;  // size of last dimension
  std::int64_t numel() const;
  bool requires_grad() const;
  void set_requires_grad(bool rg);

  std::vector<double>& values();
  const std::vector<double>& values() const;
  double* data();
  const double* data() const;
  double item() const;  // numel()==1 only
  double at(int i, int j) const;

  std::vector<double>& grad();  // allocates zeros on first use
  void zero_grad();

  // Reverse-mode accumulation from this scalar.
  void backward() const;

  // Same values, no tape edges to the producer.
  Tensor detach() const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(static_cast<std::size_t>(numel()), 0.0);
  }
};

// A named trainable tensor; names are path-like ("layer0.attn.wq") and must
// be unique within a model so checkpoints round-trip.
struct Parameter {
  std::string name;
  Tensor tensor;
};

// ---- ops ----
Tensor add(const Tensor& a, const Tensor& b);              // same shape
Tensor sub(const Tensor& a, const Tensor& b);              // same shape
Tensor hadamard(const Tensor& a, const Tensor& b);         // same shape
Tensor add_rowwise(const Tensor& x, const Tensor& b);      // b: [cols]
Tensor mul_rowwise(const Tensor& x, const Tensor& v);      // v: [cols], y_ij = x_ij*v_j
Tensor scale_rows(const Tensor& x, const Tensor& w);       // w: [rows], y_i = w_i*x_i
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar_t(const Tensor& x, const Tensor& s);    // s: single element
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);        // a [m,k] * b[n,k]^T
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_t(const Tensor& x);
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax_rows(const Tensor& x);
Tensor transpose(const Tensor& x);
Tensor sum_all(const Tensor& x);                           // -> [1]
Tensor mean_rows(const Tensor& x);                         // [r,c] -> [c]
Tensor gather_rows(const Tensor& x, const std::vector<int>& idx);
Tensor embedding(const Tensor& table, const std::vector<int>& ids);
Tensor scatter_rows(const Tensor& base, const Tensor& rows, const std::vector<int>& idx);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, int c0, int c1);
Tensor slice_rows(const Tensor& x, int r0, int r1);
Tensor pick_elems(const Tensor& x, const std::vector<int>& cols);  // [n,c] -> [n]
Tensor segment_mean(const Tensor& x, const std::vector<int>& seg, int n_segments);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
// Per-row top-k gate: keep the k largest entries (ties to the lower index),
// renormalize them to sum 1, zero elsewhere.
Tensor topk_renorm(const Tensor& gate, int k);
// Softmax(Q K^T / sqrt(d_k)) V. mask, if given, is [n_q,n_k] with 1=allowed.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor* mask = nullptr);
Tensor causal_mask(int n);  // lower-triangular ones, no grad

// Central-difference check of reverse-mode gradients for a scalar-valued
// function of `params`. Returns the max relative error
// |analytic-numeric| / max(|analytic|,|numeric|,1e-8); entries exceeding
// `tolerance` are reported on stderr.
double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  double eps = 1e-3, double tolerance = 1e-4);

// Gradient-norm clipping over a parameter set; returns the pre-clip norm.
double clip_grad_norm(const std::vector<Parameter>& params, double max_norm);

// While alive on a thread, ops record no tape (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class AdamW {
 public:
  AdamW(std::vector<Parameter> params, double lr, double weight_decay = 0.01,
        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step();
  void zero_grad();
  const std::vector<Parameter>& params() const { return params_; }

 private:
  std::vector<Parameter> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace stk
