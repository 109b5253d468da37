#include "stk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "stk/kernels.hpp"

namespace stk {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape, bool rg) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value.assign(static_cast<std::size_t>(impl->numel()), 0.0);
  impl->requires_grad = rg;
  return impl;
}

using Parents = std::vector<std::shared_ptr<TensorImpl>>;

thread_local bool g_no_grad = false;

Tensor make_op(std::vector<int> shape, Parents parents,
               std::function<void(TensorImpl&)> bw) {
  bool rg = false;
  if (!g_no_grad)
    for (const auto& p : parents) rg = rg || p->requires_grad;
  auto impl = make_impl(std::move(shape), rg);
  if (rg) {
    impl->parents = std::move(parents);
    impl->backward_fn = std::move(bw);
  }
  return Tensor(impl);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw dim_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                    " vs " + shape_str(b.shape()));
}

void accumulate(TensorImpl& p, const double* src, std::int64_t n) {
  p.ensure_grad();
  double* g = p.grad.data();
  for (std::int64_t i = 0; i < n; ++i) g[i] += src[i];
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  std::fill(impl->value.begin(), impl->value.end(), v);
  return Tensor(impl);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values,
                    bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  if (static_cast<std::int64_t>(values.size()) != impl->numel())
    throw dim_error("Tensor::from: " + std::to_string(values.size()) +
                    " values for shape " + shape_str(impl->shape));
  impl->value = std::move(values);
  return Tensor(impl);
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : impl->value) v = dist(rng);
  return Tensor(impl);
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::rows() const { return impl_->shape.size() < 2 ? 1 : impl_->shape[0]; }
int Tensor::cols() const { return impl_->shape.empty() ? 0 : impl_->shape.back(); }
std::int64_t Tensor::numel() const { return impl_->numel(); }
bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool rg) { impl_->requires_grad = rg; }
std::vector<double>& Tensor::values() { return impl_->value; }
const std::vector<double>& Tensor::values() const { return impl_->value; }
double* Tensor::data() { return impl_->value.data(); }
const double* Tensor::data() const { return impl_->value.data(); }

double Tensor::item() const {
  if (numel() != 1) throw dim_error("item(): tensor has " + std::to_string(numel()) + " elements");
  return impl_->value[0];
}

double Tensor::at(int i, int j) const {
  return impl_->value[static_cast<std::size_t>(i) * cols() + j];
}

std::vector<double>& Tensor::grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() {
  impl_->ensure_grad();
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  auto impl = make_impl(impl_->shape, false);
  impl->value = impl_->value;
  return Tensor(impl);
}

void Tensor::backward() const {
  if (numel() != 1) throw dim_error("backward(): root must be scalar");
  if (!impl_->requires_grad) return;

  // Postorder DFS, then reverse for the backward sweep.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  impl_->ensure_grad();
  impl_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto A = a.impl(), B = b.impl();
  Tensor y = make_op(a.shape(), {A, B}, [A, B](TensorImpl& self) {
    const std::int64_t n = self.numel();
    if (A->requires_grad) accumulate(*A, self.grad.data(), n);
    if (B->requires_grad) accumulate(*B, self.grad.data(), n);
  });
  const std::int64_t n = y.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = A->value[i] + B->value[i];
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto A = a.impl(), B = b.impl();
  Tensor y = make_op(a.shape(), {A, B}, [A, B](TensorImpl& self) {
    const std::int64_t n = self.numel();
    if (A->requires_grad) accumulate(*A, self.grad.data(), n);
    if (B->requires_grad) {
      B->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) B->grad[i] -= self.grad[i];
    }
  });
  const std::int64_t n = y.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = A->value[i] - B->value[i];
  return y;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  auto A = a.impl(), B = b.impl();
  Tensor y = make_op(a.shape(), {A, B}, [A, B](TensorImpl& self) {
    const std::int64_t n = self.numel();
    if (A->requires_grad) {
      A->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) A->grad[i] += self.grad[i] * B->value[i];
    }
    if (B->requires_grad) {
      B->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) B->grad[i] += self.grad[i] * A->value[i];
    }
  });
  const std::int64_t n = y.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = A->value[i] * B->value[i];
  return y;
}

Tensor add_rowwise(const Tensor& x, const Tensor& b) {
  if (b.numel() != x.cols())
    throw dim_error("add_rowwise: bias " + shape_str(b.shape()) + " vs cols " +
                    std::to_string(x.cols()));
  auto X = x.impl(), B = b.impl();
  const int r = x.rows(), c = x.cols();
  Tensor y = make_op(x.shape(), {X, B}, [X, B, r, c](TensorImpl& self) {
    if (X->requires_grad) accumulate(*X, self.grad.data(), self.numel());
    if (B->requires_grad) {
      B->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) B->grad[j] += self.grad[static_cast<std::size_t>(i) * c + j];
    }
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      y.data()[static_cast<std::size_t>(i) * c + j] =
          X->value[static_cast<std::size_t>(i) * c + j] + B->value[j];
  return y;
}

Tensor mul_rowwise(const Tensor& x, const Tensor& v) {
  if (v.numel() != x.cols())
    throw dim_error("mul_rowwise: vector " + shape_str(v.shape()) + " vs cols " +
                    std::to_string(x.cols()));
  auto X = x.impl(), V = v.impl();
  const int r = x.rows(), c = x.cols();
  Tensor y = make_op(x.shape(), {X, V}, [X, V, r, c](TensorImpl& self) {
    if (X->requires_grad) {
      X->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * c + j;
          X->grad[k] += self.grad[k] * V->value[j];
        }
    }
    if (V->requires_grad) {
      V->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * c + j;
          V->grad[j] += self.grad[k] * X->value[k];
        }
    }
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * c + j;
      y.data()[k] = X->value[k] * V->value[j];
    }
  return y;
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  if (w.numel() != x.rows())
    throw dim_error("scale_rows: weights " + shape_str(w.shape()) + " vs rows " +
                    std::to_string(x.rows()));
  auto X = x.impl(), W = w.impl();
  const int r = x.rows(), c = x.cols();
  Tensor y = make_op(x.shape(), {X, W}, [X, W, r, c](TensorImpl& self) {
    if (X->requires_grad) {
      X->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * c + j;
          X->grad[k] += self.grad[k] * W->value[i];
        }
    }
    if (W->requires_grad) {
      W->ensure_grad();
      for (int i = 0; i < r; ++i) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * c + j;
          acc += self.grad[k] * X->value[k];
        }
        W->grad[i] += acc;
      }
    }
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * c + j;
      y.data()[k] = X->value[k] * W->value[i];
    }
  return y;
}

Tensor scale(const Tensor& x, double s) {
  auto X = x.impl();
  Tensor y = make_op(x.shape(), {X}, [X, s](TensorImpl& self) {
    X->ensure_grad();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) X->grad[i] += s * self.grad[i];
  });
  const std::int64_t n = y.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = s * X->value[i];
  return y;
}

Tensor add_scalar(const Tensor& x, double c) {
  auto X = x.impl();
  Tensor y = make_op(x.shape(), {X}, [X](TensorImpl& self) {
    accumulate(*X, self.grad.data(), self.numel());
  });
  const std::int64_t n = y.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = X->value[i] + c;
  return y;
}

Tensor mul_scalar_t(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw dim_error("mul_scalar_t: scale must be a single element");
  auto X = x.impl(), S = s.impl();
  Tensor y = make_op(x.shape(), {X, S}, [X, S](TensorImpl& self) {
    const std::int64_t n = self.numel();
    const double sv = S->value[0];
    if (X->requires_grad) {
      X->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) X->grad[i] += self.grad[i] * sv;
    }
    if (S->requires_grad) {
      S->ensure_grad();
      double acc = 0.0;
      for (std::int64_t i = 0; i < n; ++i) acc += self.grad[i] * X->value[i];
      S->grad[0] += acc;
    }
  });
  const std::int64_t n = y.numel();
  const double sv = S->value[0];
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = X->value[i] * sv;
  return y;
}

// ---- matmul family ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
    throw dim_error("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  auto A = a.impl(), B = b.impl();
  Tensor y = make_op({m, n}, {A, B}, [A, B, m, k, n](TensorImpl& self) {
    std::vector<double> scratch;
    if (A->requires_grad) {
      scratch.assign(static_cast<std::size_t>(m) * k, 0.0);
      kernels::matmul_nt(self.grad.data(), B->value.data(), scratch.data(), m, n, k);
      accumulate(*A, scratch.data(), static_cast<std::int64_t>(m) * k);
    }
    if (B->requires_grad) {
      scratch.assign(static_cast<std::size_t>(k) * n, 0.0);
      kernels::matmul_tn(A->value.data(), self.grad.data(), scratch.data(), k, m, n);
      accumulate(*B, scratch.data(), static_cast<std::int64_t>(k) * n);
    }
  });
  kernels::matmul_nn(A->value.data(), B->value.data(), y.data(), m, k, n);
  return y;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.cols())
    throw dim_error("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  auto A = a.impl(), B = b.impl();
  Tensor y = make_op({m, n}, {A, B}, [A, B, m, k, n](TensorImpl& self) {
    std::vector<double> scratch;
    if (A->requires_grad) {
      scratch.assign(static_cast<std::size_t>(m) * k, 0.0);
      kernels::matmul_nn(self.grad.data(), B->value.data(), scratch.data(), m, n, k);
      accumulate(*A, scratch.data(), static_cast<std::int64_t>(m) * k);
    }
    if (B->requires_grad) {
      scratch.assign(static_cast<std::size_t>(n) * k, 0.0);
      kernels::matmul_tn(self.grad.data(), A->value.data(), scratch.data(), n, m, k);
      accumulate(*B, scratch.data(), static_cast<std::int64_t>(n) * k);
    }
  });
  kernels::matmul_nt(A->value.data(), B->value.data(), y.data(), m, k, n);
  return y;
}

namespace {
Tensor reshape(const Tensor& x, std::vector<int> shape) {
  auto X = x.impl();
  Tensor y = make_op(std::move(shape), {X}, [X](TensorImpl& self) {
    accumulate(*X, self.grad.data(), self.numel());
  });
  if (y.numel() != x.numel()) throw dim_error("reshape: element count mismatch");
  std::copy(X->value.begin(), X->value.end(), y.values().begin());
  return y;
}
}  // namespace

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
  const bool vec = x.shape().size() == 1;
  if (x.cols() != w.rows())
    throw dim_error("linear: input " + shape_str(x.shape()) + " vs weight " +
                    shape_str(w.shape()));
  Tensor x2 = vec ? reshape(x, {1, x.cols()}) : x;
  Tensor y = matmul(x2, w);
  if (bias) y = add_rowwise(y, *bias);
  return vec ? reshape(y, {y.cols()}) : y;
}

// ---- nonlinearities ----

Tensor relu(const Tensor& x) {
  auto X = x.impl();
  Tensor y = make_op(x.shape(), {X}, [X](TensorImpl& self) {
    X->ensure_grad();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i)
      if (X->value[i] > 0.0) X->grad[i] += self.grad[i];
  });
  const std::int64_t n = y.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = X->value[i] > 0.0 ? X->value[i] : 0.0;
  return y;
}

Tensor sigmoid(const Tensor& x) {
  auto X = x.impl();
  Tensor y = make_op(x.shape(), {X}, [X](TensorImpl& self) {
    X->ensure_grad();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      const double s = self.value[i];
      X->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
  const std::int64_t n = y.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = X->value[i];
    y.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                           : std::exp(v) / (1.0 + std::exp(v));
  }
  return y;
}

Tensor tanh_t(const Tensor& x) {
  auto X = x.impl();
  Tensor y = make_op(x.shape(), {X}, [X](TensorImpl& self) {
    X->ensure_grad();
    const std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      const double t = self.value[i];
      X->grad[i] += self.grad[i] * (1.0 - t * t);
    }
  });
  const std::int64_t n = y.numel();
  for (std::int64_t i = 0; i < n; ++i) y.data()[i] = std::tanh(X->value[i]);
  return y;
}

// ---- softmax family ----

namespace {
Tensor softmax_rows_op(const Tensor& x) {
  auto X = x.impl();
  const int r = x.rows(), c = x.cols();
  Tensor y = make_op(x.shape(), {X}, [X, r, c](TensorImpl& self) {
    X->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* yi = self.value.data() + static_cast<std::size_t>(i) * c;
      const double* gi = self.grad.data() + static_cast<std::size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += gi[j] * yi[j];
      double* xg = X->grad.data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) xg[j] += yi[j] * (gi[j] - dot);
    }
  });
  kernels::softmax_rows(X->value.data(), y.data(), r, c);
  return y;
}
}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  const int nd = static_cast<int>(x.shape().size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw dim_error("softmax: axis out of range");
  if (nd == 1) return reshape(softmax_rows_op(reshape(x, {1, x.cols()})), {x.cols()});
  if (axis == nd - 1) return softmax_rows_op(x);
  return transpose(softmax_rows_op(transpose(x)));
}

Tensor log_softmax_rows(const Tensor& x) {
  auto X = x.impl();
  const int r = x.rows(), c = x.cols();
  Tensor y = make_op(x.shape(), {X, }, [X, r, c](TensorImpl& self) {
    X->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* yi = self.value.data() + static_cast<std::size_t>(i) * c;
      const double* gi = self.grad.data() + static_cast<std::size_t>(i) * c;
      double gsum = 0.0;
      for (int j = 0; j < c; ++j) gsum += gi[j];
      double* xg = X->grad.data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) xg[j] += gi[j] - std::exp(yi[j]) * gsum;
    }
  });
  for (int i = 0; i < r; ++i) {
    const double* xi = X->value.data() + static_cast<std::size_t>(i) * c;
    double* yi = y.data() + static_cast<std::size_t>(i) * c;
    double mx = xi[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(xi[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < c; ++j) yi[j] = xi[j] - lse;
  }
  return y;
}

Tensor transpose(const Tensor& x) {
  if (x.shape().size() != 2) throw dim_error("transpose: 2-D only");
  const int r = x.rows(), c = x.cols();
  auto X = x.impl();
  Tensor y = make_op({c, r}, {X}, [X, r, c](TensorImpl& self) {
    X->ensure_grad();
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < r; ++j)
        X->grad[static_cast<std::size_t>(j) * c + i] +=
            self.grad[static_cast<std::size_t>(i) * r + j];
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      y.data()[static_cast<std::size_t>(j) * r + i] = X->value[static_cast<std::size_t>(i) * c + j];
  return y;
}

// ---- reductions ----

Tensor sum_all(const Tensor& x) {
  auto X = x.impl();
  Tensor y = make_op({1}, {X}, [X](TensorImpl& self) {
    X->ensure_grad();
    const double g = self.grad[0];
    for (auto& v : X->grad) v += g;
  });
  y.data()[0] = std::accumulate(X->value.begin(), X->value.end(), 0.0);
  return y;
}

Tensor mean_rows(const Tensor& x) {
  const int r = x.rows(), c = x.cols();
  auto X = x.impl();
  Tensor y = make_op({c}, {X}, [X, r, c](TensorImpl& self) {
    X->ensure_grad();
    const double inv = 1.0 / r;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        X->grad[static_cast<std::size_t>(i) * c + j] += self.grad[j] * inv;
  });
  for (int j = 0; j < c; ++j) {
    double acc = 0.0;
    for (int i = 0; i < r; ++i) acc += X->value[static_cast<std::size_t>(i) * c + j];
    y.data()[j] = acc / r;
  }
  return y;
}

// ---- gather / scatter ----

Tensor gather_rows(const Tensor& x, const std::vector<int>& idx) {
  const int c = x.cols(), r = x.rows();
  for (int i : idx)
    if (i < 0 || i >= r)
      throw dim_error("gather_rows: index " + std::to_string(i) + " out of " + std::to_string(r));
  auto X = x.impl();
  const int n = static_cast<int>(idx.size());
  Tensor y = make_op({n, c}, {X}, [X, idx, c, n](TensorImpl& self) {
    X->ensure_grad();
    for (int t = 0; t < n; ++t) {
      const double* g = self.grad.data() + static_cast<std::size_t>(t) * c;
      double* xg = X->grad.data() + static_cast<std::size_t>(idx[t]) * c;
      for (int j = 0; j < c; ++j) xg[j] += g[j];
    }
  });
  for (int t = 0; t < n; ++t)
    std::copy_n(X->value.data() + static_cast<std::size_t>(idx[t]) * c, c,
                y.data() + static_cast<std::size_t>(t) * c);
  return y;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  return gather_rows(table, ids);
}

Tensor scatter_rows(const Tensor& base, const Tensor& rows, const std::vector<int>& idx) {
  const int c = base.cols(), r = base.rows();
  if (rows.cols() != c || rows.rows() != static_cast<int>(idx.size()))
    throw dim_error("scatter_rows: rows " + shape_str(rows.shape()) + " vs " +
                    std::to_string(idx.size()) + " indices, cols " + std::to_string(c));
  std::unordered_set<int> uniq(idx.begin(), idx.end());
  if (uniq.size() != idx.size()) throw dim_error("scatter_rows: duplicate indices");
  auto B = base.impl(), R = rows.impl();
  const int n = static_cast<int>(idx.size());
  Tensor y = make_op(base.shape(), {B, R}, [B, R, idx, c, n](TensorImpl& self) {
    if (B->requires_grad) {
      B->ensure_grad();
      std::vector<char> replaced(B->shape[0], 0);
      for (int i : idx) replaced[i] = 1;
      const int rr = B->shape[0];
      for (int i = 0; i < rr; ++i) {
        if (replaced[i]) continue;
        const double* g = self.grad.data() + static_cast<std::size_t>(i) * c;
        double* bg = B->grad.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) bg[j] += g[j];
      }
    }
    if (R->requires_grad) {
      R->ensure_grad();
      for (int t = 0; t < n; ++t) {
        const double* g = self.grad.data() + static_cast<std::size_t>(idx[t]) * c;
        double* rg = R->grad.data() + static_cast<std::size_t>(t) * c;
        for (int j = 0; j < c; ++j) rg[j] += g[j];
      }
    }
  });
  (void)r;
  y.values() = B->value;
  for (int t = 0; t < n; ++t)
    std::copy_n(R->value.data() + static_cast<std::size_t>(t) * c, c,
                y.data() + static_cast<std::size_t>(idx[t]) * c);
  return y;
}

// ---- concat / slice ----

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw dim_error("concat_cols: row mismatch");
  const int r = a.rows(), ca = a.cols(), cb = b.cols();
  auto A = a.impl(), B = b.impl();
  Tensor y = make_op({r, ca + cb}, {A, B}, [A, B, r, ca, cb](TensorImpl& self) {
    const int c = ca + cb;
    if (A->requires_grad) {
      A->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < ca; ++j)
          A->grad[static_cast<std::size_t>(i) * ca + j] +=
              self.grad[static_cast<std::size_t>(i) * c + j];
    }
    if (B->requires_grad) {
      B->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < cb; ++j)
          B->grad[static_cast<std::size_t>(i) * cb + j] +=
              self.grad[static_cast<std::size_t>(i) * c + ca + j];
    }
  });
  const int c = ca + cb;
  for (int i = 0; i < r; ++i) {
    std::copy_n(A->value.data() + static_cast<std::size_t>(i) * ca, ca,
                y.data() + static_cast<std::size_t>(i) * c);
    std::copy_n(B->value.data() + static_cast<std::size_t>(i) * cb, cb,
                y.data() + static_cast<std::size_t>(i) * c + ca);
  }
  return y;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw dim_error("concat_rows: col mismatch");
  const int ra = a.rows(), rb = b.rows(), c = a.cols();
  auto A = a.impl(), B = b.impl();
  Tensor y = make_op({ra + rb, c}, {A, B}, [A, B, ra, rb, c](TensorImpl& self) {
    if (A->requires_grad) accumulate(*A, self.grad.data(), static_cast<std::int64_t>(ra) * c);
    if (B->requires_grad) {
      B->ensure_grad();
      const double* g = self.grad.data() + static_cast<std::size_t>(ra) * c;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(rb) * c; ++i) B->grad[i] += g[i];
    }
  });
  std::copy(A->value.begin(), A->value.end(), y.values().begin());
  std::copy(B->value.begin(), B->value.end(), y.values().begin() + static_cast<std::size_t>(ra) * c);
  return y;
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
  const int r = x.rows(), c = x.cols();
  if (c0 < 0 || c1 > c || c0 >= c1) throw dim_error("slice_cols: bad range");
  auto X = x.impl();
  const int w = c1 - c0;
  Tensor y = make_op({r, w}, {X}, [X, r, c, c0, w](TensorImpl& self) {
    X->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < w; ++j)
        X->grad[static_cast<std::size_t>(i) * c + c0 + j] +=
            self.grad[static_cast<std::size_t>(i) * w + j];
  });
  for (int i = 0; i < r; ++i)
    std::copy_n(X->value.data() + static_cast<std::size_t>(i) * c + c0, w,
                y.data() + static_cast<std::size_t>(i) * w);
  return y;
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
  const int r = x.rows(), c = x.cols();
  if (r0 < 0 || r1 > r || r0 >= r1) throw dim_error("slice_rows: bad range");
  auto X = x.impl();
  const int h = r1 - r0;
  Tensor y = make_op({h, c}, {X}, [X, c, r0, h](TensorImpl& self) {
    X->ensure_grad();
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < c; ++j)
        X->grad[static_cast<std::size_t>(i + r0) * c + j] +=
            self.grad[static_cast<std::size_t>(i) * c + j];
  });
  std::copy_n(X->value.data() + static_cast<std::size_t>(r0) * c, static_cast<std::size_t>(h) * c,
              y.data());
  return y;
}

Tensor pick_elems(const Tensor& x, const std::vector<int>& cols) {
  const int r = x.rows(), c = x.cols();
  if (static_cast<int>(cols.size()) != r) throw dim_error("pick_elems: one column per row");
  for (int j : cols)
    if (j < 0 || j >= c) throw dim_error("pick_elems: column out of range");
  auto X = x.impl();
  Tensor y = make_op({r}, {X}, [X, cols, c, r](TensorImpl& self) {
    X->ensure_grad();
    for (int i = 0; i < r; ++i)
      X->grad[static_cast<std::size_t>(i) * c + cols[i]] += self.grad[i];
  });
  for (int i = 0; i < r; ++i) y.data()[i] = X->value[static_cast<std::size_t>(i) * c + cols[i]];
  return y;
}

Tensor segment_mean(const Tensor& x, const std::vector<int>& seg, int n_segments) {
  const int r = x.rows(), c = x.cols();
  if (static_cast<int>(seg.size()) != r) throw dim_error("segment_mean: one segment per row");
  std::vector<int> count(n_segments, 0);
  for (int s : seg) {
    if (s < 0 || s >= n_segments) throw dim_error("segment_mean: segment out of range");
    ++count[s];
  }
  auto X = x.impl();
  Tensor y = make_op({n_segments, c}, {X}, [X, seg, count, c, r](TensorImpl& self) {
    X->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double inv = 1.0 / count[seg[i]];
      const double* g = self.grad.data() + static_cast<std::size_t>(seg[i]) * c;
      double* xg = X->grad.data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) xg[j] += g[j] * inv;
    }
  });
  for (int i = 0; i < r; ++i) {
    const double* xv = X->value.data() + static_cast<std::size_t>(i) * c;
    double* yv = y.data() + static_cast<std::size_t>(seg[i]) * c;
    for (int j = 0; j < c; ++j) yv[j] += xv[j];
  }
  for (int s = 0; s < n_segments; ++s) {
    if (count[s] == 0) continue;
    double* yv = y.data() + static_cast<std::size_t>(s) * c;
    const double inv = 1.0 / count[s];
    for (int j = 0; j < c; ++j) yv[j] *= inv;
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const int r = x.rows(), c = x.cols();
  if (gain.numel() != c || bias.numel() != c) throw dim_error("layer_norm: gain/bias size");
  auto X = x.impl(), G = gain.impl(), B = bias.impl();
  // Save xhat and 1/sigma per row for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(r) * c);
  auto inv_sigma = std::make_shared<std::vector<double>>(r);
  Tensor y = make_op(x.shape(), {X, G, B}, [X, G, B, xhat, inv_sigma, r, c](TensorImpl& self) {
    for (int i = 0; i < r; ++i) {
      const double* gy = self.grad.data() + static_cast<std::size_t>(i) * c;
      const double* xh = xhat->data() + static_cast<std::size_t>(i) * c;
      if (G->requires_grad) {
        G->ensure_grad();
        for (int j = 0; j < c; ++j) G->grad[j] += gy[j] * xh[j];
      }
      if (B->requires_grad) {
        B->ensure_grad();
        for (int j = 0; j < c; ++j) B->grad[j] += gy[j];
      }
      if (X->requires_grad) {
        X->ensure_grad();
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < c; ++j) {
          const double dg = gy[j] * G->value[j];
          m1 += dg;
          m2 += dg * xh[j];
        }
        m1 /= c;
        m2 /= c;
        double* xg = X->grad.data() + static_cast<std::size_t>(i) * c;
        const double is = (*inv_sigma)[i];
        for (int j = 0; j < c; ++j) {
          const double dg = gy[j] * G->value[j];
          xg[j] += is * (dg - m1 - xh[j] * m2);
        }
      }
    }
  });
  for (int i = 0; i < r; ++i) {
    const double* xi = X->value.data() + static_cast<std::size_t>(i) * c;
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += xi[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[i] = is;
    double* xh = xhat->data() + static_cast<std::size_t>(i) * c;
    double* yi = y.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) {
      xh[j] = (xi[j] - mu) * is;
      yi[j] = xh[j] * G->value[j] + B->value[j];
    }
  }
  return y;
}

Tensor topk_renorm(const Tensor& gate, int k) {
  const int r = gate.rows(), n = gate.cols();
  if (k < 1 || k > n) throw config_error("topk_renorm: k=" + std::to_string(k) +
                                         " outside [1," + std::to_string(n) + "]");
  auto G = gate.impl();
  auto active = std::make_shared<std::vector<std::vector<int>>>(r);
  auto sums = std::make_shared<std::vector<double>>(r);
  Tensor y = make_op(gate.shape(), {G}, [G, active, sums, n](TensorImpl& self) {
    G->ensure_grad();
    const int rr = static_cast<int>(active->size());
    for (int i = 0; i < rr; ++i) {
      const double s = (*sums)[i];
      const double* gv = G->value.data() + static_cast<std::size_t>(i) * n;
      const double* dy = self.grad.data() + static_cast<std::size_t>(i) * n;
      double dot = 0.0;
      for (int a : (*active)[i]) dot += dy[a] * gv[a];
      double* gg = G->grad.data() + static_cast<std::size_t>(i) * n;
      for (int a : (*active)[i]) gg[a] += dy[a] / s - dot / (s * s);
    }
  });
  for (int i = 0; i < r; ++i) {
    const double* gv = G->value.data() + static_cast<std::size_t>(i) * n;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [gv](int a, int b) { return gv[a] > gv[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    double s = 0.0;
    for (int a : order) s += gv[a];
    (*active)[i] = order;
    (*sums)[i] = s;
    double* yi = y.data() + static_cast<std::size_t>(i) * n;
    for (int a : order) yi[a] = gv[a] / s;
  }
  return y;
}

Tensor causal_mask(int n) {
  Tensor m = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m.data()[static_cast<std::size_t>(i) * n + j] = 1.0;
  return m;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor* mask) {
  if (q.cols() != k.cols())
    throw dim_error("attention: d_k mismatch " + shape_str(q.shape()) + " vs " +
                    shape_str(k.shape()));
  if (k.rows() != v.rows()) throw dim_error("attention: K/V row mismatch");
  if (mask && (mask->rows() != q.rows() || mask->cols() != k.rows()))
    throw dim_error("attention: mask must be [n_q, n_k]");
  Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  if (mask) {
    Tensor bias = Tensor::zeros(scores.shape());
    const std::int64_t n = bias.numel();
    for (std::int64_t i = 0; i < n; ++i)
      bias.data()[i] = mask->data()[i] > 0.5 ? 0.0 : -1e30;
    scores = add(scores, bias);
  }
  return matmul(softmax(scores, -1), v);
}

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  double eps, double tolerance) {
  if (eps < 1e-6 || eps > 1e-3)
    throw config_error("grad_check: eps must lie in [1e-6, 1e-3]");
  std::vector<Tensor> ps = params;
  for (auto& p : ps) p.zero_grad();
  Tensor out = f();
  if (out.numel() != 1) throw config_error("grad_check: function must be scalar-valued");
  if (!std::isfinite(out.item())) throw numeric_error("grad_check: non-finite output");
  out.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(ps.size());
  for (auto& p : ps) analytic.push_back(p.grad());

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    auto& vals = ps[pi].values();
    for (std::size_t e = 0; e < vals.size(); ++e) {
      const double orig = vals[e];
      // Fourth-order central stencil keeps the numeric error near 1e-13 so
      // the 1e-4 relative tolerance is meaningful even for small gradients.
      vals[e] = orig + 2.0 * eps;
      const double f_p2 = f().item();
      vals[e] = orig + eps;
      const double f_p1 = f().item();
      vals[e] = orig - eps;
      const double f_m1 = f().item();
      vals[e] = orig - 2.0 * eps;
      const double f_m2 = f().item();
      vals[e] = orig;
      if (!std::isfinite(f_p2) || !std::isfinite(f_p1) || !std::isfinite(f_m1) ||
          !std::isfinite(f_m2))
        throw numeric_error("grad_check: non-finite perturbed output");
      const double numeric = (-f_p2 + 8.0 * f_p1 - 8.0 * f_m1 + f_m2) / (12.0 * eps);
      const double ana = analytic[pi][e];
      const double rel =
          std::fabs(ana - numeric) / std::max({std::fabs(ana), std::fabs(numeric), 1e-8});
      if (rel > tolerance)
        std::fprintf(stderr, "grad_check: param %zu entry %zu analytic=%.8g numeric=%.8g rel=%.3g\n",
                     pi, e, ana, numeric, rel);
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

double clip_grad_norm(const std::vector<Parameter>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    auto impl = p.tensor.impl();
    for (double g : impl->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const auto& p : params) {
      auto impl = p.tensor.impl();
      for (double& g : impl->grad) g *= s;
    }
  }
  return norm;
}

AdamW::AdamW(std::vector<Parameter> params, double lr, double weight_decay, double beta1,
             double beta2, double eps)
    : params_(std::move(params)),
      lr_(lr),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::size_t n = params_[i].tensor.values().size();
    m_[i].assign(n, 0.0);
    v_[i].assign(n, 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto impl = params_[i].tensor.impl();
    impl->ensure_grad();
    auto& vals = impl->value;
    auto& grads = impl->grad;
    for (std::size_t e = 0; e < vals.size(); ++e) {
      const double g = grads[e];
      m_[i][e] = beta1_ * m_[i][e] + (1.0 - beta1_) * g;
      v_[i][e] = beta2_ * v_[i][e] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][e] / bc1;
      const double vhat = v_[i][e] / bc2;
      vals[e] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * vals[e]);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

NoGradGuard::NoGradGuard() : prev_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = prev_; }

}  // namespace stk
