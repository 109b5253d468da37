#include "stk/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace stk::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// Below this many output elements the fork/join overhead dominates.
constexpr long kParallelThreshold = 4096;

inline bool use_parallel(long work) {
#ifdef STK_HAVE_OPENMP
  return g_parallel.load(std::memory_order_relaxed) && work >= kParallelThreshold;
#else
  (void)work;
  return false;
#endif
}

inline void mm_nn_row(const double* a, const double* b, double* y, int i, int k, int n) {
  double* yi = y + static_cast<std::size_t>(i) * n;
  std::fill(yi, yi + n, 0.0);
  const double* ai = a + static_cast<std::size_t>(i) * k;
  for (int p = 0; p < k; ++p) {
    const double av = ai[p];
    const double* bp = b + static_cast<std::size_t>(p) * n;
    for (int j = 0; j < n; ++j) yi[j] += av * bp[j];
  }
}

inline void mm_nt_row(const double* a, const double* b, double* y, int i, int k, int n) {
  double* yi = y + static_cast<std::size_t>(i) * n;
  const double* ai = a + static_cast<std::size_t>(i) * k;
  for (int j = 0; j < n; ++j) {
    const double* bj = b + static_cast<std::size_t>(j) * k;
    double acc = 0.0;
    for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
    yi[j] = acc;
  }
}

inline void mm_tn_row(const double* a, const double* b, double* y, int i, int k, int m, int n) {
  double* yi = y + static_cast<std::size_t>(i) * n;
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int p = 0; p < k; ++p)
      acc += a[static_cast<std::size_t>(p) * m + i] * b[static_cast<std::size_t>(p) * n + j];
    yi[j] = acc;
  }
}

inline void softmax_row(const double* x, double* y, int i, int cols) {
  const double* xi = x + static_cast<std::size_t>(i) * cols;
  double* yi = y + static_cast<std::size_t>(i) * cols;
  double mx = xi[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
  double sum = 0.0;
  for (int j = 0; j < cols; ++j) {
    yi[j] = std::exp(xi[j] - mx);
    sum += yi[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < cols; ++j) yi[j] *= inv;
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

void matmul_nn_ref(const double* a, const double* b, double* y, int m, int k, int n) {
  for (int i = 0; i < m; ++i) mm_nn_row(a, b, y, i, k, n);
}

void matmul_nn_omp(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_nn_row(a, b, y, i, k, n);
}

void matmul_nn(const double* a, const double* b, double* y, int m, int k, int n) {
  if (use_parallel(static_cast<long>(m) * n * k))
    matmul_nn_omp(a, b, y, m, k, n);
  else
    matmul_nn_ref(a, b, y, m, k, n);
}

void matmul_nt_ref(const double* a, const double* b, double* y, int m, int k, int n) {
  for (int i = 0; i < m; ++i) mm_nt_row(a, b, y, i, k, n);
}

void matmul_nt_omp(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_nt_row(a, b, y, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n) {
  if (use_parallel(static_cast<long>(m) * n * k))
    matmul_nt_omp(a, b, y, m, k, n);
  else
    matmul_nt_ref(a, b, y, m, k, n);
}

void matmul_tn_ref(const double* a, const double* b, double* y, int m, int k, int n) {
  for (int i = 0; i < m; ++i) mm_tn_row(a, b, y, i, k, m, n);
}

void matmul_tn_omp(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_tn_row(a, b, y, i, k, m, n);
}

void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n) {
  if (use_parallel(static_cast<long>(m) * n * k))
    matmul_tn_omp(a, b, y, m, k, n);
  else
    matmul_tn_ref(a, b, y, m, k, n);
}

void softmax_rows_ref(const double* x, double* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) softmax_row(x, y, i, cols);
}

void softmax_rows_omp(const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) softmax_row(x, y, i, cols);
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
  if (use_parallel(static_cast<long>(rows) * cols) && rows > 1)
    softmax_rows_omp(x, y, rows, cols);
  else
    softmax_rows_ref(x, y, rows, cols);
}

}  // namespace stk::kernels
