#pragma once

#include <cstddef>

// Dense row-major kernels underlying the tensor library. Every kernel has a
// serial reference implementation (*_ref) and an OpenMP one (*_omp) that
// parallelizes over independent output rows/elements, so both produce
// bit-identical results. The unsuffixed entry points dispatch on the global
// parallel switch and the problem size.
namespace stk::kernels {

// y[m,n] = a[m,k] * b[k,n]
void matmul_nn_ref(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_nn_omp(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_nn(const double* a, const double* b, double* y, int m, int k, int n);

// y[m,n] = a[m,k] * b[n,k]^T
void matmul_nt_ref(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_nt_omp(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n);

// y[m,n] = a[k,m]^T * b[k,n]
void matmul_tn_ref(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_tn_omp(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n);

// Row-wise softmax with max subtraction.
void softmax_rows_ref(const double* x, double* y, int rows, int cols);
void softmax_rows_omp(const double* x, double* y, int rows, int cols);
void softmax_rows(const double* x, double* y, int rows, int cols);

bool parallel_enabled();
void set_parallel(bool on);

}  // namespace stk::kernels
