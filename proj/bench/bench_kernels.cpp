// Compares the serial reference kernels against the OpenMP ones and checks
// that both produce identical bits.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "stk/kernels.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void bench_matmul(int m, int k, int n) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> a(static_cast<std::size_t>(m) * k), b(static_cast<std::size_t>(k) * n);
  for (auto& v : a) v = dist(rng);
  for (auto& v : b) v = dist(rng);
  std::vector<double> y_ref(static_cast<std::size_t>(m) * n), y_omp(y_ref.size());

  const int reps = std::max(1, static_cast<int>(2e8 / (2.0 * m * k * n)));
  const double ts = time_of([&] { stk::kernels::matmul_nn_ref(a.data(), b.data(), y_ref.data(), m, k, n); }, reps);
  const double tp = time_of([&] { stk::kernels::matmul_nn_omp(a.data(), b.data(), y_omp.data(), m, k, n); }, reps);
  bool identical = true;
  for (std::size_t i = 0; i < y_ref.size(); ++i) identical = identical && y_ref[i] == y_omp[i];
  const double flops = 2.0 * m * k * n;
  std::printf("matmul %4dx%4dx%4d  serial %8.3f ms (%6.2f GF/s)  omp %8.3f ms (%6.2f GF/s)  speedup %.2fx  bitwise %s\n",
              m, k, n, ts * 1e3, flops / ts * 1e-9, tp * 1e3, flops / tp * 1e-9, ts / tp,
              identical ? "equal" : "DIFFER");
}

void bench_softmax(int rows, int cols) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  std::vector<double> x(static_cast<std::size_t>(rows) * cols), y_ref(x.size()), y_omp(x.size());
  for (auto& v : x) v = dist(rng);
  const int reps = 50;
  const double ts = time_of([&] { stk::kernels::softmax_rows_ref(x.data(), y_ref.data(), rows, cols); }, reps);
  const double tp = time_of([&] { stk::kernels::softmax_rows_omp(x.data(), y_omp.data(), rows, cols); }, reps);
  bool identical = true;
  for (std::size_t i = 0; i < x.size(); ++i) identical = identical && y_ref[i] == y_omp[i];
  std::printf("softmax %5dx%4d        serial %8.3f ms              omp %8.3f ms              speedup %.2fx  bitwise %s\n",
              rows, cols, ts * 1e3, tp * 1e3, ts / tp, identical ? "equal" : "DIFFER");
}

}  // namespace

int main() {
  for (int s : {64, 128, 256, 512}) bench_matmul(s, s, s);
  bench_matmul(128, 64, 64);
  bench_matmul(2048, 64, 128);
  bench_softmax(4096, 128);
  bench_softmax(256, 4096);
  return 0;
}
