#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "g2t/kernels.hpp"

namespace {

using Clock = std::chrono::steady_clock;

std::vector<double> random_matrix(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

template <class F>
double time_ms(F&& f, int reps) {
  f();  // warm up
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) f();
  auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
  std::mt19937_64 rng(7);
  printf("%-14s %8s %12s %12s %8s\n", "kernel", "size", "serial_ms",
         "parallel_ms", "speedup");
  for (std::size_t n : {64, 128, 256, 512}) {
    auto a = random_matrix(n * n, rng);
    auto b = random_matrix(n * n, rng);
    std::vector<double> c(n * n);
    const int reps = n <= 128 ? 50 : 10;

    double s = time_ms(
        [&] { g2t::kernels::matmul_serial(a.data(), b.data(), c.data(), n, n, n); },
        reps);
    double p = time_ms(
        [&] { g2t::kernels::matmul_omp(a.data(), b.data(), c.data(), n, n, n); },
        reps);
    printf("%-14s %8zu %12.3f %12.3f %7.2fx\n", "matmul", n, s, p, s / p);

    s = time_ms(
        [&] { g2t::kernels::matmul_bt_serial(a.data(), b.data(), c.data(), n, n, n); },
        reps);
    p = time_ms(
        [&] { g2t::kernels::matmul_bt_omp(a.data(), b.data(), c.data(), n, n, n); },
        reps);
    printf("%-14s %8zu %12.3f %12.3f %7.2fx\n", "matmul_bt", n, s, p, s / p);

    auto x = random_matrix(n * n, rng);
    auto y = x;
    s = time_ms(
        [&] { y = x; g2t::kernels::softmax_rows_serial(y.data(), n, n); }, reps);
    p = time_ms(
        [&] { y = x; g2t::kernels::softmax_rows_omp(y.data(), n, n); }, reps);
    printf("%-14s %8zu %12.3f %12.3f %7.2fx\n", "softmax_rows", n, s, p, s / p);
  }
  return 0;
}
