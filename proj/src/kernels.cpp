#include "g2t/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace g2t::kernels {

namespace {
constexpr std::size_t kParallelThreshold = 64 * 64;

inline void matmul_row(const double* a, const double* b, double* c,
                       std::size_t i, std::size_t k, std::size_t m) {
  double* ci = c + i * m;
  std::fill(ci, ci + m, 0.0);
  const double* ai = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = ai[p];
    const double* bp = b + p * m;
    for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
  }
}

inline void matmul_at_row(const double* a, const double* b, double* c,
                          std::size_t i, std::size_t n, std::size_t k,
                          std::size_t m) {
  // A stored [k x n]; row i of A^T is column i of A.
  double* ci = c + i * m;
  std::fill(ci, ci + m, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * n + i];
    const double* bp = b + p * m;
    for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
  }
}

inline void matmul_bt_row(const double* a, const double* b, double* c,
                          std::size_t i, std::size_t k, std::size_t m) {
  const double* ai = a + i * k;
  double* ci = c + i * m;
  for (std::size_t j = 0; j < m; ++j) {
    const double* bj = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] = acc;
  }
}

inline void softmax_row(double* x, std::size_t cols) {
  double mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    x[j] = std::exp(x[j] - mx);
    sum += x[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) x[j] *= inv;
}
}  // namespace

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) matmul_row(a, b, c, i, k, m);
}

void matmul_omp(const double* a, const double* b, double* c,
                std::size_t n, std::size_t k, std::size_t m) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    matmul_row(a, b, c, static_cast<std::size_t>(i), k, m);
}

void matmul_at_serial(const double* a, const double* b, double* c,
                      std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) matmul_at_row(a, b, c, i, n, k, m);
}

void matmul_at_omp(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    matmul_at_row(a, b, c, static_cast<std::size_t>(i), n, k, m);
}

void matmul_bt_serial(const double* a, const double* b, double* c,
                      std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) matmul_bt_row(a, b, c, i, k, m);
}

void matmul_bt_omp(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    matmul_bt_row(a, b, c, static_cast<std::size_t>(i), k, m);
}

void softmax_rows_serial(double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) softmax_row(x + i * cols, cols);
}

void softmax_rows_omp(double* x, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(rows); ++i)
    softmax_row(x + static_cast<std::size_t>(i) * cols, cols);
}

void matmul(const double* a, const double* b, double* c,
            std::size_t n, std::size_t k, std::size_t m) {
  if (n * m >= kParallelThreshold)
    matmul_omp(a, b, c, n, k, m);
  else
    matmul_serial(a, b, c, n, k, m);
}

void matmul_at(const double* a, const double* b, double* c,
               std::size_t n, std::size_t k, std::size_t m) {
  if (n * m >= kParallelThreshold)
    matmul_at_omp(a, b, c, n, k, m);
  else
    matmul_at_serial(a, b, c, n, k, m);
}

void matmul_bt(const double* a, const double* b, double* c,
               std::size_t n, std::size_t k, std::size_t m) {
  if (n * m >= kParallelThreshold)
    matmul_bt_omp(a, b, c, n, k, m);
  else
    matmul_bt_serial(a, b, c, n, k, m);
}

}  // namespace g2t::kernels
