#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "g2t/kernels.hpp"

using namespace g2t;

namespace {

std::vector<double> rand_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("matmul matches a naive triple loop") {
  const std::size_t n = 3, k = 4, m = 2;
  auto a = rand_vec(n * k, 1), b = rand_vec(k * m, 2);
  std::vector<double> c(n * m), ref(n * m, 0.0);
  kernels::matmul(a.data(), b.data(), c.data(), n, k, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t l = 0; l < k; ++l)
        ref[i * m + j] += a[i * k + l] * b[l * m + j];
  for (std::size_t i = 0; i < n * m; ++i)
    CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("parallel kernels are bitwise identical to serial") {
  for (std::size_t n : {5, 17, 64, 100, 150}) {
    const std::size_t k = n + 3, m = n + 1;
    auto a = rand_vec(n * k, n), b = rand_vec(k * m, n + 1);
    std::vector<double> cs(n * m), cp(n * m);

    kernels::matmul_serial(a.data(), b.data(), cs.data(), n, k, m);
    kernels::matmul_omp(a.data(), b.data(), cp.data(), n, k, m);
    CHECK(bitwise_equal(cs, cp));

    auto at = rand_vec(k * n, n + 2);
    kernels::matmul_at_serial(at.data(), b.data(), cs.data(), n, k, m);
    kernels::matmul_at_omp(at.data(), b.data(), cp.data(), n, k, m);
    CHECK(bitwise_equal(cs, cp));

    auto bt = rand_vec(m * k, n + 3);
    kernels::matmul_bt_serial(a.data(), bt.data(), cs.data(), n, k, m);
    kernels::matmul_bt_omp(a.data(), bt.data(), cp.data(), n, k, m);
    CHECK(bitwise_equal(cs, cp));

    auto x = rand_vec(n * m, n + 4);
    auto y = x;
    kernels::softmax_rows_serial(x.data(), n, m);
    kernels::softmax_rows_omp(y.data(), n, m);
    CHECK(bitwise_equal(x, y));
  }
}

TEST_CASE("softmax rows sum to one") {
  const std::size_t rows = 7, cols = 9;
  auto x = rand_vec(rows * cols, 42);
  kernels::softmax_rows_serial(x.data(), rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      s += x[i * cols + j];
      CHECK(x[i * cols + j] >= 0.0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("dispatcher output matches serial above and below the threshold") {
  for (std::size_t n : {8, 96}) {
    auto a = rand_vec(n * n, n), b = rand_vec(n * n, n + 7);
    std::vector<double> cs(n * n), cd(n * n);
    kernels::matmul_serial(a.data(), b.data(), cs.data(), n, n, n);
    kernels::matmul(a.data(), b.data(), cd.data(), n, n, n);
    CHECK(bitwise_equal(cs, cd));
  }
}
