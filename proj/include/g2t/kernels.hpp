#pragma once

#include <cstddef>

// Dense numeric kernels. Each kernel has a serial reference implementation
// and an OpenMP-parallel one; the parallel versions partition work by output
// row so results are bitwise identical to the serial versions.
namespace g2t::kernels {

// C[n x m] = A[n x k] * B[k x m]
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m);
void matmul_omp(const double* a, const double* b, double* c,
                std::size_t n, std::size_t k, std::size_t m);

// C[n x m] = A^T[n x k] * B[k x m], with A stored as [k x n]
void matmul_at_serial(const double* a, const double* b, double* c,
                      std::size_t n, std::size_t k, std::size_t m);
void matmul_at_omp(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m);

// C[n x m] = A[n x k] * B^T[m x k]
void matmul_bt_serial(const double* a, const double* b, double* c,
                      std::size_t n, std::size_t k, std::size_t m);
void matmul_bt_omp(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m);

// Row-wise softmax in place, subtracting the row max first.
void softmax_rows_serial(double* x, std::size_t rows, std::size_t cols);
void softmax_rows_omp(double* x, std::size_t rows, std::size_t cols);

// Dispatchers used by the tensor layer: parallel above a size threshold.
void matmul(const double* a, const double* b, double* c,
            std::size_t n, std::size_t k, std::size_t m);
void matmul_at(const double* a, const double* b, double* c,
               std::size_t n, std::size_t k, std::size_t m);
void matmul_bt(const double* a, const double* b, double* c,
               std::size_t n, std::size_t k, std::size_t m);

}  // namespace g2t::kernels
