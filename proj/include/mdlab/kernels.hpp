#pragma once

#include <cstddef>

// Dense double-precision kernels behind the model's forward/backward passes.
// Every kernel exists twice: a serial reference in kernels::ref and an
// OpenMP version in kernels::omp that parallelizes over output rows. Both
// share the same per-row routines, so each output element is accumulated in
// the same order and the two paths are bit-identical for any thread count.
// The top-level functions dispatch to the OpenMP path.
//
// Matrices are row-major. Shapes follow the usual convention:
//   gemm_nn: C[M,N] = A[M,K] * B[K,N]
//   gemm_nt: C[M,N] = A[M,K] * B[N,K]^T
//   gemm_tn: C[K,N] = A[M,K]^T * B[M,N]
// With accumulate=true the product is added onto C instead of overwriting.

namespace mdlab::kernels {

// Fixed-reassociation dot product (4 independent partial sums).
double dot(const double* a, const double* b, int n);

void gemm_nn_row(int N, int K, const double* a_row, const double* B, double* c_row, bool accumulate);
void gemm_nt_row(int N, int K, const double* a_row, const double* B, double* c_row, bool accumulate);
void gemm_tn_row(int M, int N, int K, int k, const double* A, const double* B, double* c_row,
                 bool accumulate);

namespace ref {
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);
}  // namespace ref

namespace omp {
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);
}  // namespace omp

void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate = false);

// 0 leaves the OpenMP default in place.
void set_threads(int n);
int thread_count();

}  // namespace mdlab::kernels
