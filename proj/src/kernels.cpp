#include "mdlab/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mdlab::kernels {

double dot(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; k < n; ++k) {
        s += a[k] * b[k];
    }
    return s;
}

void gemm_nn_row(int N, int K, const double* a_row, const double* B, double* c_row, bool accumulate) {
    if (!accumulate) {
        std::fill(c_row, c_row + N, 0.0);
    }
    for (int k = 0; k < K; ++k) {
        const double av = a_row[k];
        const double* b = B + static_cast<size_t>(k) * N;
        for (int n = 0; n < N; ++n) {
            c_row[n] += av * b[n];
        }
    }
}

void gemm_nt_row(int N, int K, const double* a_row, const double* B, double* c_row, bool accumulate) {
    for (int n = 0; n < N; ++n) {
        const double s = dot(a_row, B + static_cast<size_t>(n) * K, K);
        c_row[n] = accumulate ? c_row[n] + s : s;
    }
}

void gemm_tn_row(int M, int N, int K, int k, const double* A, const double* B, double* c_row,
                 bool accumulate) {
    if (!accumulate) {
        std::fill(c_row, c_row + N, 0.0);
    }
    for (int m = 0; m < M; ++m) {
        const double av = A[static_cast<size_t>(m) * K + k];
        const double* b = B + static_cast<size_t>(m) * N;
        for (int n = 0; n < N; ++n) {
            c_row[n] += av * b[n];
        }
    }
}

namespace ref {

void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
    for (int m = 0; m < M; ++m) {
        gemm_nn_row(N, K, A + static_cast<size_t>(m) * K, B, C + static_cast<size_t>(m) * N, accumulate);
    }
}

void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
    for (int m = 0; m < M; ++m) {
        gemm_nt_row(N, K, A + static_cast<size_t>(m) * K, B, C + static_cast<size_t>(m) * N, accumulate);
    }
}

void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
    for (int k = 0; k < K; ++k) {
        gemm_tn_row(M, N, K, k, A, B, C + static_cast<size_t>(k) * N, accumulate);
    }
}

}  // namespace ref

namespace omp {

void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int m = 0; m < M; ++m) {
        gemm_nn_row(N, K, A + static_cast<size_t>(m) * K, B, C + static_cast<size_t>(m) * N, accumulate);
    }
}

void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int m = 0; m < M; ++m) {
        gemm_nt_row(N, K, A + static_cast<size_t>(m) * K, B, C + static_cast<size_t>(m) * N, accumulate);
    }
}

void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < K; ++k) {
        gemm_tn_row(M, N, K, k, A, B, C + static_cast<size_t>(k) * N, accumulate);
    }
}

}  // namespace omp

void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
    omp::gemm_nn(M, N, K, A, B, C, accumulate);
}

void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
    omp::gemm_nt(M, N, K, A, B, C, accumulate);
}

void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
    omp::gemm_tn(M, N, K, A, B, C, accumulate);
}

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) {
        omp_set_num_threads(n);
    }
#else
    (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace mdlab::kernels
