#pragma once

#include <cstddef>

namespace dynacl {

// Row-major double GEMM: C = alpha * op(A) * op(B) + beta * C.
// Backed by the system BLAS; pinned to a single BLAS thread so that the
// chunk-level OpenMP parallelism in the conv layers stays deterministic.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc);

// Must be called once before any gemm; disables BLAS-internal threading.
void blas_init();

}  // namespace dynacl
