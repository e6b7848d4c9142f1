#include "core/blas.hpp"

#include <cblas.h>

extern "C" void openblas_set_num_threads(int);

namespace dynacl {

void blas_init() {
  static bool done = false;
  if (!done) {
    openblas_set_num_threads(1);
    done = true;
  }
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  blas_init();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

}  // namespace dynacl
