#pragma once

#include <cblas.h>

namespace ipseg {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
// A is m x k after op, B is k x n after op, C is m x n.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc) {
  const CBLAS_TRANSPOSE ta = trans_a ? CblasTrans : CblasNoTrans;
  const CBLAS_TRANSPOSE tb = trans_b ? CblasTrans : CblasNoTrans;
  if constexpr (sizeof(T) == sizeof(float)) {
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, static_cast<float>(alpha),
                reinterpret_cast<const float*>(a), lda, reinterpret_cast<const float*>(b), ldb,
                static_cast<float>(beta), reinterpret_cast<float*>(c), ldc);
  } else {
    cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, static_cast<double>(alpha),
                reinterpret_cast<const double*>(a), lda, reinterpret_cast<const double*>(b), ldb,
                static_cast<double>(beta), reinterpret_cast<double*>(c), ldc);
  }
}

}  // namespace ipseg
