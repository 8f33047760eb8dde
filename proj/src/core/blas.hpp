#pragma once

namespace mlfg::blas {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
// Backed by OpenBLAS when available (loaded at runtime), otherwise a
// built-in blocked kernel. Always runs single-threaded inside the call so
// results are independent of machine load; callers parallelize across
// batch samples instead.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

// Human-readable backend description, e.g. "openblas(SkylakeX)" or "builtin".
const char* backend();

}  // namespace mlfg::blas
