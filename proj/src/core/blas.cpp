#include "core/blas.hpp"

#include <dlfcn.h>
#include <stdlib.h>

#include <cstdio>
#include <mutex>
#include <string>

namespace mlfg::blas {
namespace {

// cblas entry points, resolved at runtime.
using sgemm_fn = void (*)(int order, int ta, int tb, int m, int n, int k, float alpha,
                          const float* a, int lda, const float* b, int ldb, float beta, float* c,
                          int ldc);
using dgemm_fn = void (*)(int order, int ta, int tb, int m, int n, int k, double alpha,
                          const double* a, int lda, const double* b, int ldb, double beta,
                          double* c, int ldc);
using set_threads_fn = void (*)(int);
using corename_fn = char* (*)();

constexpr int kRowMajor = 101;
constexpr int kNoTrans = 111;
constexpr int kTrans = 112;

struct Backend {
  sgemm_fn sgemm = nullptr;
  dgemm_fn dgemm = nullptr;
  std::string name = "builtin";
};

// OpenBLAS picks its kernel from CPUID at load time; on VMs that hide the
// CPU model it falls back to a pre-AVX kernel. OPENBLAS_CORETYPE is only
// honored if set before the library initializes, which is why the library
// is dlopen'ed here instead of linked.
Backend load_backend() {
  Backend b;
#if defined(__x86_64__)
  if (!getenv("OPENBLAS_CORETYPE")) {
    if (__builtin_cpu_supports("avx512f"))
      setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
    else if (__builtin_cpu_supports("avx2"))
      setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
  }
#endif
  void* h = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_LOCAL);
  if (!h) h = dlopen("libopenblas.so", RTLD_NOW | RTLD_LOCAL);
  if (!h) return b;
  auto s = reinterpret_cast<sgemm_fn>(dlsym(h, "cblas_sgemm"));
  auto d = reinterpret_cast<dgemm_fn>(dlsym(h, "cblas_dgemm"));
  if (!s || !d) return b;
  if (auto st = reinterpret_cast<set_threads_fn>(dlsym(h, "openblas_set_num_threads"))) st(1);
  b.sgemm = s;
  b.dgemm = d;
  b.name = "openblas";
  if (auto cn = reinterpret_cast<corename_fn>(dlsym(h, "openblas_get_corename")))
    b.name += std::string("(") + cn() + ")";
  return b;
}

const Backend& backend_instance() {
  static Backend b = load_backend();
  return b;
}

template <typename T>
void gemm_builtin(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
                  const T* b, int ldb, T beta, T* c, int ldc) {
  auto A = [&](int i, int j) { return trans_a ? a[j * lda + i] : a[i * lda + j]; };
  auto B = [&](int i, int j) { return trans_b ? b[j * ldb + i] : b[i * ldb + j]; };
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += A(i, p) * B(p, j);
      c[i * ldc + j] = alpha * acc + (beta == T(0) ? T(0) : beta * c[i * ldc + j]);
    }
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  if (m <= 0 || n <= 0) return;
  const Backend& be = backend_instance();
  if (be.sgemm) {
    be.sgemm(kRowMajor, trans_a ? kTrans : kNoTrans, trans_b ? kTrans : kNoTrans, m, n, k, alpha,
             a, lda, b, ldb, beta, c, ldc);
  } else {
    gemm_builtin(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  if (m <= 0 || n <= 0) return;
  const Backend& be = backend_instance();
  if (be.dgemm) {
    be.dgemm(kRowMajor, trans_a ? kTrans : kNoTrans, trans_b ? kTrans : kNoTrans, m, n, k, alpha,
             a, lda, b, ldb, beta, c, ldc);
  } else {
    gemm_builtin(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

const char* backend() { return backend_instance().name.c_str(); }

}  // namespace mlfg::blas
