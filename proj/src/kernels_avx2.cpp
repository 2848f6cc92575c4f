// AVX2+FMA variants of the float kernels. Compiled with per-function target
// attributes so the translation unit stays buildable on generic x86 baselines;
// the dispatcher only routes here after __builtin_cpu_supports says yes.
#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cstddef>

#include "copycat/kernels.hpp"
#include "kernel_table.hpp"

namespace copycat::kernels {

namespace {

__attribute__((target("avx2,fma"))) float dot_avx2(const float* a, const float* b, size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  acc0 = _mm256_add_ps(acc0, acc1);
  __m128 lo = _mm256_castps256_ps128(acc0);
  __m128 hi = _mm256_extractf128_ps(acc0, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_hadd_ps(lo, lo);
  lo = _mm_hadd_ps(lo, lo);
  float sum = _mm_cvtss_f32(lo);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

__attribute__((target("avx2,fma"))) void axpy_avx2(float alpha, const float* x, float* y,
                                                   size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

__attribute__((target("avx2,fma"))) void gemm_nn_avx2(const float* a, const float* b, float* c,
                                                      int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float alpha = arow[p];
      if (alpha == 0.0f) continue;
      axpy_avx2(alpha, b + static_cast<size_t>(p) * n, crow, static_cast<size_t>(n));
    }
  }
}

__attribute__((target("avx2,fma"))) void gemm_tn_avx2(const float* a, const float* b, float* c,
                                                      int m, int k, int n, bool accumulate) {
  if (!accumulate)
    for (size_t idx = 0; idx < static_cast<size_t>(m) * n; ++idx) c[idx] = 0.0f;
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<size_t>(p) * m;
    const float* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const float alpha = arow[i];
      if (alpha == 0.0f) continue;
      axpy_avx2(alpha, brow, c + static_cast<size_t>(i) * n, static_cast<size_t>(n));
    }
  }
}

__attribute__((target("avx2,fma"))) void gemm_nt_avx2(const float* a, const float* b, float* c,
                                                      int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float v = dot_avx2(arow, b + static_cast<size_t>(j) * k, static_cast<size_t>(k));
      crow[j] = accumulate ? crow[j] + v : v;
    }
  }
}

__attribute__((target("avx2,fma"))) void relu_forward_avx2(const float* x, float* y, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

__attribute__((target("avx2,fma"))) void relu_backward_avx2(const float* x, const float* dy,
                                                            float* dx, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

__attribute__((target("avx2,fma"))) void sgd_update_avx2(float* w, float* velocity,
                                                         const float* grad, size_t n, float lr,
                                                         float momentum, float weight_decay) {
  const __m256 vmom = _mm256_set1_ps(momentum);
  const __m256 vwd = _mm256_set1_ps(weight_decay);
  const __m256 vlr = _mm256_set1_ps(lr);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vw = _mm256_loadu_ps(w + i);
    const __m256 vg = _mm256_fmadd_ps(vwd, vw, _mm256_loadu_ps(grad + i));
    const __m256 vv = _mm256_fmadd_ps(vmom, _mm256_loadu_ps(velocity + i), vg);
    _mm256_storeu_ps(velocity + i, vv);
    _mm256_storeu_ps(w + i, _mm256_fnmadd_ps(vlr, vv, vw));
  }
  for (; i < n; ++i) {
    const float g = grad[i] + weight_decay * w[i];
    velocity[i] = momentum * velocity[i] + g;
    w[i] -= lr * velocity[i];
  }
}

const KernelTable kAvx2Table = {
    dot_avx2,          axpy_avx2,          gemm_nn_avx2, gemm_tn_avx2,
    gemm_nt_avx2,      relu_forward_avx2,  relu_backward_avx2, sgd_update_avx2,
};

}  // namespace

bool avx2_available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable& avx2_table() { return kAvx2Table; }

}  // namespace copycat::kernels

#endif  // x86
