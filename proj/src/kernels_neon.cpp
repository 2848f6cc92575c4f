// NEON variants of the float kernels. NEON is baseline on aarch64, so no
// runtime feature probe is needed; the whole unit is compiled out elsewhere.
#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstddef>

#include "copycat/kernels.hpp"
#include "kernel_table.hpp"

namespace copycat::kernels {

namespace {

float dot_neon(const float* a, const float* b, size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
  float sum = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_neon(float alpha, const float* x, float* y, size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_neon(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float alpha = arow[p];
      if (alpha == 0.0f) continue;
      axpy_neon(alpha, b + static_cast<size_t>(p) * n, crow, static_cast<size_t>(n));
    }
  }
}

void gemm_tn_neon(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
  if (!accumulate)
    for (size_t idx = 0; idx < static_cast<size_t>(m) * n; ++idx) c[idx] = 0.0f;
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<size_t>(p) * m;
    const float* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const float alpha = arow[i];
      if (alpha == 0.0f) continue;
      axpy_neon(alpha, brow, c + static_cast<size_t>(i) * n, static_cast<size_t>(n));
    }
  }
}

void gemm_nt_neon(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float v = dot_neon(arow, b + static_cast<size_t>(j) * k, static_cast<size_t>(k));
      crow[j] = accumulate ? crow[j] + v : v;
    }
  }
}

void relu_forward_neon(const float* x, float* y, size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmaxq_f32(vld1q_f32(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_neon(const float* x, const float* dy, float* dx, size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const uint32x4_t mask = vcgtq_f32(vld1q_f32(x + i), zero);
    vst1q_f32(dx + i, vreinterpretq_f32_u32(
                          vandq_u32(vreinterpretq_u32_f32(vld1q_f32(dy + i)), mask)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void sgd_update_neon(float* w, float* velocity, const float* grad, size_t n, float lr,
                     float momentum, float weight_decay) {
  const float32x4_t vmom = vdupq_n_f32(momentum);
  const float32x4_t vwd = vdupq_n_f32(weight_decay);
  const float32x4_t vlr = vdupq_n_f32(lr);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t vw = vld1q_f32(w + i);
    const float32x4_t vg = vfmaq_f32(vld1q_f32(grad + i), vwd, vw);
    const float32x4_t vv = vfmaq_f32(vg, vmom, vld1q_f32(velocity + i));
    vst1q_f32(velocity + i, vv);
    vst1q_f32(w + i, vfmsq_f32(vw, vlr, vv));
  }
  for (; i < n; ++i) {
    const float g = grad[i] + weight_decay * w[i];
    velocity[i] = momentum * velocity[i] + g;
    w[i] -= lr * velocity[i];
  }
}

const KernelTable kNeonTable = {
    dot_neon,          axpy_neon,          gemm_nn_neon, gemm_tn_neon,
    gemm_nt_neon,      relu_forward_neon,  relu_backward_neon, sgd_update_neon,
};

}  // namespace

const KernelTable& neon_table() { return kNeonTable; }

}  // namespace copycat::kernels

#endif  // __aarch64__
