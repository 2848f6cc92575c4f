#pragma once

#include <cstddef>
#include <string>

namespace copycat::kernels {

// Inner-loop arithmetic for the network engine. Every kernel has a scalar
// reference implementation (templated, used directly for double) and may have
// AVX2/NEON variants for float, selected once at startup by CPU detection.
// The active ISA can be forced for equivalence testing and for strict
// cross-machine reproducibility runs.

enum class Isa { kScalar, kAvx2, kNeon };

Isa active_isa();
const char* isa_name(Isa isa);
// kScalar is always accepted; forcing an unavailable ISA throws.
void force_isa(Isa isa);
void reset_isa();  // back to auto-detection

// ---- scalar reference kernels -------------------------------------------

namespace scalar {

template <typename T>
T dot(const T* a, const T* b, size_t n) {
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C[m x n] (+)= A[m x k] * B[k x n], all row-major, dense.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* c_row = c + size_t(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) c_row[j] = T(0);
    for (int p = 0; p < k; ++p) {
      const T alpha = a[size_t(i) * k + p];
      if (alpha == T(0)) continue;
      const T* b_row = b + size_t(p) * n;
      for (int j = 0; j < n; ++j) c_row[j] += alpha * b_row[j];
    }
  }
}

// C[m x n] (+)= A^T * B where A is [k x m] row-major.
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* c_row = c + size_t(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) c_row[j] = T(0);
    for (int p = 0; p < k; ++p) {
      const T alpha = a[size_t(p) * m + i];
      if (alpha == T(0)) continue;
      const T* b_row = b + size_t(p) * n;
      for (int j = 0; j < n; ++j) c_row[j] += alpha * b_row[j];
    }
  }
}

// C[m x n] (+)= A * B^T where B is [n x k] row-major (row-dot-row).
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const T v = dot(a + size_t(i) * k, b + size_t(j) * k, size_t(k));
      T* cij = c + size_t(i) * n + j;
      *cij = accumulate ? *cij + v : v;
    }
}

template <typename T>
void relu_forward(const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// dx = dy where the forward input was positive, else 0.
template <typename T>
void relu_backward(const T* x, const T* dy, T* dx, size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
}

// Classic SGD with momentum and L2 weight decay:
//   v = momentum * v + grad + weight_decay * w;  w -= lr * v
template <typename T>
void sgd_update(T* w, T* velocity, const T* grad, size_t n, T lr, T momentum, T weight_decay) {
  for (size_t i = 0; i < n; ++i) {
    velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * w[i];
    w[i] -= lr * velocity[i];
  }
}

}  // namespace scalar

// ---- dispatched float entry points ---------------------------------------

float dot(const float* a, const float* b, size_t n);
void axpy(float alpha, const float* x, float* y, size_t n);
void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void relu_forward(const float* x, float* y, size_t n);
void relu_backward(const float* x, const float* dy, float* dx, size_t n);
void sgd_update(float* w, float* velocity, const float* grad, size_t n, float lr, float momentum,
                float weight_decay);

// Generic entry points so templated engine code compiles for any scalar type;
// float resolves to the dispatched kernels above, everything else to scalar.
template <typename T>
T dot(const T* a, const T* b, size_t n) {
  return scalar::dot(a, b, n);
}
template <typename T>
void axpy(T alpha, const T* x, T* y, size_t n) {
  scalar::axpy(alpha, x, y, n);
}
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  scalar::gemm_nn(a, b, c, m, k, n, accumulate);
}
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  scalar::gemm_tn(a, b, c, m, k, n, accumulate);
}
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  scalar::gemm_nt(a, b, c, m, k, n, accumulate);
}
template <typename T>
void relu_forward(const T* x, T* y, size_t n) {
  scalar::relu_forward(x, y, n);
}
template <typename T>
void relu_backward(const T* x, const T* dy, T* dx, size_t n) {
  scalar::relu_backward(x, dy, dx, n);
}
template <typename T>
void sgd_update(T* w, T* velocity, const T* grad, size_t n, T lr, T momentum, T weight_decay) {
  scalar::sgd_update(w, velocity, grad, n, lr, momentum, weight_decay);
}

}  // namespace copycat::kernels
