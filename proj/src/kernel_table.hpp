// Internal: per-ISA function table shared by the dispatcher and the ISA TUs.
#pragma once

#include <cstddef>

namespace copycat::kernels {

struct KernelTable {
  float (*dot)(const float*, const float*, size_t);
  void (*axpy)(float, const float*, float*, size_t);
  void (*gemm_nn)(const float*, const float*, float*, int, int, int, bool);
  void (*gemm_tn)(const float*, const float*, float*, int, int, int, bool);
  void (*gemm_nt)(const float*, const float*, float*, int, int, int, bool);
  void (*relu_forward)(const float*, float*, size_t);
  void (*relu_backward)(const float*, const float*, float*, size_t);
  void (*sgd_update)(float*, float*, const float*, size_t, float, float, float);
};

#if defined(__x86_64__) || defined(__i386__)
bool avx2_available();
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

}  // namespace copycat::kernels
