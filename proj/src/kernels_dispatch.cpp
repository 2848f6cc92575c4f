#include "copycat/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "copycat/common.hpp"
#include "kernel_table.hpp"

namespace copycat::kernels {

namespace {

const KernelTable kScalarTable = {
    scalar::dot<float>,          scalar::axpy<float>,         scalar::gemm_nn<float>,
    scalar::gemm_tn<float>,      scalar::gemm_nt<float>,      scalar::relu_forward<float>,
    scalar::relu_backward<float>, scalar::sgd_update<float>,
};

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
#if defined(__x86_64__) || defined(__i386__)
    case Isa::kAvx2:
      return avx2_available();
#endif
#if defined(__aarch64__)
    case Isa::kNeon:
      return true;
#endif
    default:
      return false;
  }
}

Isa detect() {
  if (const char* env = std::getenv("COPYCAT_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::kScalar;
    if (std::strcmp(env, "avx2") == 0 && isa_available(Isa::kAvx2)) return Isa::kAvx2;
    if (std::strcmp(env, "neon") == 0 && isa_available(Isa::kNeon)) return Isa::kNeon;
  }
#if defined(__x86_64__) || defined(__i386__)
  if (avx2_available()) return Isa::kAvx2;
#endif
#if defined(__aarch64__)
  return Isa::kNeon;
#endif
  return Isa::kScalar;
}

const KernelTable& table_for(Isa isa) {
  switch (isa) {
#if defined(__x86_64__) || defined(__i386__)
    case Isa::kAvx2:
      return avx2_table();
#endif
#if defined(__aarch64__)
    case Isa::kNeon:
      return neon_table();
#endif
    default:
      return kScalarTable;
  }
}

std::atomic<Isa> g_isa{detect()};
std::atomic<const KernelTable*> g_table{&table_for(g_isa.load())};

}  // namespace

Isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

void force_isa(Isa isa) {
  if (!isa_available(isa))
    throw ValidationError(std::string("kernel ISA not available on this CPU: ") + isa_name(isa));
  g_isa.store(isa, std::memory_order_relaxed);
  g_table.store(&table_for(isa), std::memory_order_relaxed);
}

void reset_isa() { force_isa(detect()); }

#define COPYCAT_TABLE (*g_table.load(std::memory_order_relaxed))

float dot(const float* a, const float* b, size_t n) { return COPYCAT_TABLE.dot(a, b, n); }
void axpy(float alpha, const float* x, float* y, size_t n) { COPYCAT_TABLE.axpy(alpha, x, y, n); }
void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
  COPYCAT_TABLE.gemm_nn(a, b, c, m, k, n, accumulate);
}
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
  COPYCAT_TABLE.gemm_tn(a, b, c, m, k, n, accumulate);
}
void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
  COPYCAT_TABLE.gemm_nt(a, b, c, m, k, n, accumulate);
}
void relu_forward(const float* x, float* y, size_t n) { COPYCAT_TABLE.relu_forward(x, y, n); }
void relu_backward(const float* x, const float* dy, float* dx, size_t n) {
  COPYCAT_TABLE.relu_backward(x, dy, dx, n);
}
void sgd_update(float* w, float* velocity, const float* grad, size_t n, float lr, float momentum,
                float weight_decay) {
  COPYCAT_TABLE.sgd_update(w, velocity, grad, n, lr, momentum, weight_decay);
}

#undef COPYCAT_TABLE

}  // namespace copycat::kernels
