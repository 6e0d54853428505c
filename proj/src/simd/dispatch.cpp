#include <atomic>
#include <cstdlib>
#include <string>

#include "oinn/errors.hpp"
#include "oinn/simd/kernels.hpp"

namespace oinn::simd {
namespace {

const Kernels* detect() {
  if (const char* env = std::getenv("OINN_SIMD"); env != nullptr && *env != '\0') {
    return &kernels_for(parse_backend(env));
  }
  return avx2_available() ? &kernels_for(Backend::avx2) : &scalar_kernels();
}

std::atomic<const Kernels*>& active() {
  static std::atomic<const Kernels*> table{detect()};
  return table;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels& kernels_for(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return scalar_kernels();
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (avx2_available()) return detail::avx2_kernels();
#endif
      throw UsageError("AVX2 kernels are not available on this machine");
  }
  throw UsageError("unknown SIMD backend");
}

const Kernels& kernels() { return *active().load(std::memory_order_relaxed); }

Backend active_backend() { return kernels().backend; }

void set_active_backend(Backend backend) {
  active().store(&kernels_for(backend), std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  throw UsageError("unknown SIMD backend '" + std::string(name) + "' (expected scalar|avx2)");
}

}  // namespace oinn::simd
