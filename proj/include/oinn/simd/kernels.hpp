#pragma once

// Data-parallel inner loops used by the expression evaluator and the
// optimizer. Every kernel has a portable scalar reference implementation and,
// on x86-64, an AVX2 variant. The active table is chosen once at startup from
// the CPU features (override with OINN_SIMD=scalar|avx2).
//
// Elementwise kernels built only from IEEE add/sub/mul/div/sqrt/compare are
// bit-identical across backends. Reductions (dot) and transcendental kernels
// (exp, tanh) agree to a few ulp; the equivalence tests pin the bounds.

#include <cstddef>
#include <string_view>

namespace oinn::simd {

enum class Backend { scalar, avx2 };

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^step
  double bias2;  // 1 - beta2^step
};

struct Kernels {
  Backend backend;
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(double s, const double* x, double* out, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // acc += a * b
  void (*mul_acc)(const double* a, const double* b, double* acc, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*exp)(const double* x, double* out, std::size_t n);
  void (*tanh)(const double* x, double* out, std::size_t n);
  void (*relu)(const double* x, double* out, std::size_t n);
  void (*abs)(const double* x, double* out, std::size_t n);
  // sign with sign(0) = 0 and sign(NaN) = 0
  void (*sign)(const double* x, double* out, std::size_t n);
  void (*clamp)(const double* x, const double* lo, const double* hi, double* out,
                std::size_t n);
  // In-place ADAM update of one parameter array and its moment buffers.
  void (*adam)(double* param, const double* grad, double* m, double* v, std::size_t n,
               const AdamCoeffs& c);
};

const Kernels& scalar_kernels();
bool avx2_available();
// Throws UsageError when the backend is not supported on this CPU/build.
const Kernels& kernels_for(Backend backend);

// The process-wide active table.
const Kernels& kernels();
Backend active_backend();
void set_active_backend(Backend backend);

std::string_view backend_name(Backend backend);
Backend parse_backend(std::string_view name);

namespace detail {
#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2_kernels();
#endif
}  // namespace detail

}  // namespace oinn::simd
