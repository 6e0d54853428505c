// AVX2/FMA variants of the kernel table. This translation unit is the only one
// compiled with -mavx2 -mfma; keep its includes minimal so no inline library
// code compiled for AVX2 can leak into the rest of the program.

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "oinn/simd/kernels.hpp"

namespace oinn::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

// Applies a 4-lane operation to the tail by staging it through padded buffers,
// so every element goes through the same arithmetic as the main loop.
template <class Op>
inline void unary_loop(const double* x, double* out, std::size_t n, Op op) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, op(_mm256_loadu_pd(x + i)));
  }
  if (i < n) {
    alignas(32) double in_buf[kLanes] = {0.0, 0.0, 0.0, 0.0};
    alignas(32) double out_buf[kLanes];
    for (std::size_t j = 0; i + j < n; ++j) in_buf[j] = x[i + j];
    _mm256_store_pd(out_buf, op(_mm256_load_pd(in_buf)));
    for (std::size_t j = 0; i + j < n; ++j) out[i + j] = out_buf[j];
  }
}

template <class Op>
inline void binary_loop(const double* a, const double* b, double* out, std::size_t n, Op op) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, op(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  if (i < n) {
    alignas(32) double a_buf[kLanes] = {0.0, 0.0, 0.0, 0.0};
    alignas(32) double b_buf[kLanes] = {0.0, 0.0, 0.0, 0.0};
    alignas(32) double out_buf[kLanes];
    for (std::size_t j = 0; i + j < n; ++j) {
      a_buf[j] = a[i + j];
      b_buf[j] = b[i + j];
    }
    _mm256_store_pd(out_buf, op(_mm256_load_pd(a_buf), _mm256_load_pd(b_buf)));
    for (std::size_t j = 0; i + j < n; ++j) out[i + j] = out_buf[j];
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  binary_loop(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_add_pd(x, y); });
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  binary_loop(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_sub_pd(x, y); });
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  binary_loop(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_mul_pd(x, y); });
}

void scale(double s, const double* x, double* out, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vs, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = s * x[i];
}

// No FMA here: results must match the scalar reference bit for bit.
void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void mul_acc(const double* a, const double* b, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), prod));
  }
  for (; i < n; ++i) acc[i] += a[i] * b[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + kLanes), _mm256_loadu_pd(b + i + kLanes),
                           acc1);
  }
  for (; i + kLanes <= n; i += kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc0);
  const __m128d hi = _mm256_extractf128_pd(acc0, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// exp/expm1 core: x = k ln2 + r with |r| <= ln2/2, expm1(r) by a degree-13
// Taylor polynomial (truncation below 1e-17 on that interval).
constexpr double kLog2e = 1.4426950408889634;
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;
constexpr double kShifter = 6755399441055744.0;  // 2^52 + 2^51

struct Reduced {
  __m256d k;     // integral, as double
  __m256d em1;   // expm1(r)
  __m256d pow2;  // 2^k
};

inline Reduced reduce(__m256d x) {
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2e)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, _mm256_set1_pd(kLn2Hi), x);
  r = _mm256_fnmadd_pd(k, _mm256_set1_pd(kLn2Lo), r);

  static constexpr double c[] = {
      1.0 / 6227020800.0,  // 1/13!
      1.0 / 479001600.0,   1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
      1.0 / 40320.0,       1.0 / 5040.0,     1.0 / 720.0,     1.0 / 120.0,
      1.0 / 24.0,          1.0 / 6.0,        1.0 / 2.0,
  };
  __m256d p = _mm256_set1_pd(c[0]);
  for (std::size_t i = 1; i < sizeof(c) / sizeof(c[0]); ++i) {
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[i]));
  }
  const __m256d em1 = _mm256_fmadd_pd(_mm256_mul_pd(r, r), p, r);

  const __m256i bits = _mm256_castpd_si256(_mm256_add_pd(k, _mm256_set1_pd(kShifter)));
  const __m256i biased = _mm256_add_epi64(bits, _mm256_set1_epi64x(1023));
  const __m256d pow2 = _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
  return {k, em1, pow2};
}

inline bool any_outside(__m256d x, double lo, double hi) {
  // Ordered compares are false for NaN, so NaN lanes count as outside.
  const __m256d inside = _mm256_and_pd(_mm256_cmp_pd(x, _mm256_set1_pd(lo), _CMP_GE_OQ),
                                       _mm256_cmp_pd(x, _mm256_set1_pd(hi), _CMP_LE_OQ));
  return _mm256_movemask_pd(inside) != 0xF;
}

inline __m256d exp4(__m256d x) {
  if (any_outside(x, -708.0, 709.0)) {
    alignas(32) double buf[kLanes];
    _mm256_store_pd(buf, x);
    for (double& v : buf) v = std::exp(v);
    return _mm256_load_pd(buf);
  }
  const Reduced red = reduce(x);
  return _mm256_mul_pd(_mm256_add_pd(_mm256_set1_pd(1.0), red.em1), red.pow2);
}

inline __m256d tanh4(__m256d x) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  if (any_outside(x, -1e300, 1e300)) {
    alignas(32) double buf[kLanes];
    _mm256_store_pd(buf, x);
    for (double& v : buf) v = std::tanh(v);
    return _mm256_load_pd(buf);
  }
  const __m256d ax = _mm256_andnot_pd(sign_mask, x);
  // tanh(|x|) = -e / (2 + e) with e = expm1(-2|x|); beyond |x| = 20 it is 1.
  const __m256d y = _mm256_max_pd(_mm256_mul_pd(_mm256_set1_pd(-2.0), ax),
                                  _mm256_set1_pd(-40.0));
  const Reduced red = reduce(y);
  // 2^k expm1(r) + (2^k - 1); exact reduction to expm1(r) when k == 0.
  const __m256d e = _mm256_fmadd_pd(red.pow2, red.em1,
                                    _mm256_sub_pd(red.pow2, _mm256_set1_pd(1.0)));
  const __m256d t = _mm256_div_pd(_mm256_sub_pd(_mm256_setzero_pd(), e),
                                  _mm256_add_pd(_mm256_set1_pd(2.0), e));
  return _mm256_or_pd(t, _mm256_and_pd(sign_mask, x));
}

void exp_k(const double* x, double* out, std::size_t n) { unary_loop(x, out, n, exp4); }

void tanh_k(const double* x, double* out, std::size_t n) { unary_loop(x, out, n, tanh4); }

void relu(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  unary_loop(x, out, n, [zero](__m256d v) {
    return _mm256_and_pd(v, _mm256_cmp_pd(v, zero, _CMP_GT_OQ));
  });
}

void abs_k(const double* x, double* out, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  unary_loop(x, out, n, [sign_mask](__m256d v) { return _mm256_andnot_pd(sign_mask, v); });
}

void sign(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  unary_loop(x, out, n, [zero, one](__m256d v) {
    const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(v, zero, _CMP_GT_OQ), one);
    const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(v, zero, _CMP_LT_OQ), one);
    return _mm256_sub_pd(pos, neg);
  });
}

void clamp(const double* x, const double* lo, const double* hi, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d l = _mm256_loadu_pd(lo + i);
    const __m256d h = _mm256_loadu_pd(hi + i);
    __m256d r = _mm256_blendv_pd(v, h, _mm256_cmp_pd(v, h, _CMP_GT_OQ));
    r = _mm256_blendv_pd(r, l, _mm256_cmp_pd(v, l, _CMP_LT_OQ));
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i) out[i] = x[i] < lo[i] ? lo[i] : (x[i] > hi[i] ? hi[i] : x[i]);
}

void adam(double* param, const double* grad, double* m, double* v, std::size_t n,
          const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias1);
  const __m256d bc2 = _mm256_set1_pd(c.bias2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(omb1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat),
                                       _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * (g * g);
    const double m_hat = m[i] / c.bias1;
    const double v_hat = v[i] / c.bias2;
    param[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels table{Backend::avx2, add,    sub,   mul,    scale, axpy,
                             mul_acc,       dot,    exp_k, tanh_k, relu,  abs_k,
                             sign,          clamp,  adam};
  return table;
}

}  // namespace oinn::simd::detail
