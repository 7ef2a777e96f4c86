#pragma once

// Exponential holding time -log(U)/R with one division, written once for
// scalars and for GCC vector types so both round identically.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace vrjp::detail {

typedef double vd8 __attribute__((vector_size(64)));
typedef std::uint64_t vu8 __attribute__((vector_size(64)));
typedef std::int64_t vi8 __attribute__((vector_size(64)));

template <class To, class From>
inline To bit_cast_lane(const From& x) {
  static_assert(sizeof(To) == sizeof(From));
  To y;
  std::memcpy(&y, &x, sizeof y);
  return y;
}

template <class T>
struct LaneTypes;
template <>
struct LaneTypes<double> {
  using U = std::uint64_t;
  using I = std::int64_t;
  static double to_double(I x) { return static_cast<double>(x); }
  static I lzcnt(U x) { return std::countl_zero(x); }
  static U shl(U x, U n) { return n < 64 ? x << n : 0; }
  static I mask(bool c) { return -static_cast<I>(c); }
};
template <>
struct LaneTypes<vd8> {
  using U = vu8;
  using I = vi8;
  static vd8 to_double(I x) { return __builtin_convertvector(x, vd8); }
  static I lzcnt(U x) {
#if defined(__AVX512CD__)
    __m512i v;
    std::memcpy(&v, &x, sizeof v);
    return bit_cast_lane<I>(_mm512_lzcnt_epi64(v));
#else
    I r;
    for (int i = 0; i < 8; ++i) r[i] = std::countl_zero(x[i]);
    return r;
#endif
  }
  static I mask(I c) { return c; }
  static U shl(U x, U n) {
#if defined(__AVX512F__)
    __m512i a, b;
    std::memcpy(&a, &x, sizeof a);
    std::memcpy(&b, &n, sizeof b);
    return bit_cast_lane<U>(_mm512_sllv_epi64(a, b));
#else
    U r;
    for (int i = 0; i < 8; ++i) r[i] = n[i] < 64 ? x[i] << n[i] : 0;
    return r;
#endif
  }
};

// 1/x from the 14-bit hardware estimate and two Newton steps, about 1 ulp.
// Both overloads use the same instructions, so they agree bit for bit.
inline double reciprocal(double x) {
#if defined(__AVX512F__)
  const double r0 = _mm_cvtsd_f64(_mm_rcp14_sd(_mm_setzero_pd(), _mm_set_sd(x)));
  const double r1 = std::fma(r0, std::fma(-x, r0, 1.0), r0);
  return std::fma(r1, std::fma(-x, r1, 1.0), r1);
#else
  return 1.0 / x;
#endif
}

inline vd8 reciprocal(vd8 x) {
#if defined(__AVX512F__)
  __m512d v;
  std::memcpy(&v, &x, sizeof v);
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d r0 = _mm512_rcp14_pd(v);
  const __m512d r1 = _mm512_fmadd_pd(r0, _mm512_fnmadd_pd(v, r0, one), r0);
  const __m512d r2 = _mm512_fmadd_pd(r1, _mm512_fnmadd_pd(v, r1, one), r1);
  vd8 y;
  std::memcpy(&y, &r2, sizeof y);
  return y;
#else
  return 1.0 / x;
#endif
}

// Explicit fused multiply-add; contraction is disabled globally, so this is
// the only place products and sums fuse, identically in both overloads.
inline double fmadd(double a, double b, double c) { return std::fma(a, b, c); }

inline vd8 fmadd(vd8 a, vd8 b, vd8 c) {
#if defined(__AVX512F__)
  __m512d x, y, z;
  std::memcpy(&x, &a, sizeof x);
  std::memcpy(&y, &b, sizeof y);
  std::memcpy(&z, &c, sizeof z);
  const __m512d r = _mm512_fmadd_pd(x, y, z);
  vd8 out;
  std::memcpy(&out, &r, sizeof out);
  return out;
#else
  vd8 out;
  for (int i = 0; i < 8; ++i) out[i] = std::fma(a[i], b[i], c[i]);
  return out;
#endif
}

// Returns -log(u) / rate for u = 2^-(z+1) * (1.m), where z is the number of
// leading zeros of bits and m the next 52 bits (zero-filled when fewer remain).
template <class T>
inline T holding_time(typename LaneTypes<T>::U bits, T rate) {
  using U = typename LaneTypes<T>::U;
  using I = typename LaneTypes<T>::I;
  const I lz = LaneTypes<T>::lzcnt(bits);
  U mb = (LaneTypes<T>::shl(bits, (U)(lz + 1)) >> 12) | 0x3ff0000000000000ull;
  // u = 2^k * m with m in [sqrt(2)/2, sqrt(2))
  const I hi = LaneTypes<T>::mask(mb >= 0x3ff6a09e667f3bcdull);  // 0 or -1
  const I k = ~lz - hi;
  mb -= (U)hi & 0x0010000000000000ull;
  T f = bit_cast_lane<T>(mb) - 1.0;
  T den = 2.0 + f;
  T q = reciprocal(den * rate);
  T s = f * (rate * q);  // f / (2 + f)
  T hfsq = 0.5 * f * f;
  T z = s * s;
  T w = z * z;
  T t1 = w * fmadd(w, fmadd(w, T{} + 1.531383769920937332e-01,
                            T{} + 2.222219843214978396e-01),
                   T{} + 3.999999999940941908e-01);
  T t2 = z * fmadd(w, fmadd(w, fmadd(w, T{} + 1.479819860511658591e-01,
                                     T{} + 1.818357216161805012e-01),
                            T{} + 2.857142874366239149e-01),
                   T{} + 6.666666666666735130e-01);
  T r = t2 + t1;
  T dk = LaneTypes<T>::to_double(k);
  T lg = fmadd(dk, T{} + 6.93147180369123816490e-01,
               -((hfsq - fmadd(s, hfsq + r, dk * 1.90821492927058770002e-10)) - f));
  return -lg * (den * q);  // (2 + f) * q == 1 / rate
}

}  // namespace vrjp::detail
