#pragma once

// Elementwise exp/log/sin/cos over contiguous arrays, prefix sums and max
// reductions. Uses glibc's libmvec SIMD variants and AVX-512 intrinsics when
// available and falls back to <cmath> otherwise. Results agree with the
// scalar functions to a few ulp; a given build is deterministic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

#if defined(DPBE_USE_LIBMVEC) && (defined(__AVX512F__) || defined(__AVX2__))
extern "C" {
#if defined(__AVX512F__)
__m512d _ZGVeN8v_exp(__m512d);
__m512d _ZGVeN8v_log(__m512d);
__m512d _ZGVeN8v_sin(__m512d);
__m512d _ZGVeN8v_cos(__m512d);
#else
__m256d _ZGVdN4v_exp(__m256d);
__m256d _ZGVdN4v_log(__m256d);
__m256d _ZGVdN4v_sin(__m256d);
__m256d _ZGVdN4v_cos(__m256d);
#endif
}
#define DPBE_HAVE_LIBMVEC 1
#endif

namespace dpbe::detail {

#if defined(DPBE_HAVE_LIBMVEC) && defined(__AVX512F__)
#define DPBE_VMATH_LOOP(fn512, fn256, scalar)                                              \
    std::size_t i = 0;                                                                     \
    for (; i + 8 <= x.size(); i += 8)                                                      \
        _mm512_storeu_pd(x.data() + i, fn512(_mm512_loadu_pd(x.data() + i)));              \
    for (; i < x.size(); ++i) x[i] = scalar(x[i]);
#elif defined(DPBE_HAVE_LIBMVEC)
#define DPBE_VMATH_LOOP(fn512, fn256, scalar)                                              \
    std::size_t i = 0;                                                                     \
    for (; i + 4 <= x.size(); i += 4)                                                      \
        _mm256_storeu_pd(x.data() + i, fn256(_mm256_loadu_pd(x.data() + i)));              \
    for (; i < x.size(); ++i) x[i] = scalar(x[i]);
#else
#define DPBE_VMATH_LOOP(fn512, fn256, scalar) \
    for (double& v : x) v = scalar(v);
#endif

inline double scalar_exp(double v) { return std::exp(v); }
inline double scalar_log(double v) { return std::log(v); }
inline double scalar_sin(double v) { return std::sin(v); }
inline double scalar_cos(double v) { return std::cos(v); }

inline void exp_inplace(std::span<double> x) { DPBE_VMATH_LOOP(_ZGVeN8v_exp, _ZGVdN4v_exp, scalar_exp) }
inline void log_inplace(std::span<double> x) { DPBE_VMATH_LOOP(_ZGVeN8v_log, _ZGVdN4v_log, scalar_log) }
inline void sin_inplace(std::span<double> x) { DPBE_VMATH_LOOP(_ZGVeN8v_sin, _ZGVdN4v_sin, scalar_sin) }
inline void cos_inplace(std::span<double> x) { DPBE_VMATH_LOOP(_ZGVeN8v_cos, _ZGVdN4v_cos, scalar_cos) }

#undef DPBE_VMATH_LOOP

/// In-place inclusive prefix sum starting from `carry`; returns the total.
/// The summation order is fixed per build (lane-parallel scan of 8).
inline double prefix_sum_inplace(std::span<double> x, double carry) {
    std::size_t i = 0;
#if defined(__AVX512F__)
    const __m512i s1 = _mm512_set_epi64(6, 5, 4, 3, 2, 1, 0, 0);
    const __m512i s2 = _mm512_set_epi64(5, 4, 3, 2, 1, 0, 0, 0);
    const __m512i s4 = _mm512_set_epi64(3, 2, 1, 0, 0, 0, 0, 0);
    const __m512i last = _mm512_set1_epi64(7);
    __m512d c = _mm512_set1_pd(carry);
    for (; i + 8 <= x.size(); i += 8) {
        __m512d v = _mm512_loadu_pd(x.data() + i);
        v = _mm512_add_pd(v, _mm512_maskz_permutexvar_pd(0xFE, s1, v));
        v = _mm512_add_pd(v, _mm512_maskz_permutexvar_pd(0xFC, s2, v));
        v = _mm512_add_pd(v, _mm512_maskz_permutexvar_pd(0xF0, s4, v));
        v = _mm512_add_pd(v, c);
        _mm512_storeu_pd(x.data() + i, v);
        c = _mm512_permutexvar_pd(last, v);
    }
    carry = _mm512_cvtsd_f64(c);
#endif
    for (; i < x.size(); ++i) {
        carry += x[i];
        x[i] = carry;
    }
    return carry;
}

/// Maximum over x (NaN-free input); -inf for an empty span.
inline double max_value(std::span<const double> x) {
    double m = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
#if defined(__AVX512F__)
    __m512d acc = _mm512_set1_pd(m);
    for (; i + 8 <= x.size(); i += 8) acc = _mm512_max_pd(acc, _mm512_loadu_pd(x.data() + i));
    m = _mm512_reduce_max_pd(acc);
#endif
    for (; i < x.size(); ++i) m = std::max(m, x[i]);
    return m;
}

}  // namespace dpbe::detail
