#include "wesar/fastmath.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

namespace wesar {
namespace {

// Rational-polynomial coefficients (Cephes log.c / exp.c lineage).
constexpr double kLogP[6] = {
    1.01875663804580931796e-4, 4.97494994976747001425e-1,
    4.70579119878881725854e0,  1.44989225341610930846e1,
    1.79368678507819816313e1,  7.70838733755885391666e0,
};
constexpr double kLogQ[5] = {
    1.12873587189167450590e1, 4.52279145837532221105e1,
    8.29875266912776603211e1, 7.11544750618563894466e1,
    2.31251620126765340583e1,
};

constexpr double kExpP0 = 1.26177193074810590878e-4;
constexpr double kExpP1 = 3.02994407707441961300e-2;
constexpr double kExpP2 = 9.99999999999999999910e-1;
constexpr double kExpQ0 = 3.00198505138664455042e-6;
constexpr double kExpQ1 = 2.52448340349684104192e-3;
constexpr double kExpQ2 = 2.27265548208155028766e-1;
constexpr double kExpQ3 = 2.00000000000000000005e0;

constexpr double kLog2E = 1.4426950408889634073599;
// Round-to-nearest via the floating-point representation trick: adding
// 1.5*2^52 forces round(x) into the low mantissa bits in two's complement.
constexpr double kRoundMagic = 6755399441055744.0;
// ln 2 split into a coarse and a correction part for exact range reduction.
constexpr double kLn2Hi = 6.93145751953125e-1;
constexpr double kLn2Lo = 1.42860682030941723212e-6;

// Rational-polynomial coefficients for erf/erfc (Cephes ndtr.c lineage).
// erf(x) = x * T(x^2)/U(x^2) on |x| < 1; erfc(x) = exp(-x^2) * P(x)/Q(x)
// on x >= 1, where U and Q carry an implicit leading coefficient of one.
constexpr double kErfT[5] = {
    9.60497373987051638749e0,  9.00260197203842689217e1, 2.23200534594684319226e3,
    7.00332514112805075473e3,  5.55923013010394962768e4,
};
constexpr double kErfU[5] = {
    3.35617141647503099647e1, 5.21357949780152679795e2, 4.59432382970980127987e3,
    2.26290000613890934246e4, 4.92673942608635921086e4,
};
constexpr double kErfcP[9] = {
    2.46196981473530512524e-10, 5.64189564831068821977e-1, 7.46321056442269912687e0,
    4.86371970985681366614e1,   1.96520832956077098242e2,  5.26445194995477358631e2,
    9.34528527171957607540e2,   1.02755188689515710272e3,  5.57535335369399327526e2,
};
constexpr double kErfcQ[8] = {
    1.32281951154744992508e1, 8.67072140885989742329e1, 3.54937778887819891062e2,
    9.75708501743205489753e2, 1.82390916687909736289e3, 2.24633760818710981792e3,
    1.65666309194161350182e3, 5.57535340817727675546e2,
};

}  // namespace

double portable_log(double x) {
    if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    if (x == std::numeric_limits<double>::infinity()) return x;
    int e = 0;
    double m = std::frexp(x, &e);  // m in [0.5, 1); exact bit manipulation
    // Keep the reduced argument near 1 so the polynomial stays accurate.
    if (m < 0.70710678118654752440) {
        e -= 1;
        m = 2.0 * m - 1.0;
    } else {
        m = m - 1.0;
    }
    double z = m * m;
    double num = kLogP[0];
    for (int i = 1; i < 6; ++i) num = num * m + kLogP[i];
    double den = m + kLogQ[0];
    for (int i = 1; i < 5; ++i) den = den * m + kLogQ[i];
    double y = m * (z * num / den);
    double ed = static_cast<double>(e);
    y = y - ed * 2.121944400546905827679e-4;  // -e * (ln2 low part)
    y = y - 0.5 * z;
    double r = m + y;
    return r + ed * 0.693359375;  // +e * (ln2 high part)
}

double fast_exp(double x) {
    double t = x * kLog2E + kRoundMagic;
    double n = t - kRoundMagic;
    double r = x - n * kLn2Hi;
    r -= n * kLn2Lo;
    double rr = r * r;
    double p = r * ((kExpP0 * rr + kExpP1) * rr + kExpP2);
    double q = ((kExpQ0 * rr + kExpQ1) * rr + kExpQ2) * rr + kExpQ3;
    double e = 1.0 + 2.0 * p / (q - p);
    // Scale by 2^n.  n sits two's-complement in t's low mantissa bits, so
    // adding the exponent bias to the raw representation and shifting into
    // the exponent field builds 2^n directly (only the low 12 bits of the
    // sum survive the shift, which is exactly modular arithmetic on n).
    std::int64_t tb;
    std::memcpy(&tb, &t, 8);
    std::int64_t sb = (tb + 1023) << 52;
    double s;
    std::memcpy(&s, &sb, 8);
    double out = e * s;
    return x < -708.0 ? 0.0 : out;
}

#if defined(__AVX2__) && defined(__FMA__)

namespace {

// Vector core of fast_exp; the operation sequence matches the scalar version
// step for step, so both produce identical bits for the same input.
inline __m256d exp4(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(kLog2E);
    const __m256d magic = _mm256_set1_pd(kRoundMagic);
    const __m256d ln2hi = _mm256_set1_pd(kLn2Hi);
    const __m256d ln2lo = _mm256_set1_pd(kLn2Lo);
    const __m256d p0 = _mm256_set1_pd(kExpP0), p1 = _mm256_set1_pd(kExpP1),
                  p2 = _mm256_set1_pd(kExpP2);
    const __m256d q0 = _mm256_set1_pd(kExpQ0), q1 = _mm256_set1_pd(kExpQ1),
                  q2 = _mm256_set1_pd(kExpQ2), q3 = _mm256_set1_pd(kExpQ3);
    const __m256d one = _mm256_set1_pd(1.0), two = _mm256_set1_pd(2.0);
    const __m256d lo_cut = _mm256_set1_pd(-708.0);
    const __m256i bias = _mm256_set1_epi64x(1023);

    __m256d t = _mm256_fmadd_pd(x, log2e, magic);
    __m256d nn = _mm256_sub_pd(t, magic);
    __m256d r = _mm256_fnmadd_pd(nn, ln2hi, x);
    r = _mm256_fnmadd_pd(nn, ln2lo, r);
    __m256d rr = _mm256_mul_pd(r, r);
    __m256d p = _mm256_fmadd_pd(p0, rr, p1);
    p = _mm256_fmadd_pd(p, rr, p2);
    p = _mm256_mul_pd(p, r);
    __m256d q = _mm256_fmadd_pd(q0, rr, q1);
    q = _mm256_fmadd_pd(q, rr, q2);
    q = _mm256_fmadd_pd(q, rr, q3);
    __m256d e = _mm256_add_pd(one, _mm256_div_pd(_mm256_mul_pd(two, p), _mm256_sub_pd(q, p)));
    __m256i tb = _mm256_castpd_si256(t);
    __m256i sb = _mm256_slli_epi64(_mm256_add_epi64(tb, bias), 52);
    __m256d s = _mm256_castsi256_pd(sb);
    __m256d res = _mm256_mul_pd(e, s);
    __m256d mask = _mm256_cmp_pd(x, lo_cut, _CMP_LT_OQ);
    return _mm256_andnot_pd(mask, res);
}

}  // namespace

void exp_array(const double* in, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(in + i)));
    for (; i < n; ++i) out[i] = fast_exp(in[i]);
}

void erf_array(const double* in, double* out, std::size_t n) {
    const __m256d sign_bit = _mm256_set1_pd(-0.0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d t0 = _mm256_set1_pd(kErfT[0]), t1 = _mm256_set1_pd(kErfT[1]),
                  t2 = _mm256_set1_pd(kErfT[2]), t3 = _mm256_set1_pd(kErfT[3]),
                  t4 = _mm256_set1_pd(kErfT[4]);
    const __m256d u0 = _mm256_set1_pd(kErfU[0]), u1 = _mm256_set1_pd(kErfU[1]),
                  u2 = _mm256_set1_pd(kErfU[2]), u3 = _mm256_set1_pd(kErfU[3]),
                  u4 = _mm256_set1_pd(kErfU[4]);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d x = _mm256_loadu_pd(in + i);
        __m256d sign = _mm256_and_pd(x, sign_bit);
        __m256d a = _mm256_andnot_pd(sign_bit, x);
        __m256d z = _mm256_mul_pd(a, a);

        // |x| < 1: erf(a) = a * T(z)/U(z)
        __m256d num = _mm256_fmadd_pd(t0, z, t1);
        num = _mm256_fmadd_pd(num, z, t2);
        num = _mm256_fmadd_pd(num, z, t3);
        num = _mm256_fmadd_pd(num, z, t4);
        __m256d den = _mm256_add_pd(z, u0);
        den = _mm256_fmadd_pd(den, z, u1);
        den = _mm256_fmadd_pd(den, z, u2);
        den = _mm256_fmadd_pd(den, z, u3);
        den = _mm256_fmadd_pd(den, z, u4);
        __m256d small_r = _mm256_mul_pd(a, _mm256_div_pd(num, den));

        __m256d below = _mm256_cmp_pd(a, one, _CMP_LT_OQ);
        __m256d r;
        if (_mm256_movemask_pd(below) == 0xf) {
            r = small_r;  // common case at unit-scale activations
        } else {
            // |x| >= 1: erf(a) = 1 - exp(-a^2) * P(a)/Q(a).  P/Q lose accuracy
            // past a ~ 8, but there erfc is already below half an ulp of 1.
            __m256d e = exp4(_mm256_sub_pd(_mm256_setzero_pd(), z));
            __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(kErfcP[0]), a, _mm256_set1_pd(kErfcP[1]));
            for (int c = 2; c < 9; ++c) p = _mm256_fmadd_pd(p, a, _mm256_set1_pd(kErfcP[c]));
            __m256d q = _mm256_add_pd(a, _mm256_set1_pd(kErfcQ[0]));
            for (int c = 1; c < 8; ++c) q = _mm256_fmadd_pd(q, a, _mm256_set1_pd(kErfcQ[c]));
            __m256d large_r = _mm256_sub_pd(one, _mm256_div_pd(_mm256_mul_pd(e, p), q));
            r = _mm256_blendv_pd(large_r, small_r, below);
        }
        _mm256_storeu_pd(out + i, _mm256_or_pd(r, sign));
    }
    for (; i < n; ++i) out[i] = std::erf(in[i]);
}

#else

void exp_array(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fast_exp(in[i]);
}

void erf_array(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::erf(in[i]);
}

#endif

}  // namespace wesar
