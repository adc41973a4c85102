#pragma once

#include <cstddef>

namespace wesar {

// log(x) for x > 0, computed with pure IEEE-754 arithmetic (no libm call) so
// that results are bit-identical across platforms and C libraries.  Accuracy
// is ~1 ulp over the full double range.  Used by the Gaussian sampler, whose
// output stream must not depend on the host's libm.  Returns NaN for x <= 0.
double portable_log(double x);

// exp(x) for x in (-inf, 700], max relative error ~3e-16 against a correctly
// rounded exp.  Inputs below -708 flush to exactly 0 (the true value would be
// subnormal).  The array form uses AVX2+FMA when available; softmax rows and
// GELU-derivative batches are the hot callers.
double fast_exp(double x);
void exp_array(const double* in, double* out, std::size_t n);

// erf(x) over an array, matching std::erf to a few ulps.  The AVX2 path uses
// the classic rational approximations (series branch below |x| = 1, scaled
// erfc above); without AVX2 it falls back to std::erf.  GELU forward is the
// hot caller, and in == out aliasing is allowed.
void erf_array(const double* in, double* out, std::size_t n);

}  // namespace wesar
