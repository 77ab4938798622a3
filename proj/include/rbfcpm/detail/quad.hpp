#pragma once

// IEEE binary128 arithmetic (GCC __float128 + libquadmath). Collocation
// systems of flat Gaussians at eps*dx << 1 have condition numbers far beyond
// double precision; all weight solves run in this type.

#include <cmath>

#include <quadmath.h>

namespace rbfcpm::detail {

using quad = __float128;

inline quad xexp(quad x) { return expq(x); }
inline quad xsqrt(quad x) { return sqrtq(x); }
inline quad xlog(quad x) { return logq(x); }
inline quad xabs(quad x) { return x < 0 ? -x : x; }

inline double xexp(double x) { return std::exp(x); }
inline double xsqrt(double x) { return std::sqrt(x); }
inline double xlog(double x) { return std::log(x); }
inline double xabs(double x) { return std::abs(x); }

}  // namespace rbfcpm::detail
