#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace varcurve::detail {

// Closed forms divide by high powers of (1 - rho); 100 digits leave ample
// headroom at |rho - 1| = 1e-8 and keep rho^(2K) finite for large K.
using Wide = boost::multiprecision::cpp_bin_float_100;
// Transform evaluations near s = 0 lose digits like 1/s^2.
using Wide50 = boost::multiprecision::cpp_bin_float_50;

template <class T>
T integer_power(T base, long exponent) {
  T result = 1;
  bool invert = exponent < 0;
  unsigned long e = static_cast<unsigned long>(invert ? -exponent : exponent);
  while (e > 0) {
    if (e & 1u) result *= base;
    base *= base;
    e >>= 1;
  }
  return invert ? T(1) / result : result;
}

}  // namespace varcurve::detail
