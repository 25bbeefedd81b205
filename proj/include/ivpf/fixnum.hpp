// SPDX-License-Identifier: Apache-2.0
//
// k-precision fixed-point values: integer mantissas with a shared number of
// fractional bits. All arithmetic on mantissas is exact; binary floating
// point only appears at the quantize() boundary.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ivpf {

// Base class for every error thrown by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct overflow_error : error {
  using error::error;
};

struct domain_error : error {
  using error::error;
};

struct format_error : error {
  using error::error;
};

// Mantissas must stay below 2^62 so that the modular chain products
// x*m + r fit comfortably in a signed 128-bit intermediate with C <= 30.
inline constexpr std::int64_t kMantissaLimit = std::int64_t{1} << 62;

// Configurable ceiling on fractional bits, enforced at model load.
inline constexpr int kMaxPrecision = 24;

struct QuantScalar {
  std::int64_t mantissa = 0;
  int precision = 0;  // k: value == mantissa / 2^k
};

// Exact conversion to binary64. Exact for precision <= 52 and
// |mantissa| < 2^52; our mantissas respect the 2^62 guard, which keeps the
// conversion within one ulp even at the extreme.
inline double to_real(QuantScalar q) {
  return std::ldexp(static_cast<double>(q.mantissa), -q.precision);
}

inline double to_real(std::int64_t mantissa, int precision) {
  return std::ldexp(static_cast<double>(mantissa), -precision);
}

// round(2^k * x) / 2^k with ties rounding half away from zero.
inline std::int64_t quantize_mantissa(double x, int k) {
  const double scaled = std::ldexp(x, k);
  if (!std::isfinite(scaled)) {
    throw domain_error("quantize: non-finite input");
  }
  if (std::fabs(scaled) >= static_cast<double>(kMantissaLimit)) {
    throw overflow_error("quantize: mantissa exceeds 2^62 guard");
  }
  return std::llround(scaled);  // llround ties away from zero
}

inline QuantScalar quantize(double x, int k) {
  return QuantScalar{quantize_mantissa(x, k), k};
}

// Splits x (precision k) into the largest multiple of 2^-h not above x and
// the non-negative remainder, so that coarse + remainder == x bit-for-bit.
struct FloorSplit {
  QuantScalar coarse;     // precision h
  QuantScalar remainder;  // precision k, in [0, 2^-h)
};

inline FloorSplit floor_to_precision(QuantScalar x, int h) {
  if (h < 0 || h > x.precision) {
    throw domain_error("floor_to_precision: need 0 <= h <= k");
  }
  const int shift = x.precision - h;
  const std::int64_t coarse = x.mantissa >> shift;  // arithmetic shift: floor
  const std::int64_t rem = x.mantissa - (coarse << shift);
  return FloorSplit{QuantScalar{coarse, h}, QuantScalar{rem, x.precision}};
}

struct QuantVector {
  std::vector<std::int64_t> mantissas;
  int precision = 0;

  QuantVector() = default;
  QuantVector(std::vector<std::int64_t> m, int k)
      : mantissas(std::move(m)), precision(k) {}

  std::size_t dim() const { return mantissas.size(); }

  std::vector<double> to_reals() const {
    std::vector<double> out(mantissas.size());
    for (std::size_t i = 0; i < mantissas.size(); ++i) {
      out[i] = to_real(mantissas[i], precision);
    }
    return out;
  }
};

inline QuantVector quantize(const std::vector<double>& xs, int k) {
  std::vector<std::int64_t> m(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    m[i] = quantize_mantissa(xs[i], k);
  }
  return QuantVector{std::move(m), k};
}

}  // namespace ivpf
