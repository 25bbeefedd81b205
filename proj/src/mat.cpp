// SPDX-License-Identifier: Apache-2.0

#include "ivpf/mat.hpp"

#include <cmath>

namespace ivpf {

namespace {

// Floor division of a 128-bit product by a positive modulus, with the
// Euclidean remainder in [0, m). Negative operands round toward -inf so the
// remainder stays non-negative.
std::int64_t floor_div(__int128 v, std::uint64_t m, std::uint64_t& rem) {
  __int128 q = v / static_cast<__int128>(m);
  __int128 r = v % static_cast<__int128>(m);
  if (r < 0) {
    q -= 1;
    r += static_cast<__int128>(m);
  }
  rem = static_cast<std::uint64_t>(r);
  if (q >= static_cast<__int128>(kMantissaLimit) ||
      q <= -static_cast<__int128>(kMantissaLimit)) {
    throw overflow_error("mat: quotient exceeds 2^62 guard");
  }
  return static_cast<std::int64_t>(q);
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out) || out >= kMantissaLimit ||
      out <= -kMantissaLimit) {
    throw overflow_error("mat: mantissa sum exceeds 2^62 guard");
  }
  return out;
}

void check_register(std::uint64_t r, int mod_bits) {
  if (r >= (std::uint64_t{1} << mod_bits)) {
    throw domain_error("mat: auxiliary register out of [0, 2^C)");
  }
}

}  // namespace

ModulusChain compute_moduli(std::span<const double> s, int mod_bits) {
  if (mod_bits < 1 || mod_bits > 30) {
    throw domain_error("compute_moduli: C out of [1, 30]");
  }
  const std::uint64_t m0 = std::uint64_t{1} << mod_bits;
  ModulusChain chain;
  chain.mod_bits = mod_bits;
  chain.m.resize(s.size() + 1);
  chain.m.front() = m0;
  chain.m.back() = m0;

  double prod = 1.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (!(s[i] > 0.0) || !std::isfinite(s[i])) {
      throw domain_error("compute_moduli: scales must be finite and > 0");
    }
    prod *= s[i];
    const double v = static_cast<double>(m0) / prod;
    // Normal rounding, except (0, 1] maps to 1 so no modulus is zero.
    chain.m[i + 1] = v <= 1.0 ? 1 : static_cast<std::uint64_t>(std::llround(v));
  }
  if (!s.empty()) {
    const double last = s.back();
    if (!(last > 0.0) || !std::isfinite(last)) {
      throw domain_error("compute_moduli: scales must be finite and > 0");
    }
  }
  return chain;
}

void mat_forward(std::span<std::int64_t> x, const ModulusChain& chain,
                 std::span<const double> t, int k, std::uint64_t& r) {
  if (chain.dim() != x.size() || t.size() != x.size()) {
    throw domain_error("mat_forward: dimension mismatch");
  }
  check_register(r, chain.mod_bits);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const __int128 v =
        static_cast<__int128>(x[i]) * static_cast<__int128>(chain.m[i]) +
        static_cast<__int128>(r);
    x[i] = floor_div(v, chain.m[i + 1], r);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = checked_add(x[i], quantize_mantissa(t[i], k));
  }
}

void mat_inverse(std::span<std::int64_t> z, const ModulusChain& chain,
                 std::span<const double> t, int k, std::uint64_t& r) {
  if (chain.dim() != z.size() || t.size() != z.size()) {
    throw domain_error("mat_inverse: dimension mismatch");
  }
  check_register(r, chain.mod_bits);
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = checked_add(z[i], -quantize_mantissa(t[i], k));
  }
  for (std::size_t i = z.size(); i-- > 0;) {
    const __int128 v =
        static_cast<__int128>(z[i]) * static_cast<__int128>(chain.m[i + 1]) +
        static_cast<__int128>(r);
    z[i] = floor_div(v, chain.m[i], r);
  }
}

void mat_forward(std::span<std::int64_t> x, std::span<const double> s,
                 std::span<const double> t, int k, std::uint64_t& r,
                 int mod_bits) {
  mat_forward(x, compute_moduli(s, mod_bits), t, k, r);
}

void mat_inverse(std::span<std::int64_t> z, std::span<const double> s,
                 std::span<const double> t, int k, std::uint64_t& r,
                 int mod_bits) {
  mat_inverse(z, compute_moduli(s, mod_bits), t, k, r);
}

}  // namespace ivpf
