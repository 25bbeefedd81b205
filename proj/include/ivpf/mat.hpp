// SPDX-License-Identifier: Apache-2.0
//
// Modular Affine Transformation: an exactly invertible fixed-point
// realization of z = s (.) x + t under the volume-preserving constraint
// prod(s_i) = 1, threading a C-bit auxiliary remainder through the chain.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ivpf/fixnum.hpp"

namespace ivpf {

// Chain of moduli m_0 ... m_{d_b} with m_0 = m_{d_b} = 2^C and
// s_i ~= m_{i-1} / m_i.
struct ModulusChain {
  std::vector<std::uint64_t> m;
  int mod_bits = 0;  // C

  std::size_t dim() const { return m.size() - 1; }
};

// m_i = round(2^C / prod_{j<=i} s_j); values in (0, 1] clamp to 1.
// The running product accumulates left to right in binary64.
ModulusChain compute_moduli(std::span<const double> s, int mod_bits);

// In-place forward MAT over mantissas at precision k. r must be < 2^C on
// entry and satisfies the same bound on exit.
void mat_forward(std::span<std::int64_t> x, const ModulusChain& chain,
                 std::span<const double> t, int k, std::uint64_t& r);

// Exact inverse of mat_forward with the identical chain, t, and k.
void mat_inverse(std::span<std::int64_t> z, const ModulusChain& chain,
                 std::span<const double> t, int k, std::uint64_t& r);

// Convenience overloads that build the chain from raw scales.
void mat_forward(std::span<std::int64_t> x, std::span<const double> s,
                 std::span<const double> t, int k, std::uint64_t& r,
                 int mod_bits);
void mat_inverse(std::span<std::int64_t> z, std::span<const double> s,
                 std::span<const double> t, int k, std::uint64_t& r,
                 int mod_bits);

}  // namespace ivpf
