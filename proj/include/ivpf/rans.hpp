// SPDX-License-Identifier: Apache-2.0
//
// rANS entropy coder: 64-bit head with 32-bit word renormalization. Encode
// and decode are exact inverses on the integer state (LIFO), which is what
// makes bits-back dequantization possible. Uniform bits are coded as exact
// binary digits rather than through the symbol path.

#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "ivpf/fixnum.hpp"

namespace ivpf {

// Public initial-state constant; part of the stream format so that net-bit
// accounting is reproducible.
inline constexpr std::uint64_t kRansInitState = std::uint64_t{1} << 32;

// Renormalization lower bound for the head.
inline constexpr std::uint64_t kRansLowBound = std::uint64_t{1} << 32;

class RansState {
 public:
  // Encodes a symbol with frequency freq and cumulative offset cum out of a
  // total of 2^n. freq must be positive and cum + freq <= 2^n.
  void encode(std::uint32_t freq, std::uint32_t cum, int n);

  // Decoding is split so the caller can resolve peek(n) -> symbol via its
  // CDF, then advance with that symbol's (freq, cum).
  std::uint32_t peek(int n) const {
    return static_cast<std::uint32_t>(head_ & ((std::uint64_t{1} << n) - 1));
  }
  void advance(std::uint32_t freq, std::uint32_t cum, int n);

  // Exact binary-digit pair used for bits-back uniform coding; decode_bits
  // is the inverse of encode_bits. bits in [0, 32]. A fresh stream's pool
  // bottoms out at zero digits once the seed constant is exhausted; the
  // digits are still returned exactly by the matching encode_bits.
  void encode_bits(std::uint32_t value, int bits);
  std::uint32_t decode_bits(int bits);

  // Exact information content of the state in bits.
  std::uint64_t bit_content() const {
    return 32 * static_cast<std::uint64_t>(words_.size()) +
           std::bit_width(head_);
  }

  // Word stream with the 64-bit head appended as two final words (high,
  // low); restore() is the exact inverse.
  std::vector<std::uint32_t> flush() const;
  static RansState restore(const std::vector<std::uint32_t>& words);

  std::uint64_t head() const { return head_; }
  std::size_t word_count() const { return words_.size(); }

  friend bool operator==(const RansState&, const RansState&) = default;

 private:
  std::uint64_t head_ = kRansInitState;
  std::vector<std::uint32_t> words_;
};

}  // namespace ivpf
