// SPDX-License-Identifier: Apache-2.0

#include "ivpf/rans.hpp"

namespace ivpf {

void RansState::encode(std::uint32_t freq, std::uint32_t cum, int n) {
  if (n < 1 || n > 30) {
    throw domain_error("rans: frequency bits out of [1, 30]");
  }
  if (freq == 0 || static_cast<std::uint64_t>(cum) + freq >
                       (std::uint64_t{1} << n)) {
    throw domain_error("rans: bad (freq, cum) pair");
  }
  // 128-bit: the threshold is exactly 2^64 for the degenerate freq == 2^n.
  const unsigned __int128 x_max =
      static_cast<unsigned __int128>((kRansLowBound >> n) << 32) * freq;
  while (head_ >= x_max) {
    words_.push_back(static_cast<std::uint32_t>(head_));
    head_ >>= 32;
  }
  head_ = ((head_ / freq) << n) + (head_ % freq) + cum;
}

void RansState::advance(std::uint32_t freq, std::uint32_t cum, int n) {
  const std::uint32_t b = peek(n);
  if (freq == 0 || b < cum || b - cum >= freq) {
    throw domain_error("rans: advance with mismatched symbol");
  }
  head_ = freq * (head_ >> n) + b - cum;
  while (head_ < kRansLowBound && !words_.empty()) {
    head_ = (head_ << 32) | words_.back();
    words_.pop_back();
  }
}

void RansState::encode_bits(std::uint32_t value, int bits) {
  if (bits < 0 || bits > 32) {
    throw domain_error("rans: digit width out of [0, 32]");
  }
  if (bits == 0) return;
  if (bits < 32 && (value >> bits) != 0) {
    throw domain_error("rans: digit value out of range");
  }
  const std::uint64_t cap = std::uint64_t{1} << (64 - bits);
  while (head_ >= cap) {
    words_.push_back(static_cast<std::uint32_t>(head_));
    head_ >>= 32;
  }
  head_ = (head_ << bits) | value;
}

std::uint32_t RansState::decode_bits(int bits) {
  if (bits < 0 || bits > 32) {
    throw domain_error("rans: digit width out of [0, 32]");
  }
  if (bits == 0) return 0;
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  const auto value = static_cast<std::uint32_t>(head_ & mask);
  head_ >>= bits;
  while (head_ < kRansLowBound && !words_.empty()) {
    head_ = (head_ << 32) | words_.back();
    words_.pop_back();
  }
  return value;
}

std::vector<std::uint32_t> RansState::flush() const {
  std::vector<std::uint32_t> out = words_;
  out.push_back(static_cast<std::uint32_t>(head_ >> 32));
  out.push_back(static_cast<std::uint32_t>(head_));
  return out;
}

RansState RansState::restore(const std::vector<std::uint32_t>& words) {
  if (words.size() < 2) {
    throw format_error("rans: stream too short to restore");
  }
  RansState s;
  s.words_.assign(words.begin(), words.end() - 2);
  s.head_ = (static_cast<std::uint64_t>(words[words.size() - 2]) << 32) |
            words.back();
  return s;
}

}  // namespace ivpf
