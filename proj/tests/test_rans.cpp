// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ivpf/rans.hpp"

using namespace ivpf;

TEST_CASE("encode recurrence hand trace") {
  // n=2 (mass 4), pmf (1/2, 1/4, 1/4) => freq (2,1,1), cum (0,2,3).
  // Encoding symbol 0 onto head 5: floor(5/2)*4 + 5%2 + 0 = 9.
  RansState s = RansState::restore({0, 5});
  CHECK(s.head() == 5);
  s.encode(2, 0, 2);
  CHECK(s.head() == 9);

  // decode replays it
  const std::uint32_t b = s.peek(2);
  CHECK(b == 1);  // falls in [0, 2) -> symbol 0
  s.advance(2, 0, 2);
  CHECK(s.head() == 5);
}

TEST_CASE("certain symbol costs nothing") {
  RansState s;
  for (int i = 0; i < 50; ++i) s.encode_bits(0x5a5a, 16);
  const RansState before = s;
  s.encode(1u << 12, 0, 12);  // freq == 2^n
  CHECK(s == before);
}

TEST_CASE("LIFO round trip with state restoration") {
  const std::vector<std::uint32_t> freq = {5, 1, 9, 3, 14};
  std::vector<std::uint32_t> cum = {0};
  for (std::uint32_t f : freq) cum.push_back(cum.back() + f);
  const int n = 5;  // total 32
  std::mt19937_64 rng(77);
  std::vector<std::uint32_t> symbols(5000);
  std::discrete_distribution<std::uint32_t> dist(freq.begin(), freq.end());
  for (auto& v : symbols) v = dist(rng);

  RansState s;
  const RansState initial = s;
  for (auto it = symbols.rbegin(); it != symbols.rend(); ++it) {
    s.encode(freq[*it], cum[*it], n);
  }
  for (std::uint32_t expected : symbols) {
    const std::uint32_t b = s.peek(n);
    std::uint32_t sym = 0;
    while (cum[sym + 1] <= b) ++sym;
    REQUIRE(sym == expected);
    s.advance(freq[sym], cum[sym], n);
  }
  CHECK(s == initial);
}

TEST_CASE("argument validation") {
  RansState s;
  CHECK_THROWS_AS(s.encode(0, 0, 8), domain_error);       // zero frequency
  CHECK_THROWS_AS(s.encode(200, 100, 8), domain_error);   // cum+freq > 2^n
  CHECK_THROWS_AS(s.encode(1, 0, 31), domain_error);      // n out of range
  CHECK_THROWS_AS(s.advance(4, 250, 8), domain_error);    // slot below cum
}

TEST_CASE("binary digit pair is an exact inverse") {
  std::mt19937_64 rng(123);
  RansState s;
  // charge the state so digits cross word boundaries
  for (int i = 0; i < 200; ++i) {
    s.encode_bits(static_cast<std::uint32_t>(rng()), 32);
  }
  const RansState charged = s;
  std::vector<std::pair<std::uint32_t, int>> digits;
  for (int i = 0; i < 5000; ++i) {
    const int bits = 1 + static_cast<int>(rng() % 24);
    digits.emplace_back(s.decode_bits(bits), bits);
  }
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    s.encode_bits(it->first, it->second);
  }
  CHECK(s == charged);
}

TEST_CASE("bits-back from a fresh state") {
  // A fresh stream holds only the public seed constant; decoding digits
  // drains it to zero, and re-encoding the same digits restores it exactly.
  RansState s;
  const RansState initial = s;
  std::vector<std::uint32_t> u(4000);
  for (auto& v : u) v = s.decode_bits(6);
  for (auto it = u.rbegin(); it != u.rend(); ++it) s.encode_bits(*it, 6);
  CHECK(s == initial);
}

TEST_CASE("dyadic frequencies grow the state by exactly k bits") {
  std::mt19937_64 rng(3);
  RansState s;
  for (int i = 0; i < 64; ++i) {
    s.encode_bits(static_cast<std::uint32_t>(rng()), 32);
  }
  const int n = 20, k = 14;
  for (int i = 0; i < 3000; ++i) {
    const std::uint64_t before = s.bit_content();
    const auto sym = static_cast<std::uint32_t>(rng() % (1u << k));
    s.encode(1u << (n - k), sym << (n - k), n);
    REQUIRE(s.bit_content() - before == k);
  }
}

TEST_CASE("flush and restore") {
  RansState s;
  SUBCASE("empty stream flushes just the seed constant") {
    const std::vector<std::uint32_t> words = s.flush();
    CHECK(words == std::vector<std::uint32_t>{1, 0});  // head 2^32
  }
  SUBCASE("round trip with payload") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
      s.encode(3, 1, 4);
      s.encode_bits(static_cast<std::uint32_t>(rng()) & 0x1ffffu, 17);
    }
    CHECK(RansState::restore(s.flush()) == s);
  }
  SUBCASE("malformed word streams are rejected") {
    CHECK_THROWS_AS(RansState::restore({1}), format_error);
  }
}

TEST_CASE("rate is near entropy on a skewed source") {
  const std::vector<std::uint32_t> freq = {40000, 15000, 8000, 2000, 536};
  const int n = 16;
  std::vector<std::uint32_t> cum = {0};
  for (std::uint32_t f : freq) cum.push_back(cum.back() + f);
  REQUIRE(cum.back() == (1u << n));

  std::mt19937_64 rng(55);
  std::discrete_distribution<std::uint32_t> dist(freq.begin(), freq.end());
  RansState s;
  const std::uint64_t before = s.bit_content();
  const int count = 100000;
  std::vector<std::uint64_t> hits(freq.size(), 0);
  for (int i = 0; i < count; ++i) {
    const std::uint32_t sym = dist(rng);
    ++hits[sym];
    s.encode(freq[sym], cum[sym], n);
  }
  const double coded = static_cast<double>(s.bit_content() - before);
  // the exact target is the empirical cross-entropy of the drawn sequence
  double ideal = 0.0;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    ideal += static_cast<double>(hits[i]) * (n - std::log2(freq[i]));
  }
  CHECK(coded < ideal * 1.0005 + 64.0);
  CHECK(coded > ideal * 0.999);
}
