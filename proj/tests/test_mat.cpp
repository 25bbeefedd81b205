// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ivpf/mat.hpp"

using namespace ivpf;

TEST_CASE("modulus chain construction") {
  const double s1[] = {2.0, 0.5};
  ModulusChain c = compute_moduli(s1, 4);
  CHECK(c.m == std::vector<std::uint64_t>{16, 8, 16});

  const double s2[] = {1.0, 1.0, 1.0};
  c = compute_moduli(s2, 16);
  CHECK(c.m == std::vector<std::uint64_t>{65536, 65536, 65536, 65536});

  // extreme scales clamp intermediate moduli to 1 rather than 0
  const double s3[] = {40000.0, 1.0 / 40000.0};
  c = compute_moduli(s3, 4);
  CHECK(c.m == std::vector<std::uint64_t>{16, 1, 16});
}

TEST_CASE("modulus chain rejects bad scales") {
  const double bad[] = {1.0, -2.0};
  CHECK_THROWS_AS(compute_moduli(bad, 4), domain_error);
  const double nan_s[] = {std::nan("")};
  CHECK_THROWS_AS(compute_moduli(nan_s, 4), domain_error);
}

TEST_CASE("forward hand trace at k=0, C=4") {
  const double s[] = {2.0, 0.5};
  const double t[] = {0.0, 0.0};
  std::vector<std::int64_t> x = {3, 5};
  std::uint64_t r = 0;
  mat_forward(x, s, t, 0, r, 4);
  CHECK(x == std::vector<std::int64_t>{6, 2});
  CHECK(r == 8);

  // same trace with offsets quantized at k=0: (0.25, -1) -> (0, -1)
  const double t2[] = {0.25, -1.0};
  std::vector<std::int64_t> x2 = {3, 5};
  std::uint64_t r2 = 0;
  mat_forward(x2, s, t2, 0, r2, 4);
  CHECK(x2 == std::vector<std::int64_t>{6, 1});
  CHECK(r2 == 8);
}

TEST_CASE("inverse hand trace at k=0, C=4") {
  const double s[] = {2.0, 0.5};
  const double t[] = {0.0, 0.0};
  std::vector<std::int64_t> z = {6, 2};
  std::uint64_t r = 8;
  mat_inverse(z, s, t, 0, r, 4);
  CHECK(z == std::vector<std::int64_t>{3, 5});
  CHECK(r == 0);
}

TEST_CASE("identity scales pass values and register through") {
  const double s[] = {1.0, 1.0, 1.0};
  const double t[] = {0.0, 0.0, 0.0};
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> x = {
        static_cast<std::int64_t>(rng() % 1000) - 500,
        static_cast<std::int64_t>(rng() % 1000) - 500,
        static_cast<std::int64_t>(rng() % 1000) - 500};
    const std::vector<std::int64_t> orig = x;
    std::uint64_t r = rng() % (1u << 16);
    const std::uint64_t r0 = r;
    mat_forward(x, s, t, 14, r, 16);
    CHECK(x == orig);
    CHECK(r == r0);
  }
}

TEST_CASE("register precondition is enforced") {
  const double s[] = {1.0};
  const double t[] = {0.0};
  std::vector<std::int64_t> x = {1};
  std::uint64_t r = 16;  // >= 2^4
  CHECK_THROWS_AS(mat_forward(x, s, t, 0, r, 4), domain_error);
}

TEST_CASE("exhaustive round trip on a small domain") {
  const double s[] = {2.0, 0.5};
  const double t[] = {0.3, -0.7};
  const ModulusChain chain = compute_moduli(s, 3);
  for (std::int64_t a = -8; a < 8; ++a) {
    for (std::int64_t b = -8; b < 8; ++b) {
      for (std::uint64_t r0 = 0; r0 < 8; ++r0) {
        std::vector<std::int64_t> v = {a, b};
        std::uint64_t r = r0;
        mat_forward(v, chain, t, 2, r);
        CHECK(r < 8);
        mat_inverse(v, chain, t, 2, r);
        REQUIRE(v == std::vector<std::int64_t>{a, b});
        REQUIRE(r == r0);
      }
    }
  }
}

TEST_CASE("random round trips and the affine error bound") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> logs(-1.5, 1.5);
  std::uniform_real_distribution<double> offs(-2.0, 2.0);
  std::uniform_real_distribution<double> vals(-4.0, 4.0);
  const int k = 14, C = 16;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = 1 + rng() % 6;
    std::vector<double> s(d), t(d);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < d; ++i) {
      s[i] = std::exp(logs(rng));
      acc += std::log(s[i]);
    }
    s[d - 1] = std::exp(-acc);
    for (auto& v : t) v = offs(rng);
    // worst rounding scale of the modulus chain: the intermediate moduli
    // are 2^C divided by the running product
    double prod = 1.0, pmax = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      prod *= s[i];
      pmax = std::max(pmax, prod);
    }

    std::vector<std::int64_t> x(d);
    std::vector<double> xr(d);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = quantize_mantissa(vals(rng), k);
      xr[i] = to_real(x[i], k);
    }
    const std::vector<std::int64_t> orig = x;
    std::uint64_t r = rng() % (1u << C);
    const std::uint64_t r0 = r;

    mat_forward(x, s, t, k, r, C);
    CHECK(r < (1u << C));
    for (std::size_t i = 0; i < d; ++i) {
      const double err = std::fabs(to_real(x[i], k) - (s[i] * xr[i] + t[i]));
      const double bound =
          8.0 * ((std::fabs(xr[i]) + 1.0) * s[i] * pmax * std::ldexp(1.0, -C) +
                 std::ldexp(1.0, -k));
      CHECK(err <= bound);
    }
    mat_inverse(x, s, t, k, r, C);
    REQUIRE(x == orig);
    REQUIRE(r == r0);
  }
}
