// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "ivpf/prior.hpp"

using namespace ivpf;

TEST_CASE("normal cdf basics") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
  CHECK(normal_cdf(-8.0) < 1e-15);  // tails stay accurate via erfc
  CHECK(normal_cdf(-8.0) > 0.0);
}

TEST_CASE("bin mass of a standard gaussian") {
  const SymbolModel sm = cond_gauss_symbol_model(0.0, 0.0, 14, 24, 2.0);
  // central bin mass ~= phi(0) * 2^-14 to first order
  const double mass = sm.bin_mass(0);
  CHECK(mass == doctest::Approx(0.3989422804 * std::ldexp(1.0, -14))
                    .epsilon(1e-6));
  // symmetry around the mean
  for (std::int64_t m : {5, 129, 4000}) {
    CHECK(sm.bin_mass(m) == doctest::Approx(sm.bin_mass(-m)).epsilon(1e-12));
  }
}

TEST_CASE("cdf boundary pinning and monotone unit-minimum frequencies") {
  const std::vector<GaussComponent> comps = {
      {0.6, -0.2, 0.15}, {0.4, 0.25, 0.3}};
  const SymbolModel sm = SymbolModel::mixture(comps, 6, 16, 2.0);
  const std::uint32_t n_bins = sm.bin_count();
  CHECK(sm.cdf(0) == 0);
  CHECK(sm.cdf(n_bins) == (1u << 16));
  std::uint32_t prev = 0;
  for (std::uint32_t i = 1; i <= n_bins; ++i) {
    const std::uint32_t cur = sm.cdf(i);
    REQUIRE(cur - prev >= 1);  // every symbol encodable
    prev = cur;
  }
}

TEST_CASE("binary search inverts the cdf") {
  const std::vector<GaussComponent> comps = {{1.0, 0.1, 0.5}};
  const SymbolModel sm = SymbolModel::mixture(comps, 8, 18, 2.0);
  CHECK(sm.symbol_from_cdf(0) == 0);
  for (std::uint32_t j : {0u, 1u, 17u, sm.bin_count() - 1}) {
    CHECK(sm.symbol_from_cdf(sm.cdf(j)) == j);
  }
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20000; ++trial) {
    const auto b = static_cast<std::uint32_t>(rng() % (1u << 18));
    const std::uint32_t i = sm.symbol_from_cdf(b);
    REQUIRE(sm.cdf(i) <= b);
    REQUIRE(b < sm.cdf(i + 1));
  }
}

TEST_CASE("conditional gaussian is the one-component mixture") {
  const SymbolModel a = cond_gauss_symbol_model(0.0, 0.0, 10, 20, 2.0);
  const SymbolModel b =
      SymbolModel::mixture({{1.0, 0.0, 1.0}}, 10, 20, 2.0);
  CHECK(a.lo_mantissa() == b.lo_mantissa());
  CHECK(a.bin_count() == b.bin_count());
  for (std::uint32_t i = 0; i <= a.bin_count(); i += 97) {
    CHECK(a.cdf(i) == b.cdf(i));
  }
}

TEST_CASE("shifting the mean shifts the most likely bin") {
  const int k = 10;
  const auto argmax_bin = [&](double mu) {
    // narrow sigma so rounding noise cannot blur the peak bin
    const SymbolModel sm = cond_gauss_symbol_model(mu, -8.0, k, 20, 2.0);
    std::uint32_t best = 0, best_f = 0;
    for (std::uint32_t i = 0; i < sm.bin_count(); ++i) {
      const std::uint32_t f = sm.cdf(i + 1) - sm.cdf(i);
      if (f > best_f) {
        best_f = f;
        best = i;
      }
    }
    return sm.lo_mantissa() + best;
  };
  CHECK(argmax_bin(0.25) - argmax_bin(0.0) ==
        std::llround(0.25 * std::ldexp(1.0, k)));
}

TEST_CASE("ideal codelength tracks the analytic bin mass") {
  const std::vector<GaussComponent> comps = {{1.0, 0.0, 0.4}};
  const SymbolModel sm = SymbolModel::mixture(comps, 10, 24, 2.0);
  for (std::int64_t m = -300; m <= 300; m += 7) {
    const double mass = sm.bin_mass(m);
    if (mass < std::ldexp(1.0, -12)) continue;
    const auto i = static_cast<std::uint32_t>(m - sm.lo_mantissa());
    const double bits =
        -std::log2((sm.cdf(i + 1) - sm.cdf(i)) / std::ldexp(1.0, 24));
    CHECK(bits == doctest::Approx(-std::log2(mass)).epsilon(0.01));
  }
}

TEST_CASE("dyadic uniform model") {
  const SymbolModel sm = SymbolModel::uniform(6, 16);
  CHECK(sm.bin_count() == 64);
  CHECK(sm.lo_mantissa() == -32);
  CHECK(sm.cdf(0) == 0);
  CHECK(sm.cdf(64) == (1u << 16));
  for (std::uint32_t i = 0; i < 64; ++i) {
    CHECK(sm.cdf(i + 1) - sm.cdf(i) == (1u << 10));  // exactly 2^(n-k)
  }
  CHECK(sm.symbol_from_cdf(1u << 10) == 1);
}

TEST_CASE("window rejection") {
  // a window wider than the frequency space must be rejected
  CHECK_THROWS_AS(
      SymbolModel::mixture({{1.0, 0.0, 1.0}}, 14, 14, 2.0), domain_error);
  CHECK_THROWS_AS(SymbolModel::uniform(10, 8), domain_error);
}

TEST_CASE("mixture weights form a simplex") {
  MixGaussPrior prior;
  prior.dim = 2;
  prior.components = 3;
  prior.logits = {0.3, -1.0, 0.5, 2.0, 0.0, -0.7};
  prior.mu = {0, 0, 0, 0, 0, 0};
  prior.gamma = {0, 0, 0, 0, 0, 0};
  for (std::uint32_t i = 0; i < 2; ++i) {
    const auto comps = mixture_components(prior, i);
    double sum = 0.0;
    for (const auto& c : comps) {
      CHECK(c.weight > 0.0);
      sum += c.weight;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}
