// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ivpf/layers.hpp"

using namespace ivpf;

namespace {

// dim_a -> 2 * dim_b net with all-zero weights and a fixed bias, so the
// coupling coefficients are data-independent constants.
DenseNet constant_net(std::uint32_t in, std::uint32_t out,
                      const std::vector<double>& bias) {
  DenseNet net;
  net.bounded = false;
  DenseNet::Affine a;
  a.in = in;
  a.out = out;
  a.weight.assign(std::size_t{in} * out, 0.0);
  a.bias = bias;
  net.affines.push_back(a);
  return net;
}

DenseNet random_net(std::mt19937_64& rng, std::uint32_t in,
                    std::uint32_t out) {
  std::normal_distribution<double> normal;
  DenseNet net;
  net.bounded = true;
  const std::uint32_t widths[3] = {in, 8, out};
  for (int l = 0; l < 2; ++l) {
    DenseNet::Affine a;
    a.in = widths[l];
    a.out = widths[l + 1];
    a.weight.resize(std::size_t{a.in} * a.out);
    for (auto& w : a.weight) w = 0.5 * normal(rng);
    a.bias.resize(a.out);
    for (auto& b : a.bias) b = 0.2 * normal(rng);
    net.affines.push_back(std::move(a));
  }
  return net;
}

}  // namespace

TEST_CASE("vp_project") {
  std::vector<double> s(2), t(2);

  SUBCASE("alpha zero gives the identity coupling") {
    const double s0[] = {1.3, -0.2};
    const double t0[] = {5.0, -7.0};
    vp_project(s0, t0, 0.0, s, t);
    CHECK(s == std::vector<double>{0.0, 0.0});
    CHECK(t == std::vector<double>{0.0, 0.0});
  }

  SUBCASE("constant log-scales are annihilated by mean subtraction") {
    const double s0[] = {0.7, 0.7};
    const double t0[] = {0.0, 0.0};
    vp_project(s0, t0, 1.0, s, t);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == 0.0);
  }

  SUBCASE("direct formula") {
    const double s0[] = {1.0, -1.0};
    const double t0[] = {2.0, 3.0};
    vp_project(s0, t0, 0.5, s, t);
    CHECK(s[0] == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(-0.5 * std::tanh(1.0)).epsilon(1e-15));
    CHECK(t == std::vector<double>{1.0, 1.5});
  }

  SUBCASE("projected log-scales sum to zero") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    std::vector<double> s0(16), t0(16), so(16), to(16);
    for (int trial = 0; trial < 200; ++trial) {
      for (auto& v : s0) v = 3.0 * normal(rng);
      for (auto& v : t0) v = normal(rng);
      vp_project(s0, t0, 0.8, so, to);
      double sum = 0.0;
      for (double v : so) sum += v;
      CHECK(std::fabs(sum) < 1e-12);
    }
  }
}

TEST_CASE("dense net evaluation") {
  SUBCASE("zero weights yield the bias") {
    const DenseNet net = constant_net(3, 2, {0.25, -1.5});
    const double in[] = {1.0, 2.0, 3.0};
    CHECK(net.eval(in) == std::vector<double>{0.25, -1.5});
  }

  SUBCASE("single affine hand check at 2x2") {
    DenseNet net;
    net.bounded = false;
    DenseNet::Affine a;
    a.in = 2;
    a.out = 2;
    a.weight = {1.0, 2.0, -0.5, 0.25};  // row-major
    a.bias = {0.125, -1.0};
    net.affines.push_back(a);
    const double in[] = {3.0, -1.0};
    const std::vector<double> out = net.eval(in);
    CHECK(out[0] == 3.0 - 2.0 + 0.125);
    CHECK(out[1] == -1.5 - 0.25 - 1.0);
  }

  SUBCASE("evaluation is bit-deterministic") {
    std::mt19937_64 rng(9);
    const DenseNet net = random_net(rng, 5, 4);
    const double in[] = {0.1, -0.2, 0.3, 0.7, -1.1};
    CHECK(net.eval(in) == net.eval(in));
  }
}

TEST_CASE("coupling layer") {
  SUBCASE("alpha zero is the identity") {
    std::mt19937_64 rng(2);
    CouplingLayer layer;
    layer.dim = 4;
    layer.dim_b = 1;
    layer.alpha = 0.0;
    layer.net = random_net(rng, 3, 2);
    std::vector<std::int64_t> x = {100, -37, 12, 9001};
    const std::vector<std::int64_t> orig = x;
    std::uint64_t r = 123;
    coupling_forward(layer, x, 14, r, 16);
    CHECK(x == orig);
    CHECK(r == 123);
  }

  SUBCASE("zero log-scale reduces to a quantized translation") {
    CouplingLayer layer;
    layer.dim = 2;
    layer.dim_b = 1;
    layer.alpha = 1.0;
    layer.net = constant_net(1, 2, {0.4, 0.3});  // s0 const, t0 = 0.3
    std::vector<std::int64_t> x = {5, 40};
    std::uint64_t r = 0;
    coupling_forward(layer, x, 4, r, 8);
    CHECK(x[0] == 5);  // passthrough half untouched
    CHECK(x[1] == 40 + 5);  // + round(0.3 * 16)
    CHECK(r == 0);
    coupling_inverse(layer, x, 4, r, 8);
    CHECK(x == std::vector<std::int64_t>{5, 40});
  }

  SUBCASE("random round trips") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
      CouplingLayer layer;
      layer.dim = 8;
      layer.dim_b = 2;
      layer.alpha = 0.4;
      layer.net = random_net(rng, 6, 4);
      std::vector<std::int64_t> x(8);
      for (auto& v : x) {
        v = static_cast<std::int64_t>(rng() % (1u << 15)) - (1 << 14);
      }
      const std::vector<std::int64_t> orig = x;
      std::uint64_t r = rng() % (1u << 16);
      const std::uint64_t r0 = r;
      coupling_forward(layer, x, 14, r, 16);
      CHECK(std::equal(x.begin(), x.begin() + 6, orig.begin()));
      coupling_inverse(layer, x, 14, r, 16);
      REQUIRE(x == orig);
      REQUIRE(r == r0);
    }
  }
}

TEST_CASE("triangular multiplications") {
  SUBCASE("hand trace c=2, k=1") {
    // z1 = x1 + round(0.5 * x2), z2 = x2
    const std::vector<double> u = {1.0, 0.5, 0.0, 1.0};
    std::vector<std::int64_t> x = {1, 2};  // (0.5, 1.0)
    tri_upper_forward(x, u, 2, 1);
    CHECK(x == std::vector<std::int64_t>{2, 2});  // (1.0, 1.0)
    tri_upper_inverse(x, u, 2, 1);
    CHECK(x == std::vector<std::int64_t>{1, 2});
  }

  SUBCASE("identity matrices are no-ops") {
    const std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::vector<std::int64_t> x = {7, -3, 11};
    tri_upper_forward(x, eye, 3, 6);
    CHECK(x == std::vector<std::int64_t>{7, -3, 11});
    tri_lower_forward(x, eye, 3, 6);
    CHECK(x == std::vector<std::int64_t>{7, -3, 11});
  }

  SUBCASE("exhaustive round trip at c=3, k=2") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal;
    std::vector<double> u = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::vector<double> l = u;
    u[1] = normal(rng);
    u[2] = normal(rng);
    u[5] = normal(rng);
    l[3] = normal(rng);
    l[6] = normal(rng);
    l[7] = normal(rng);
    for (std::int64_t a = -4; a < 4; ++a) {
      for (std::int64_t b = -4; b < 4; ++b) {
        for (std::int64_t c = -4; c < 4; ++c) {
          std::vector<std::int64_t> x = {a, b, c};
          tri_upper_forward(x, u, 3, 2);
          tri_upper_inverse(x, u, 3, 2);
          REQUIRE(x == std::vector<std::int64_t>{a, b, c});
          tri_lower_forward(x, l, 3, 2);
          tri_lower_inverse(x, l, 3, 2);
          REQUIRE(x == std::vector<std::int64_t>{a, b, c});
        }
      }
    }
  }
}

TEST_CASE("diagonal scaling through the modular chain") {
  SUBCASE("identity diagonal") {
    const std::vector<double> lambda = {1.0, 1.0};
    std::vector<std::int64_t> x = {3, 5};
    std::uint64_t r = 6;
    diag_forward(x, lambda, 0, r, 4);
    CHECK(x == std::vector<std::int64_t>{3, 5});
    CHECK(r == 6);
  }

  SUBCASE("matches the modular-chain hand trace") {
    const std::vector<double> lambda = {2.0, 0.5};
    std::vector<std::int64_t> x = {3, 5};
    std::uint64_t r = 0;
    diag_forward(x, lambda, 0, r, 4);
    CHECK(x == std::vector<std::int64_t>{6, 2});
    CHECK(r == 8);
    diag_inverse(x, lambda, 0, r, 4);
    CHECK(x == std::vector<std::int64_t>{3, 5});
    CHECK(r == 0);
  }
}

TEST_CASE("permutation layers") {
  const std::vector<std::uint32_t> rev = {3, 2, 1, 0};
  std::vector<std::int64_t> x = {10, 20, 30, 40};
  permute_forward(x, rev);
  CHECK(x == std::vector<std::int64_t>{40, 30, 20, 10});
  permute_inverse(x, rev);
  CHECK(x == std::vector<std::int64_t>{10, 20, 30, 40});

  std::mt19937_64 rng(17);
  std::vector<std::uint32_t> perm = {0, 1, 2, 3, 4, 5};
  for (int trial = 0; trial < 100; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::int64_t> v = {1, 2, 3, 4, 5, 6};
    permute_forward(v, perm);
    permute_inverse(v, perm);
    REQUIRE(v == std::vector<std::int64_t>{1, 2, 3, 4, 5, 6});
  }
}

TEST_CASE("1x1 convolution round trips") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;

  SUBCASE("all-identity factors reduce to the permutation") {
    Conv1x1Layer layer;
    layer.dim = 6;
    layer.channels = 3;
    layer.perm = {2, 0, 1};
    layer.lower = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    layer.upper = layer.lower;
    layer.lambda = {1, 1, 1};
    std::vector<std::int64_t> x = {1, 2, 3, 4, 5, 6};
    std::uint64_t r = 0;
    conv1x1_forward(layer, x, 10, r, 16);
    CHECK(x == std::vector<std::int64_t>{3, 1, 2, 6, 4, 5});
    CHECK(r == 0);
    conv1x1_inverse(layer, x, 10, r, 16);
    CHECK(x == std::vector<std::int64_t>{1, 2, 3, 4, 5, 6});
  }

  SUBCASE("random factors") {
    for (int trial = 0; trial < 200; ++trial) {
      Conv1x1Layer layer;
      layer.dim = 12;
      layer.channels = 4;
      layer.perm = {0, 1, 2, 3};
      std::shuffle(layer.perm.begin(), layer.perm.end(), rng);
      layer.lower.assign(16, 0.0);
      layer.upper.assign(16, 0.0);
      for (int i = 0; i < 4; ++i) {
        layer.lower[4 * i + i] = 1.0;
        layer.upper[4 * i + i] = 1.0;
        for (int j = 0; j < i; ++j) {
          layer.lower[4 * i + j] = 0.2 * normal(rng);
          layer.upper[4 * j + i] = 0.2 * normal(rng);
        }
      }
      // positive diagonal with product exactly one in log space
      const double l0 = 0.3 * normal(rng), l1 = 0.3 * normal(rng);
      layer.lambda = {std::exp(l0), std::exp(l1), std::exp(-l0),
                      std::exp(-l1)};
      std::vector<std::int64_t> x(12);
      for (auto& v : x) {
        v = static_cast<std::int64_t>(rng() % (1u << 12)) - (1 << 11);
      }
      const std::vector<std::int64_t> orig = x;
      std::uint64_t r = rng() % (1u << 16);
      const std::uint64_t r0 = r;
      conv1x1_forward(layer, x, 14, r, 16);
      CHECK(r < (1u << 16));
      conv1x1_inverse(layer, x, 14, r, 16);
      REQUIRE(x == orig);
      REQUIRE(r == r0);
    }
  }
}

TEST_CASE("factor-out layer") {
  std::mt19937_64 rng(29);
  FactorOutLayer layer;
  layer.dim = 6;
  layer.dim_keep = 4;
  layer.dim_factor = 2;
  layer.inner.dim = 6;
  layer.inner.dim_b = 2;
  layer.inner.alpha = 0.3;
  layer.inner.net = random_net(rng, 4, 4);
  layer.head = random_net(rng, 4, 4);
  layer.mu_scale = 0.5;
  layer.gamma_scale = 0.5;
  layer.gamma_bias = -3.0;

  SUBCASE("conditional parameters are deterministic in the kept part") {
    std::vector<std::int64_t> x = {3, -14, 7, 250, -9, 33};
    std::uint64_t r = 40;
    const FactorSplit split = factor_out_forward(layer, x, 12, r, 16);
    CHECK(split.kept.size() == 4);
    CHECK(split.factored.size() == 2);
    std::vector<double> mu, gamma;
    factor_out_params(layer, split.kept, 12, mu, gamma);
    CHECK(mu == split.mu);
    CHECK(gamma == split.gamma);
  }

  SUBCASE("round trips") {
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<std::int64_t> x(6);
      for (auto& v : x) {
        v = static_cast<std::int64_t>(rng() % (1u << 13)) - (1 << 12);
      }
      std::uint64_t r = rng() % (1u << 16);
      const std::uint64_t r0 = r;
      const FactorSplit split = factor_out_forward(layer, x, 12, r, 16);
      const std::vector<std::int64_t> back =
          factor_out_inverse(layer, split.kept, split.factored, 12, r, 16);
      REQUIRE(back == x);
      REQUIRE(r == r0);
    }
  }
}
