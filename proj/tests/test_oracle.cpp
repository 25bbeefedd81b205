// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ivpf/oracle.hpp"

using namespace ivpf;

TEST_CASE("exhaustive scan finds no violations on admissible scales") {
  const double s[] = {2.0, 0.5};
  const double t[] = {0.4, -0.9};
  const ScanReport report = brute_force_mat_check(s, t, 2, 3, -8, 8);
  CHECK(report.cases == 16 * 16 * 8);
  CHECK(report.ok());
  CHECK(report.violations.empty());
}

TEST_CASE("identity scales scan trivially") {
  const double s[] = {1.0, 1.0, 1.0};
  const double t[] = {0.0, 0.0, 0.0};
  const ScanReport report = brute_force_mat_check(s, t, 0, 3, -4, 4);
  CHECK(report.cases == 8ull * 8 * 8 * 8);
  CHECK(report.ok());
}

TEST_CASE("contractions collide on the grid") {
  SUBCASE("strong contraction at coarse precision") {
    const CollisionWitness w = bijection_failure_demo(0.5, 3);
    REQUIRE(w.found);
    CHECK(w.x1 != w.x2);
    // confirm the witness independently
    CHECK(std::llround(0.5 * w.x1) == w.z);
    CHECK(std::llround(0.5 * w.x2) == w.z);
  }
  SUBCASE("mild contraction still collides by pigeonhole") {
    CHECK(bijection_failure_demo(0.9, 8).found);
  }
  SUBCASE("the identity never collides") {
    CHECK_FALSE(bijection_failure_demo(1.0, 8).found);
  }
}

TEST_CASE("expansions pay log2(scale) bits per dimension") {
  CHECK(std::fabs(codelength_gap_demo(1.0, 14, 20000, 2)) < 0.01);
  const double gap2 = codelength_gap_demo(2.0, 14, 50000, 2);
  CHECK(std::fabs(gap2 - 1.0) < 0.03);
  const double gap4 = codelength_gap_demo(4.0, 14, 50000, 2);
  CHECK(std::fabs(gap4 - 2.0) < 0.06);
}

TEST_CASE("coder entropy harness") {
  const std::vector<double> pmf = {0.55, 0.25, 0.12, 0.05, 0.03};
  const EntropyCheck check = rans_entropy_check(pmf, 100000, 16, 9);
  CHECK(check.restored);
  CHECK(check.coded_bits < check.entropy_bits * 1.001);
  CHECK(check.coded_bits > check.entropy_bits * 0.99);
}

TEST_CASE("quantization error decays with precision") {
  InitOptions opt;
  opt.layers = 4;
  opt.seed = 13;
  opt.alpha = 0.1;
  const FlowModel model = random_init({4, 3}, opt);
  const int ks[] = {8, 10, 12, 14};
  const ErrorCurve curve = error_scaling_probe(model, ks, 128, 24, 31);
  REQUIRE(curve.max_error.size() == 4);
  for (std::size_t i = 1; i < curve.max_error.size(); ++i) {
    CHECK(curve.max_error[i] > 0.0);
    const double per_unit =
        std::sqrt(curve.max_error[i] / curve.max_error[i - 1]);
    CHECK(per_unit > 0.2);
    CHECK(per_unit < 0.8);
  }
}

TEST_CASE("selftest sweep passes") {
  std::ostringstream out;
  CHECK(run_selftest(out) == 0);
  CHECK(out.str().find("FAIL") == std::string::npos);
  CHECK(out.str().find("pass") != std::string::npos);
}
