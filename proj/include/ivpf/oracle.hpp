// SPDX-License-Identifier: Apache-2.0
//
// Independent brute-force verifiers and demonstrators: exhaustive checks of
// the modular affine transform, collision/gap demos for non-volume-
// preserving maps, coder-optimality measurement, and the quantization
// error-scaling probe against the continuous reference.

#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ivpf/model.hpp"

namespace ivpf {

struct ScanReport {
  std::string domain;                   // human-readable domain description
  std::uint64_t cases = 0;              // (x, r) pairs enumerated
  std::vector<std::string> violations;  // witnesses; empty on success
  double max_error = 0.0;

  bool ok() const { return violations.empty(); }
};

// Enumerates every mantissa vector in [lo, hi)^dim(s) crossed with every
// register value in [0, 2^mod_bits) and checks, against a from-scratch
// re-implementation of the division chain: forward agreement, exact
// round-trip, register range, and global injectivity of the joint map.
ScanReport brute_force_mat_check(std::span<const double> s,
                                 std::span<const double> t, int k,
                                 int mod_bits, std::int64_t lo,
                                 std::int64_t hi);

// A contraction z = scale * x (scale < 1) cannot be a bijection on the
// k-grid; returns two distinct grid points that land in the same output
// bin. found == false means the scan width was exhausted (scale too close
// to 1 for the searched range).
struct CollisionWitness {
  bool found = false;
  std::int64_t x1 = 0;
  std::int64_t x2 = 0;
  std::int64_t z = 0;
};

CollisionWitness bijection_failure_demo(double scale, int k);

// Mean extra codelength, in bits per dimension, of coding z = scale * x
// (scale > 1) under the pushed-forward density instead of coding x
// directly; approaches log2(scale) as the sample count grows.
double codelength_gap_demo(double scale, int k, int samples,
                           std::uint64_t seed);

// Max |quantized latent - continuous latent|_inf over random inputs, per
// precision value. The quantized pass runs with the given mod_bits.
struct ErrorCurve {
  std::vector<int> k_values;
  std::vector<double> max_error;  // parallel to k_values
};

ErrorCurve error_scaling_probe(const FlowModel& model,
                               std::span<const int> k_values, int n_samples,
                               int mod_bits, std::uint64_t seed);

// Codes `count` i.i.d. draws from pmf (renormalized to 2^n) and compares
// the stream growth against the exact information content of the drawn
// sequence; also replays the decode and checks state restoration.
struct EntropyCheck {
  double entropy_bits = 0.0;  // sum over symbols of -log2 p(symbol)
  double coded_bits = 0.0;    // measured stream growth
  bool restored = false;      // decode returned the state bit-exactly
};

EntropyCheck rans_entropy_check(std::span<const double> pmf,
                                std::uint64_t count, int n,
                                std::uint64_t seed);

// Full default-scale verification sweep; prints one line per check to
// `out` and returns the number of failed checks.
int run_selftest(std::ostream& out);

}  // namespace ivpf
