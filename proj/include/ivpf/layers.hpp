// SPDX-License-Identifier: Apache-2.0
//
// Numerically invertible flow layers: coupling with MAT, 1x1 convolution as
// P*L*Lambda*U along channel blocks, plain permutation, and factor-out with
// a conditional-Gaussian head. Every layer satisfies
// inverse(forward(x, r)) == (x, r) bit-exactly.

#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ivpf/fixnum.hpp"
#include "ivpf/mat.hpp"

namespace ivpf {

// Small dense network evaluated in binary64 with a fixed sequential
// reduction order, so its output is bit-identical per input on one build.
struct DenseNet {
  struct Affine {
    std::uint32_t in = 0;
    std::uint32_t out = 0;
    std::vector<double> weight;  // row-major, out x in
    std::vector<double> bias;    // out
  };

  enum class Activation : std::uint8_t { kTanh = 0, kSwish = 1 };

  std::vector<Affine> affines;
  Activation activation = Activation::kTanh;
  bool bounded = true;  // tanh on the final affine keeps outputs in (-1, 1)

  std::vector<double> eval(std::span<const double> input) const;
};

struct CouplingLayer {
  std::uint32_t dim = 0;
  std::uint32_t dim_b = 0;  // transformed tail; dim_a = dim - dim_b passes
  double alpha = 0.0;
  DenseNet net;  // dim_a -> 2 * dim_b, outputs (s0 | t0)
};

struct Conv1x1Layer {
  std::uint32_t dim = 0;
  std::uint32_t channels = 0;         // c, must divide dim
  std::vector<std::uint32_t> perm;    // forward: z[i] = x[perm[i]]
  std::vector<double> lower;          // c x c, unit diagonal
  std::vector<double> upper;          // c x c, unit diagonal
  std::vector<double> lambda;         // positive diagonal, prod = 1

  bool lambda_is_identity() const;
};

struct PermuteLayer {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> perm;  // forward: z[i] = x[perm[i]]
};

struct FactorOutLayer {
  std::uint32_t dim = 0;
  std::uint32_t dim_keep = 0;    // y, continues through deeper layers
  std::uint32_t dim_factor = 0;  // z_l, coded against the conditional head
  CouplingLayer inner;           // transform applied before the split
  DenseNet head;                 // dim_keep -> 2 * dim_factor, (mu0 | g0)
  // Conditional parameters: mu = mu_scale * mu0,
  // log-variance gamma = gamma_scale * g0 + gamma_bias.
  double mu_scale = 1.0;
  double gamma_scale = 1.0;
  double gamma_bias = 0.0;
};

using Layer =
    std::variant<CouplingLayer, Conv1x1Layer, PermuteLayer, FactorOutLayer>;

// s = alpha * (tanh(s0) - mean(tanh(s0))), t = alpha * t0. The projected s
// sums to zero up to binary64 rounding, so exp(s) is volume preserving.
void vp_project(std::span<const double> s0, std::span<const double> t0,
                double alpha, std::span<double> s_out,
                std::span<double> t_out);

// Evaluates the coupling net on x_a and returns (exp_s, t) for the tail.
void coupling_coefficients(const CouplingLayer& layer,
                           std::span<const std::int64_t> x, int k,
                           std::vector<double>& exp_s, std::vector<double>& t);

void coupling_forward(const CouplingLayer& layer, std::span<std::int64_t> x,
                      int k, std::uint64_t& r, int mod_bits);
void coupling_inverse(const CouplingLayer& layer, std::span<std::int64_t> z,
                      int k, std::uint64_t& r, int mod_bits);

// z_i = x_i + round(sum_{j>i} u_ij x_j), z_{c-1} = x_{c-1}. One quantization
// per output element; the dot product runs in binary64 in ascending j.
void tri_upper_forward(std::span<std::int64_t> x, std::span<const double> u,
                       std::uint32_t c, int k);
void tri_upper_inverse(std::span<std::int64_t> z, std::span<const double> u,
                       std::uint32_t c, int k);
void tri_lower_forward(std::span<std::int64_t> x, std::span<const double> l,
                       std::uint32_t c, int k);
void tri_lower_inverse(std::span<std::int64_t> z, std::span<const double> l,
                       std::uint32_t c, int k);

// Diagonal scaling delegates to MAT with s = lambda, t = 0.
void diag_forward(std::span<std::int64_t> x, std::span<const double> lambda,
                  int k, std::uint64_t& r, int mod_bits);
void diag_inverse(std::span<std::int64_t> z, std::span<const double> lambda,
                  int k, std::uint64_t& r, int mod_bits);

void permute_forward(std::span<std::int64_t> x,
                     std::span<const std::uint32_t> perm);
void permute_inverse(std::span<std::int64_t> z,
                     std::span<const std::uint32_t> perm);

// Applies U, Lambda (MAT), L, then P to each channel block; the inverse
// applies P^-1, L^-1, Lambda^-1, U^-1.
void conv1x1_forward(const Conv1x1Layer& layer, std::span<std::int64_t> x,
                     int k, std::uint64_t& r, int mod_bits);
void conv1x1_inverse(const Conv1x1Layer& layer, std::span<std::int64_t> z,
                     int k, std::uint64_t& r, int mod_bits);

// Factor-out: inner coupling, then split [y | z_l]; the head on y gives the
// conditional Gaussian parameters for z_l. mu/gamma are binary64 (they
// parameterize the PMF, not the bijection).
struct FactorSplit {
  std::vector<std::int64_t> kept;      // y
  std::vector<std::int64_t> factored;  // z_l
  std::vector<double> mu;
  std::vector<double> gamma;
};

FactorSplit factor_out_forward(const FactorOutLayer& layer,
                               std::span<const std::int64_t> x, int k,
                               std::uint64_t& r, int mod_bits);

// Conditional parameters for z_l given the kept part y.
void factor_out_params(const FactorOutLayer& layer,
                       std::span<const std::int64_t> kept, int k,
                       std::vector<double>& mu, std::vector<double>& gamma);

std::vector<std::int64_t> factor_out_inverse(
    const FactorOutLayer& layer, std::span<const std::int64_t> kept,
    std::span<const std::int64_t> factored, int k, std::uint64_t& r,
    int mod_bits);

}  // namespace ivpf
