// SPDX-License-Identifier: Apache-2.0
//
// Discretized probability models for latents, exposed as monotone
// integer-valued CDFs over a bounded k-precision symbol grid. The CDF is
// evaluated lazily from the analytic mixture CDF; no tables are built.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ivpf/fixnum.hpp"

namespace ivpf {

// Per-dimension K-component mixture of Gaussians (plus the degenerate
// uniform prior used by identity models and accounting tests).
struct MixGaussPrior {
  std::uint32_t dim = 0;
  std::uint32_t components = 0;
  std::vector<double> logits;     // dim x K, softmax per dimension
  std::vector<double> mu;         // dim x K
  std::vector<double> gamma;      // dim x K, sigma^2 = exp(gamma)
};

// Support windows stretch this many max-sigmas around the component means
// before clamping to the model's global [-S, S) bound. The analytic tail
// mass beyond 16 sigma is far below 2^-20.
inline constexpr double kSupportSigmas = 16.0;

struct GaussComponent {
  double weight;
  double mu;
  double sigma;
};

// Monotone quantized CDF over mantissas [lo, lo + count) at precision k with
// total mass 2^n. cdf(0) = 0 and cdf(count) = 2^n are pinned so boundary
// bins absorb the analytic tails; interior values use
// round(Phi(edge) * (2^n - count)) + i, which guarantees freq >= 1.
class SymbolModel {
 public:
  // Mixture-backed model; the window is derived from the parameters only
  // (never from data) and clamped to [-support, support).
  static SymbolModel mixture(std::vector<GaussComponent> comps, int k, int n,
                             double support);

  // Exact dyadic model for the uniform prior over [-1/2, 1/2): 2^k bins of
  // frequency 2^(n-k) each. Requires n >= k.
  static SymbolModel uniform(int k, int n);

  std::int64_t lo_mantissa() const { return lo_; }
  std::uint32_t bin_count() const { return count_; }
  int precision() const { return k_; }
  int freq_bits() const { return n_; }

  bool contains(std::int64_t mantissa) const {
    return mantissa >= lo_ && mantissa - lo_ < static_cast<std::int64_t>(count_);
  }

  // Monotone integer CDF, cdf(0) = 0, cdf(count) = 2^n.
  std::uint32_t cdf(std::uint32_t i) const;

  // Unique i with cdf(i) <= b < cdf(i+1), by bisection.
  std::uint32_t symbol_from_cdf(std::uint32_t b) const;

  // Analytic mass of the bin centred on the given grid point:
  // Phi(z + 2^-k-1) - Phi(z - 2^-k-1).
  double bin_mass(std::int64_t mantissa) const;

  // Mixture CDF at a real point (1 for the dyadic uniform path outside use).
  double analytic_cdf(double x) const;

 private:
  std::vector<GaussComponent> comps_;
  std::int64_t lo_ = 0;
  std::uint32_t count_ = 0;
  int k_ = 0;
  int n_ = 0;
  bool dyadic_ = false;
};

// Per-dimension symbol model from a mixture prior.
SymbolModel prior_symbol_model(const MixGaussPrior& prior, std::uint32_t i,
                               int k, int n, double support);

// Conditional Gaussian (K = 1 mixture) from a factor-out head output.
SymbolModel cond_gauss_symbol_model(double mu, double log_var, int k, int n,
                                    double support);

// Mixture weights for one dimension (softmax of the logits row).
std::vector<GaussComponent> mixture_components(const MixGaussPrior& prior,
                                               std::uint32_t i);

// Standard normal CDF via erfc (accurate in the tails).
double normal_cdf(double x);

}  // namespace ivpf
