// SPDX-License-Identifier: Apache-2.0

#include "ivpf/prior.hpp"

#include <algorithm>
#include <cmath>

namespace ivpf {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

std::vector<GaussComponent> mixture_components(const MixGaussPrior& prior,
                                               std::uint32_t i) {
  const std::uint32_t K = prior.components;
  if (i >= prior.dim || K == 0) {
    throw domain_error("prior: dimension index out of range");
  }
  const double* logits = prior.logits.data() + std::size_t{i} * K;
  const double* mu = prior.mu.data() + std::size_t{i} * K;
  const double* gamma = prior.gamma.data() + std::size_t{i} * K;
  double max_logit = logits[0];
  for (std::uint32_t c = 1; c < K; ++c) max_logit = std::max(max_logit, logits[c]);
  double denom = 0.0;
  std::vector<GaussComponent> comps(K);
  for (std::uint32_t c = 0; c < K; ++c) {
    comps[c].weight = std::exp(logits[c] - max_logit);
    denom += comps[c].weight;
    comps[c].mu = mu[c];
    comps[c].sigma = std::exp(0.5 * gamma[c]);
    if (!(comps[c].sigma > 0.0) || !std::isfinite(comps[c].sigma)) {
      throw domain_error("prior: non-positive sigma");
    }
  }
  for (auto& c : comps) c.weight /= denom;
  return comps;
}

SymbolModel SymbolModel::mixture(std::vector<GaussComponent> comps, int k,
                                 int n, double support) {
  if (k < 0 || k > kMaxPrecision || n < 1 || n > 30) {
    throw domain_error("symbol model: bad (k, n)");
  }
  if (!(support > 0.0)) {
    throw domain_error("symbol model: support bound must be positive");
  }
  double lo = support, hi = -support;
  for (const auto& c : comps) {
    lo = std::min(lo, c.mu - kSupportSigmas * c.sigma);
    hi = std::max(hi, c.mu + kSupportSigmas * c.sigma);
  }
  lo = std::max(lo, -support);
  hi = std::min(hi, support);

  SymbolModel m;
  m.comps_ = std::move(comps);
  m.k_ = k;
  m.n_ = n;
  m.lo_ = static_cast<std::int64_t>(std::floor(std::ldexp(lo, k)));
  const std::int64_t hi_mant =
      static_cast<std::int64_t>(std::ceil(std::ldexp(hi, k)));
  const std::int64_t count = hi_mant - m.lo_;
  if (count < 1) {
    throw domain_error("symbol model: empty support window");
  }
  if (count >= (std::int64_t{1} << n)) {
    throw domain_error("symbol model: support needs more frequency bits");
  }
  m.count_ = static_cast<std::uint32_t>(count);
  return m;
}

SymbolModel SymbolModel::uniform(int k, int n) {
  if (k < 0 || k > kMaxPrecision || n < k || n > 30) {
    throw domain_error("symbol model: uniform prior needs k <= n <= 30");
  }
  SymbolModel m;
  m.k_ = k;
  m.n_ = n;
  m.lo_ = -(std::int64_t{1} << (k == 0 ? 0 : k - 1));
  if (k == 0) m.lo_ = 0;  // single bin covering [-1/2, 1/2)
  m.count_ = std::uint32_t{1} << k;
  m.dyadic_ = true;
  return m;
}

double SymbolModel::analytic_cdf(double x) const {
  if (dyadic_) {
    return std::clamp(x + 0.5, 0.0, 1.0);
  }
  double acc = 0.0;
  for (const auto& c : comps_) {
    acc += c.weight * normal_cdf((x - c.mu) / c.sigma);
  }
  return acc;
}

std::uint32_t SymbolModel::cdf(std::uint32_t i) const {
  if (i > count_) {
    throw domain_error("symbol model: bin index out of range");
  }
  if (dyadic_) {
    return i << (n_ - k_);
  }
  if (i == 0) return 0;
  const std::uint64_t total = std::uint64_t{1} << n_;
  if (i == count_) return static_cast<std::uint32_t>(total);
  // Left edge of bin i; bins are centred on grid points.
  const double edge =
      std::ldexp(static_cast<double>(lo_ + i) - 0.5, -k_);
  const double stretch = static_cast<double>(total - count_);
  const auto base =
      static_cast<std::uint64_t>(std::llround(analytic_cdf(edge) * stretch));
  return static_cast<std::uint32_t>(base + i);
}

std::uint32_t SymbolModel::symbol_from_cdf(std::uint32_t b) const {
  if (dyadic_) {
    return b >> (n_ - k_);
  }
  std::uint32_t lo = 0, hi = count_;  // invariant: cdf(lo) <= b < cdf(hi)
  while (hi - lo > 1) {
    const std::uint32_t mid = lo + (hi - lo) / 2;
    if (cdf(mid) <= b) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double SymbolModel::bin_mass(std::int64_t mantissa) const {
  const double half = std::ldexp(1.0, -k_ - 1);
  const double z = to_real(mantissa, k_);
  return analytic_cdf(z + half) - analytic_cdf(z - half);
}

SymbolModel prior_symbol_model(const MixGaussPrior& prior, std::uint32_t i,
                               int k, int n, double support) {
  return SymbolModel::mixture(mixture_components(prior, i), k, n, support);
}

SymbolModel cond_gauss_symbol_model(double mu, double log_var, int k, int n,
                                    double support) {
  return SymbolModel::mixture({{1.0, mu, std::exp(0.5 * log_var)}}, k, n,
                              support);
}

}  // namespace ivpf
