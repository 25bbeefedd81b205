// SPDX-License-Identifier: Apache-2.0

#include "ivpf/layers.hpp"

#include <cmath>
#include <cstdlib>

namespace ivpf {

namespace {

constexpr double kVpTolerance = 1e-6;  // |sum s_i| bound at layer build

double activate(double v, DenseNet::Activation act) {
  switch (act) {
    case DenseNet::Activation::kTanh:
      return std::tanh(v);
    case DenseNet::Activation::kSwish:
      return v / (1.0 + std::exp(-v));
  }
  throw domain_error("dense net: unknown activation");
}

std::vector<double> tail_reals(std::span<const std::int64_t> x,
                               std::size_t from, int k) {
  std::vector<double> out(x.size() - from);
  for (std::size_t i = from; i < x.size(); ++i) {
    out[i - from] = to_real(x[i], k);
  }
  return out;
}

}  // namespace

std::vector<double> DenseNet::eval(std::span<const double> input) const {
  if (affines.empty()) {
    throw domain_error("dense net: no layers");
  }
  std::vector<double> cur(input.begin(), input.end());
  for (std::size_t l = 0; l < affines.size(); ++l) {
    const Affine& a = affines[l];
    if (cur.size() != a.in) {
      throw domain_error("dense net: input dimension mismatch");
    }
    std::vector<double> next(a.out);
    for (std::uint32_t i = 0; i < a.out; ++i) {
      double acc = a.bias[i];
      const double* row = a.weight.data() + std::size_t{i} * a.in;
      for (std::uint32_t j = 0; j < a.in; ++j) {  // fixed reduction order
        acc += row[j] * cur[j];
      }
      next[i] = acc;
    }
    const bool last = l + 1 == affines.size();
    if (!last) {
      for (double& v : next) v = activate(v, activation);
    } else if (bounded) {
      for (double& v : next) v = std::tanh(v);
    }
    cur = std::move(next);
  }
  for (double v : cur) {
    if (!std::isfinite(v)) {
      throw domain_error("dense net: non-finite output");
    }
  }
  return cur;
}

void vp_project(std::span<const double> s0, std::span<const double> t0,
                double alpha, std::span<double> s_out,
                std::span<double> t_out) {
  if (s0.size() != s_out.size() || t0.size() != t_out.size()) {
    throw domain_error("vp_project: dimension mismatch");
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < s0.size(); ++i) {
    s_out[i] = std::tanh(s0[i]);
    mean += s_out[i];
  }
  mean /= static_cast<double>(s0.size());
  for (std::size_t i = 0; i < s0.size(); ++i) {
    s_out[i] = alpha * (s_out[i] - mean);
  }
  for (std::size_t i = 0; i < t0.size(); ++i) {
    t_out[i] = alpha * t0[i];
  }
}

void coupling_coefficients(const CouplingLayer& layer,
                           std::span<const std::int64_t> x, int k,
                           std::vector<double>& exp_s,
                           std::vector<double>& t) {
  const std::uint32_t da = layer.dim - layer.dim_b;
  std::vector<double> xa(da);
  for (std::uint32_t i = 0; i < da; ++i) {
    xa[i] = to_real(x[i], k);
  }
  const std::vector<double> out = layer.net.eval(xa);
  if (out.size() != 2u * layer.dim_b) {
    throw domain_error("coupling: net output dimension mismatch");
  }
  std::vector<double> s(layer.dim_b);
  t.resize(layer.dim_b);
  vp_project(std::span(out).first(layer.dim_b),
             std::span(out).subspan(layer.dim_b), layer.alpha, s, t);
  double log_sum = 0.0;
  exp_s.resize(layer.dim_b);
  for (std::uint32_t i = 0; i < layer.dim_b; ++i) {
    log_sum += s[i];
    exp_s[i] = std::exp(s[i]);
  }
  if (std::fabs(log_sum) > kVpTolerance) {
    throw domain_error("coupling: volume-preserving constraint violated");
  }
}

void coupling_forward(const CouplingLayer& layer, std::span<std::int64_t> x,
                      int k, std::uint64_t& r, int mod_bits) {
  if (x.size() != layer.dim || layer.dim_b == 0 || layer.dim_b >= layer.dim) {
    throw domain_error("coupling: bad split");
  }
  std::vector<double> exp_s, t;
  coupling_coefficients(layer, x, k, exp_s, t);
  mat_forward(x.subspan(layer.dim - layer.dim_b), exp_s, t, k, r, mod_bits);
}

void coupling_inverse(const CouplingLayer& layer, std::span<std::int64_t> z,
                      int k, std::uint64_t& r, int mod_bits) {
  if (z.size() != layer.dim || layer.dim_b == 0 || layer.dim_b >= layer.dim) {
    throw domain_error("coupling: bad split");
  }
  std::vector<double> exp_s, t;
  coupling_coefficients(layer, z, k, exp_s, t);  // z_a == x_a
  mat_inverse(z.subspan(layer.dim - layer.dim_b), exp_s, t, k, r, mod_bits);
}

void tri_upper_forward(std::span<std::int64_t> x, std::span<const double> u,
                       std::uint32_t c, int k) {
  // Ascending i reads only x[j > i], which is still untouched.
  for (std::uint32_t i = 0; i + 1 < c; ++i) {
    double acc = 0.0;
    for (std::uint32_t j = i + 1; j < c; ++j) {
      acc += u[std::size_t{i} * c + j] * to_real(x[j], k);
    }
    x[i] += quantize_mantissa(acc, k);
  }
}

void tri_upper_inverse(std::span<std::int64_t> z, std::span<const double> u,
                       std::uint32_t c, int k) {
  for (std::uint32_t i = c - 1; i-- > 0;) {
    double acc = 0.0;
    for (std::uint32_t j = i + 1; j < c; ++j) {
      acc += u[std::size_t{i} * c + j] * to_real(z[j], k);
    }
    z[i] -= quantize_mantissa(acc, k);
  }
}

void tri_lower_forward(std::span<std::int64_t> x, std::span<const double> l,
                       std::uint32_t c, int k) {
  for (std::uint32_t i = c; i-- > 1;) {
    double acc = 0.0;
    for (std::uint32_t j = 0; j < i; ++j) {
      acc += l[std::size_t{i} * c + j] * to_real(x[j], k);
    }
    x[i] += quantize_mantissa(acc, k);
  }
}

void tri_lower_inverse(std::span<std::int64_t> z, std::span<const double> l,
                       std::uint32_t c, int k) {
  for (std::uint32_t i = 1; i < c; ++i) {
    double acc = 0.0;
    for (std::uint32_t j = 0; j < i; ++j) {
      acc += l[std::size_t{i} * c + j] * to_real(z[j], k);
    }
    z[i] -= quantize_mantissa(acc, k);
  }
}

void diag_forward(std::span<std::int64_t> x, std::span<const double> lambda,
                  int k, std::uint64_t& r, int mod_bits) {
  const std::vector<double> zeros(lambda.size(), 0.0);
  mat_forward(x, lambda, zeros, k, r, mod_bits);
}

void diag_inverse(std::span<std::int64_t> z, std::span<const double> lambda,
                  int k, std::uint64_t& r, int mod_bits) {
  const std::vector<double> zeros(lambda.size(), 0.0);
  mat_inverse(z, lambda, zeros, k, r, mod_bits);
}

void permute_forward(std::span<std::int64_t> x,
                     std::span<const std::uint32_t> perm) {
  std::vector<std::int64_t> tmp(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = tmp[perm[i]];
  }
}

void permute_inverse(std::span<std::int64_t> z,
                     std::span<const std::uint32_t> perm) {
  std::vector<std::int64_t> tmp(z.begin(), z.end());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[perm[i]] = tmp[i];
  }
}

bool Conv1x1Layer::lambda_is_identity() const {
  for (double v : lambda) {
    if (v != 1.0) return false;
  }
  return true;
}

void conv1x1_forward(const Conv1x1Layer& layer, std::span<std::int64_t> x,
                     int k, std::uint64_t& r, int mod_bits) {
  const std::uint32_t c = layer.channels;
  if (c == 0 || x.size() % c != 0) {
    throw domain_error("conv1x1: channel count must divide dim");
  }
  const bool scale = !layer.lambda_is_identity();
  const std::vector<double> zeros(c, 0.0);
  ModulusChain chain;
  if (scale) chain = compute_moduli(layer.lambda, mod_bits);
  for (std::size_t p = 0; p < x.size(); p += c) {
    auto block = x.subspan(p, c);
    tri_upper_forward(block, layer.upper, c, k);
    if (scale) mat_forward(block, chain, zeros, k, r);
    tri_lower_forward(block, layer.lower, c, k);
    permute_forward(block, layer.perm);
  }
}

void conv1x1_inverse(const Conv1x1Layer& layer, std::span<std::int64_t> z,
                     int k, std::uint64_t& r, int mod_bits) {
  const std::uint32_t c = layer.channels;
  if (c == 0 || z.size() % c != 0) {
    throw domain_error("conv1x1: channel count must divide dim");
  }
  const bool scale = !layer.lambda_is_identity();
  const std::vector<double> zeros(c, 0.0);
  ModulusChain chain;
  if (scale) chain = compute_moduli(layer.lambda, mod_bits);
  // Blocks in reverse so the r-chain unwinds in the exact opposite order.
  for (std::size_t p = z.size(); p > 0; p -= c) {
    auto block = z.subspan(p - c, c);
    permute_inverse(block, layer.perm);
    tri_lower_inverse(block, layer.lower, c, k);
    if (scale) mat_inverse(block, chain, zeros, k, r);
    tri_upper_inverse(block, layer.upper, c, k);
  }
}

void factor_out_params(const FactorOutLayer& layer,
                       std::span<const std::int64_t> kept, int k,
                       std::vector<double>& mu, std::vector<double>& gamma) {
  std::vector<double> y(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    y[i] = to_real(kept[i], k);
  }
  const std::vector<double> out = layer.head.eval(y);
  if (out.size() != 2u * layer.dim_factor) {
    throw domain_error("factor-out: head output dimension mismatch");
  }
  mu.resize(layer.dim_factor);
  gamma.resize(layer.dim_factor);
  for (std::uint32_t i = 0; i < layer.dim_factor; ++i) {
    mu[i] = layer.mu_scale * out[i];
    gamma[i] = layer.gamma_scale * out[layer.dim_factor + i] + layer.gamma_bias;
  }
}

FactorSplit factor_out_forward(const FactorOutLayer& layer,
                               std::span<const std::int64_t> x, int k,
                               std::uint64_t& r, int mod_bits) {
  if (x.size() != layer.dim ||
      layer.dim_keep + layer.dim_factor != layer.dim) {
    throw domain_error("factor-out: bad split");
  }
  std::vector<std::int64_t> work(x.begin(), x.end());
  coupling_forward(layer.inner, work, k, r, mod_bits);
  FactorSplit split;
  split.kept.assign(work.begin(), work.begin() + layer.dim_keep);
  split.factored.assign(work.begin() + layer.dim_keep, work.end());
  factor_out_params(layer, split.kept, k, split.mu, split.gamma);
  return split;
}

std::vector<std::int64_t> factor_out_inverse(
    const FactorOutLayer& layer, std::span<const std::int64_t> kept,
    std::span<const std::int64_t> factored, int k, std::uint64_t& r,
    int mod_bits) {
  if (kept.size() != layer.dim_keep || factored.size() != layer.dim_factor) {
    throw domain_error("factor-out: bad split");
  }
  std::vector<std::int64_t> work;
  work.reserve(layer.dim);
  work.insert(work.end(), kept.begin(), kept.end());
  work.insert(work.end(), factored.begin(), factored.end());
  coupling_inverse(layer.inner, work, k, r, mod_bits);
  return work;
}

}  // namespace ivpf
