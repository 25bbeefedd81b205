// SPDX-License-Identifier: Apache-2.0

#include "ivpf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ivpf/codec.hpp"
#include "ivpf/layers.hpp"
#include "ivpf/mat.hpp"
#include "ivpf/rans.hpp"

namespace ivpf {

namespace {

// Deliberately independent of the mat module: own modulus computation and
// own Euclidean division, so a shared bug cannot hide.
std::vector<std::uint64_t> oracle_moduli(std::span<const double> s,
                                         int mod_bits) {
  std::vector<std::uint64_t> m(s.size() + 1);
  const double base = std::ldexp(1.0, mod_bits);
  m[0] = static_cast<std::uint64_t>(base);
  double prod = 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    prod *= s[i];
    const double v = base / prod;
    m[i + 1] = v <= 1.0 ? 1 : static_cast<std::uint64_t>(std::llround(v));
  }
  return m;
}

// Euclidean quotient/remainder with rem in [0, den), written the long way.
void oracle_divmod(__int128 num, std::uint64_t den, std::int64_t& quot,
                   std::uint64_t& rem) {
  __int128 q = num / static_cast<__int128>(den);
  __int128 r = num % static_cast<__int128>(den);
  if (r < 0) {
    q -= 1;
    r += static_cast<__int128>(den);
  }
  quot = static_cast<std::int64_t>(q);
  rem = static_cast<std::uint64_t>(r);
}

std::vector<std::int64_t> oracle_forward(std::span<const std::int64_t> x,
                                         std::span<const std::uint64_t> m,
                                         std::span<const double> t, int k,
                                         std::uint64_t& r) {
  std::vector<std::int64_t> z(x.begin(), x.end());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const __int128 v = static_cast<__int128>(z[i]) *
                           static_cast<__int128>(m[i]) +
                       static_cast<__int128>(r);
    std::int64_t q;
    oracle_divmod(v, m[i + 1], q, r);
    z[i] = q + std::llround(std::ldexp(t[i], k));
  }
  return z;
}

std::string join_vec(std::span<const std::int64_t> v) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    os << (i ? "," : "") << v[i];
  }
  os << ")";
  return os.str();
}

}  // namespace

ScanReport brute_force_mat_check(std::span<const double> s,
                                 std::span<const double> t, int k,
                                 int mod_bits, std::int64_t lo,
                                 std::int64_t hi) {
  const std::size_t d = s.size();
  const std::uint64_t mod = std::uint64_t{1} << mod_bits;
  const std::uint64_t width = static_cast<std::uint64_t>(hi - lo);

  ScanReport report;
  {
    std::ostringstream os;
    os << "mat d=" << d << " k=" << k << " C=" << mod_bits << " x in ["
       << lo << "," << hi << ")";
    report.domain = os.str();
  }

  const ModulusChain chain = compute_moduli(s, mod_bits);
  const std::vector<std::uint64_t> m2 = oracle_moduli(s, mod_bits);
  if (!std::equal(chain.m.begin(), chain.m.end(), m2.begin(), m2.end())) {
    report.violations.push_back("modulus chains disagree");
    return report;
  }

  // Outputs collected for the exact injectivity check.
  std::vector<std::vector<std::int64_t>> outputs;

  std::vector<std::int64_t> x(d, lo);
  bool done = false;
  while (!done) {
    for (std::uint64_t r0 = 0; r0 < mod; ++r0) {
      ++report.cases;
      std::uint64_t r_ref = r0;
      const std::vector<std::int64_t> z_ref =
          oracle_forward(x, m2, t, k, r_ref);

      std::vector<std::int64_t> z(x);
      std::uint64_t r = r0;
      mat_forward(z, chain, t, k, r);
      if (z != z_ref || r != r_ref) {
        report.violations.push_back("forward mismatch at x=" + join_vec(x) +
                                    " r=" + std::to_string(r0));
        continue;
      }
      if (r >= mod) {
        report.violations.push_back("register out of range at x=" +
                                    join_vec(x));
      }

      std::vector<std::int64_t> back(z);
      std::uint64_t r_back = r;
      mat_inverse(back, chain, t, k, r_back);
      if (back != x || r_back != r0) {
        report.violations.push_back("round trip failed at x=" + join_vec(x) +
                                    " r=" + std::to_string(r0));
      }

      std::vector<std::int64_t> out = std::move(z);
      out.push_back(static_cast<std::int64_t>(r));
      outputs.push_back(std::move(out));
    }
    // Odometer over the mantissa cube.
    std::size_t pos = 0;
    while (pos < d) {
      if (static_cast<std::uint64_t>(++x[pos] - lo) < width) break;
      x[pos++] = lo;
    }
    done = pos == d;
  }

  std::sort(outputs.begin(), outputs.end());
  for (std::size_t i = 1; i < outputs.size(); ++i) {
    if (outputs[i] == outputs[i - 1]) {
      report.violations.push_back("two inputs share output " +
                                  join_vec(outputs[i]));
    }
  }
  return report;
}

CollisionWitness bijection_failure_demo(double scale, int k) {
  CollisionWitness w;
  if (!(scale > 0.0)) throw domain_error("demo: scale must be positive");
  const std::int64_t limit = std::int64_t{1} << std::min(k + 8, 24);
  std::int64_t prev_z = 0;
  bool have_prev = false;
  for (std::int64_t x = 0; x <= limit; ++x) {
    const std::int64_t z = quantize_mantissa(scale * to_real(x, k), k);
    if (have_prev && z == prev_z) {
      w.found = true;
      w.x1 = x - 1;
      w.x2 = x;
      w.z = z;
      return w;
    }
    prev_z = z;
    have_prev = true;
  }
  return w;
}

double codelength_gap_demo(double scale, int k, int samples,
                           std::uint64_t seed) {
  if (!(scale > 0.0)) throw domain_error("demo: scale must be positive");
  const double sigma = 0.3;
  const double delta = std::ldexp(1.0, -k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  const auto log2_density = [](double v, double sd) {
    return -0.5 * (v / sd) * (v / sd) / std::numbers::ln2 -
           std::log2(sd * std::sqrt(2.0 * std::numbers::pi));
  };
  double total = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = to_real(quantize_mantissa(normal(rng), k), k);
    const double z = to_real(quantize_mantissa(scale * x, k), k);
    const double bits_x = -(log2_density(x, sigma) + std::log2(delta));
    const double bits_z = -(log2_density(z, scale * sigma) + std::log2(delta));
    total += bits_z - bits_x;
  }
  return total / samples;
}

ErrorCurve error_scaling_probe(const FlowModel& model,
                               std::span<const int> k_values, int n_samples,
                               int mod_bits, std::uint64_t seed) {
  ErrorCurve curve;
  const std::uint32_t d = model.dim();
  for (int k : k_values) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.45, 0.45);
    double worst = 0.0;
    for (int s = 0; s < n_samples; ++s) {
      std::vector<std::int64_t> x(d);
      std::vector<double> xr(d);
      for (std::uint32_t i = 0; i < d; ++i) {
        x[i] = quantize_mantissa(unif(rng), k);
        xr[i] = to_real(x[i], k);  // same grid point for both paths
      }
      const FlowForwardResult fwd = flow_forward(model, x, k, 0, mod_bits);
      const std::vector<double> z = continuous_eval(model, xr);
      std::size_t pos = 0;
      for (const FactoredLatent& fl : fwd.factored) {
        for (std::int64_t mv : fl.mantissas) {
          worst = std::max(worst, std::fabs(to_real(mv, k) - z[pos++]));
        }
      }
      for (std::int64_t mv : fwd.latent) {
        worst = std::max(worst, std::fabs(to_real(mv, k) - z[pos++]));
      }
    }
    curve.k_values.push_back(k);
    curve.max_error.push_back(worst);
  }
  return curve;
}

EntropyCheck rans_entropy_check(std::span<const double> pmf,
                                std::uint64_t count, int n,
                                std::uint64_t seed) {
  if (pmf.size() < 2 || n < 1 || n > 30) {
    throw domain_error("entropy check: bad pmf or n");
  }
  // Quantize the pmf to integer frequencies summing to 2^n, each >= 1.
  const std::uint32_t total = std::uint32_t{1} << n;
  double mass = 0.0;
  for (double p : pmf) {
    if (!(p > 0.0)) throw domain_error("entropy check: pmf must be positive");
    mass += p;
  }
  std::vector<std::uint32_t> freq(pmf.size());
  std::uint32_t assigned = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const auto budget = static_cast<std::uint32_t>(total - assigned);
    const auto rest = static_cast<std::uint32_t>(pmf.size() - 1 - i);
    auto f = static_cast<std::uint32_t>(
        std::llround(pmf[i] / mass * static_cast<double>(total)));
    f = std::clamp<std::uint32_t>(f, 1, budget - rest);
    freq[i] = f;
    assigned += f;
  }
  freq.back() += total - assigned;
  std::vector<std::uint32_t> cum(pmf.size() + 1, 0);
  for (std::size_t i = 0; i < pmf.size(); ++i) cum[i + 1] = cum[i] + freq[i];

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::uint32_t> dist(freq.begin(), freq.end());
  std::vector<std::uint32_t> symbols(count);
  std::vector<std::uint64_t> hits(pmf.size(), 0);
  for (auto& sym : symbols) {
    sym = dist(rng);
    ++hits[sym];
  }
  // Information content of the drawn sequence under the quantized model;
  // this is the exact lower bound for the coder, free of sampling noise.
  double entropy = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    entropy += static_cast<double>(hits[i]) *
               (n - std::log2(static_cast<double>(freq[i])));
  }

  RansState state;
  const RansState initial = state;
  const std::uint64_t before = state.bit_content();
  for (auto it = symbols.rbegin(); it != symbols.rend(); ++it) {
    state.encode(freq[*it], cum[*it], n);
  }
  EntropyCheck check;
  check.entropy_bits = entropy;
  check.coded_bits = static_cast<double>(state.bit_content() - before);

  for (std::uint32_t expected : symbols) {
    const std::uint32_t b = state.peek(n);
    const std::uint32_t sym = static_cast<std::uint32_t>(
        std::upper_bound(cum.begin(), cum.end(), b) - cum.begin() - 1);
    state.advance(freq[sym], cum[sym], n);
    if (sym != expected) return check;  // restored stays false
  }
  check.restored = state == initial;
  return check;
}

int run_selftest(std::ostream& out) {
  int failures = 0;
  const auto check = [&](const std::string& name, bool ok) {
    out << (ok ? "pass" : "FAIL") << "  " << name << "\n";
    if (!ok) ++failures;
  };

  // Exhaustive division-chain scans over small admissible configurations.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> logs(-1.0, 1.0);
  for (int d = 1; d <= 3; ++d) {
    for (int k : {0, 2}) {
      for (int C : {3, 4}) {
        std::vector<double> s(d), t(d);
        double acc = 0.0;
        for (int i = 0; i + 1 < d; ++i) {
          s[i] = std::exp(logs(rng));
          acc += std::log(s[i]);
        }
        s[d - 1] = std::exp(-acc);  // prod(s) = 1
        for (int i = 0; i < d; ++i) t[i] = logs(rng);
        const std::int64_t bound = d == 3 ? 8 : 16;
        const ScanReport r =
            brute_force_mat_check(s, t, k, C, -bound, bound);
        check(r.domain + " [" + std::to_string(r.cases) + " cases]", r.ok());
      }
    }
  }

  // Contraction collisions and expansion codelength gaps.
  for (double scale : {0.5, 0.75, 0.9}) {
    check("collision witness at scale " + std::to_string(scale),
          bijection_failure_demo(scale, 8).found);
  }
  for (double scale : {2.0, 4.0}) {
    const double gap = codelength_gap_demo(scale, 14, 20000, 11);
    check("codelength gap at scale " + std::to_string(scale),
          std::fabs(gap - std::log2(scale)) < 0.05 * std::log2(scale));
  }

  // Coder optimality on a skewed pmf.
  {
    const std::vector<double> pmf = {0.5, 0.2, 0.15, 0.1, 0.04, 0.01};
    const EntropyCheck ec = rans_entropy_check(pmf, 200000, 14, 3);
    check("coder within 0.1% of entropy",
          ec.coded_bits < ec.entropy_bits * 1.001 && ec.restored);
  }

  // Round trips across a (h, k, C) grid on a random model.
  {
    InitOptions opt;
    opt.layers = 4;
    opt.levels = 2;
    opt.seed = 21;
    opt.alpha = 0.05;
    const FlowModel model = random_init({4, 4, 3}, opt);
    std::mt19937_64 data_rng(5);
    bool ok = true;
    for (int h : {4, 8}) {
      for (int k : {10, 14}) {
        CodecConfig config;
        config.h = h;
        config.k = k;
        std::vector<std::int64_t> x0(model.dim());
        for (auto& v : x0) {
          v = static_cast<std::int64_t>(data_rng() & ((1u << h) - 1));
        }
        const std::vector<std::uint8_t> blob = encode(x0, model, config);
        if (decode(blob, model) != x0) ok = false;
      }
    }
    check("codec round trips over the (h, k) grid", ok);
  }

  // Error decay against the continuous reference.
  {
    InitOptions opt;
    opt.layers = 4;
    opt.seed = 3;
    opt.alpha = 0.1;
    const FlowModel model = random_init({4, 3}, opt);
    const int ks[] = {10, 12, 14};
    const ErrorCurve curve = error_scaling_probe(model, ks, 64, 24, 17);
    bool ok = true;
    for (std::size_t i = 1; i < curve.max_error.size(); ++i) {
      const double per_k = std::sqrt(curve.max_error[i] /
                                     curve.max_error[i - 1]);
      if (!(per_k > 0.2 && per_k < 0.8)) ok = false;
    }
    check("quantization error decays with precision", ok);
  }

  return failures;
}

}  // namespace ivpf
