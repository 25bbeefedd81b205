// SPDX-License-Identifier: Apache-2.0

#include "ivpf/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "ivpf/layers.hpp"
#include "ivpf/prior.hpp"

namespace ivpf {

namespace {

constexpr char kMagic[4] = {'I', 'V', 'P', 'F'};
constexpr std::uint8_t kVersion = 1;

void encode_symbol(RansState& state, const SymbolModel& sm,
                   std::int64_t mantissa) {
  if (!sm.contains(mantissa)) {
    throw domain_error("codec: latent outside the prior support window");
  }
  const auto i = static_cast<std::uint32_t>(mantissa - sm.lo_mantissa());
  const std::uint32_t lo = sm.cdf(i);
  state.encode(sm.cdf(i + 1) - lo, lo, sm.freq_bits());
}

std::int64_t decode_symbol(RansState& state, const SymbolModel& sm) {
  const std::uint32_t b = state.peek(sm.freq_bits());
  const std::uint32_t i = sm.symbol_from_cdf(b);
  const std::uint32_t lo = sm.cdf(i);
  state.advance(sm.cdf(i + 1) - lo, lo, sm.freq_bits());
  return sm.lo_mantissa() + i;
}

SymbolModel final_symbol_model(const FlowModel& model,
                               const CodecConfig& config, int n,
                               std::uint32_t dim_index) {
  if (model.prior_kind == PriorKind::kUniform) {
    return SymbolModel::uniform(config.k, n);
  }
  return prior_symbol_model(model.prior, dim_index, config.k, n,
                            model.support);
}

}  // namespace

void CodecConfig::validate() const {
  if (h < 1 || h > 16) throw domain_error("codec: h out of [1, 16]");
  if (k < h || k > kMaxPrecision) {
    throw domain_error("codec: need h <= k <= 24");
  }
  if (C < 1 || C > 30) throw domain_error("codec: C out of [1, 30]");
  if (n != 0 && (n < 1 || n > 30)) {
    throw domain_error("codec: n out of [1, 30]");
  }
}

int effective_freq_bits(const CodecConfig& config, const FlowModel& model) {
  config.validate();
  if (config.n != 0) return config.n;
  // Widest possible window: the full clamp interval [-S, S) at precision k,
  // plus slack for the rounded edges. The CDF construction reserves one
  // count per bin, so take 7 extra bits to keep that floor below 1% of the
  // mass budget. The uniform prior's n >= k requirement is subsumed.
  const auto max_count = static_cast<std::uint64_t>(
                             std::ceil(2.0 * model.support *
                                       std::ldexp(1.0, config.k))) +
                         2;
  const int width = static_cast<int>(std::bit_width(max_count));
  if (width > 30) {
    throw domain_error("codec: support too wide for 30 frequency bits");
  }
  return std::clamp(width + 7, 16, 30);
}

FlowForwardResult flow_forward(const FlowModel& model,
                               std::span<const std::int64_t> x, int k,
                               std::uint64_t r, int mod_bits) {
  if (x.size() != model.dim()) {
    throw domain_error("codec: input dim mismatch");
  }
  FlowForwardResult result;
  std::vector<std::int64_t> cur(x.begin(), x.end());
  for (const Layer& layer : model.layers) {
    if (const auto* c = std::get_if<CouplingLayer>(&layer)) {
      coupling_forward(*c, cur, k, r, mod_bits);
    } else if (const auto* v = std::get_if<Conv1x1Layer>(&layer)) {
      conv1x1_forward(*v, cur, k, r, mod_bits);
    } else if (const auto* p = std::get_if<PermuteLayer>(&layer)) {
      permute_forward(cur, p->perm);
    } else if (const auto* f = std::get_if<FactorOutLayer>(&layer)) {
      FactorSplit split = factor_out_forward(*f, cur, k, r, mod_bits);
      result.factored.push_back({std::move(split.factored),
                                 std::move(split.mu), std::move(split.gamma)});
      cur = std::move(split.kept);
    }
  }
  result.latent = std::move(cur);
  result.r = r;
  return result;
}

FlowInverseResult flow_inverse(const FlowModel& model,
                               std::span<const std::int64_t> latent, int k,
                               std::uint64_t r, int mod_bits,
                               const LatentSource& source) {
  std::size_t factor_count = 0;
  for (const Layer& layer : model.layers) {
    if (std::holds_alternative<FactorOutLayer>(layer)) ++factor_count;
  }
  if (latent.size() != model.final_dim()) {
    throw domain_error("codec: final latent dim mismatch");
  }
  std::vector<std::int64_t> cur(latent.begin(), latent.end());
  std::size_t next_index = factor_count;
  for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) {
    if (const auto* c = std::get_if<CouplingLayer>(&*it)) {
      coupling_inverse(*c, cur, k, r, mod_bits);
    } else if (const auto* v = std::get_if<Conv1x1Layer>(&*it)) {
      conv1x1_inverse(*v, cur, k, r, mod_bits);
    } else if (const auto* p = std::get_if<PermuteLayer>(&*it)) {
      permute_inverse(cur, p->perm);
    } else if (const auto* f = std::get_if<FactorOutLayer>(&*it)) {
      std::vector<double> mu, gamma;
      factor_out_params(*f, cur, k, mu, gamma);
      const std::vector<std::int64_t> factored =
          source(--next_index, mu, gamma);
      if (factored.size() != f->dim_factor) {
        throw domain_error("codec: factored latent dim mismatch");
      }
      cur = factor_out_inverse(*f, cur, factored, k, r, mod_bits);
    }
  }
  return {std::move(cur), r};
}

CodelengthReport encode_stream(RansState& state,
                               std::span<const std::int64_t> x0,
                               const FlowModel& model,
                               const CodecConfig& config,
                               std::uint64_t& r_out) {
  config.validate();
  const std::uint32_t d = model.dim();
  if (x0.size() != d) throw domain_error("codec: input size mismatch");
  const std::int64_t limit = std::int64_t{1} << config.h;
  for (std::int64_t v : x0) {
    if (v < 0 || v >= limit) {
      throw domain_error("codec: sample outside [0, 2^h)");
    }
  }
  const int n = effective_freq_bits(config, model);
  const int frac_bits = config.k - config.h;
  const std::int64_t half = std::int64_t{1} << (config.h - 1);

  // Dequantize: x = (x0 - 2^(h-1)) / 2^h lands on the k-grid exactly; the
  // sub-bin digits u come from the stream (bits-back debit).
  std::vector<std::int64_t> x(d);
  for (std::uint32_t i = 0; i < d; ++i) {
    std::int64_t m = (x0[i] - half) << frac_bits;
    if (frac_bits > 0) m += state.decode_bits(frac_bits);
    x[i] = m;
  }

  FlowForwardResult fwd = flow_forward(model, x, config.k, 0, config.C);

  // LIFO: the decoder pulls the final latent first, then the factor-out
  // levels deepest-first, each dimension in ascending order — so encode in
  // the exact reverse of that.
  const std::uint64_t before_latent = state.bit_content();
  for (const FactoredLatent& fl : fwd.factored) {
    for (std::size_t i = fl.mantissas.size(); i-- > 0;) {
      const SymbolModel sm = cond_gauss_symbol_model(
          fl.mu[i], fl.gamma[i], config.k, n, model.support);
      encode_symbol(state, sm, fl.mantissas[i]);
    }
  }
  for (std::size_t i = fwd.latent.size(); i-- > 0;) {
    const SymbolModel sm =
        final_symbol_model(model, config, n, static_cast<std::uint32_t>(i));
    encode_symbol(state, sm, fwd.latent[i]);
  }

  r_out = fwd.r;

  CodelengthReport report;
  report.bits_latent =
      static_cast<double>(state.bit_content() - before_latent);
  report.bits_uniform_debited = static_cast<double>(frac_bits) * d;
  report.bits_aux_register = config.C;
  report.net_bits = report.bits_latent - report.bits_uniform_debited +
                    report.bits_aux_register;
  report.bpd = report.net_bits / d;
  return report;
}

std::vector<std::int64_t> decode_stream(RansState& state,
                                        const FlowModel& model,
                                        const CodecConfig& config,
                                        std::uint64_t r) {
  config.validate();
  const std::uint32_t d = model.dim();
  const int n = effective_freq_bits(config, model);
  const int frac_bits = config.k - config.h;
  const std::int64_t half = std::int64_t{1} << (config.h - 1);

  const std::uint32_t final_dim = model.final_dim();
  std::vector<std::int64_t> latent(final_dim);
  for (std::uint32_t i = 0; i < final_dim; ++i) {
    latent[i] = decode_symbol(state, final_symbol_model(model, config, n, i));
  }

  LatentSource source = [&](std::size_t, std::span<const double> mu,
                            std::span<const double> gamma) {
    std::vector<std::int64_t> out(mu.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = decode_symbol(
          state, cond_gauss_symbol_model(mu[i], gamma[i], config.k, n,
                                         model.support));
    }
    return out;
  };

  FlowInverseResult inv =
      flow_inverse(model, latent, config.k, r, config.C, source);
  if (inv.r != 0) {
    throw format_error("codec: remainder register did not return to zero");
  }
  if (inv.x.size() != d) {
    throw domain_error("codec: inverse dim mismatch");
  }

  std::vector<std::int64_t> x0(d);
  for (std::uint32_t i = 0; i < d; ++i) {
    const FloorSplit split =
        floor_to_precision(QuantScalar{inv.x[i], config.k}, config.h);
    x0[i] = split.coarse.mantissa + half;
    if (x0[i] < 0 || x0[i] >= (std::int64_t{1} << config.h)) {
      throw format_error("codec: decoded sample out of range");
    }
    inv.x[i] = split.remainder.mantissa;  // stash u for the give-back pass
  }
  // Return the borrowed dequantization digits, reversing the decode-side
  // retrieval order.
  if (frac_bits > 0) {
    for (std::uint32_t i = d; i-- > 0;) {
      state.encode_bits(static_cast<std::uint32_t>(inv.x[i]), frac_bits);
    }
  }
  return x0;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (in.size() - pos < 4) throw format_error("codec: truncated container");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[pos++]} << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode(std::span<const std::int64_t> x0,
                                 const FlowModel& model,
                                 const CodecConfig& config,
                                 CodelengthReport* report) {
  RansState state;
  std::uint64_t r = 0;
  CodelengthReport rep = encode_stream(state, x0, model, config, r);
  const std::vector<std::uint32_t> words = state.flush();

  std::vector<std::uint8_t> out;
  out.reserve(64 + 4 * words.size());
  for (char ch : kMagic) out.push_back(static_cast<std::uint8_t>(ch));
  out.push_back(kVersion);
  put_u32(out, static_cast<std::uint32_t>(config.h));
  put_u32(out, static_cast<std::uint32_t>(config.k));
  put_u32(out, static_cast<std::uint32_t>(config.C));
  put_u32(out, static_cast<std::uint32_t>(effective_freq_bits(config, model)));
  put_u32(out, static_cast<std::uint32_t>(model.shape.size()));
  for (std::uint32_t dim : model.shape) put_u32(out, dim);
  out.insert(out.end(), model.hash.begin(), model.hash.end());
  put_u32(out, static_cast<std::uint32_t>(r));
  put_u32(out, static_cast<std::uint32_t>(words.size()));
  for (std::uint32_t w : words) {
    out.push_back(static_cast<std::uint8_t>(w >> 24));
    out.push_back(static_cast<std::uint8_t>(w >> 16));
    out.push_back(static_cast<std::uint8_t>(w >> 8));
    out.push_back(static_cast<std::uint8_t>(w));
  }
  if (report != nullptr) {
    rep.container_bits = 8.0 * static_cast<double>(out.size());
    *report = rep;
  }
  return out;
}

std::vector<std::int64_t> decode(std::span<const std::uint8_t> container,
                                 const FlowModel& model,
                                 CodecConfig* config_out) {
  std::size_t pos = 0;
  if (container.size() < 5 ||
      std::memcmp(container.data(), kMagic, 4) != 0) {
    throw format_error("codec: bad container magic");
  }
  pos = 4;
  if (container[pos++] != kVersion) {
    throw format_error("codec: unsupported container version");
  }
  CodecConfig config;
  config.h = static_cast<int>(get_u32(container, pos));
  config.k = static_cast<int>(get_u32(container, pos));
  config.C = static_cast<int>(get_u32(container, pos));
  config.n = static_cast<int>(get_u32(container, pos));
  config.validate();
  const std::uint32_t rank = get_u32(container, pos);
  if (rank != model.shape.size()) {
    throw format_error("codec: container shape rank mismatch");
  }
  for (std::uint32_t dim : model.shape) {
    if (get_u32(container, pos) != dim) {
      throw format_error("codec: container shape mismatch");
    }
  }
  if (container.size() - pos < 32) {
    throw format_error("codec: truncated container");
  }
  if (!std::equal(model.hash.begin(), model.hash.end(),
                  container.begin() + pos)) {
    throw format_error("codec: model hash mismatch");
  }
  pos += 32;
  const std::uint32_t r = get_u32(container, pos);
  if (config.C < 32 && (std::uint64_t{r} >> config.C) != 0) {
    throw format_error("codec: stored register exceeds C bits");
  }
  const std::uint32_t word_count = get_u32(container, pos);
  if (container.size() - pos < std::size_t{word_count} * 4) {
    throw format_error("codec: truncated stream words");
  }
  std::vector<std::uint32_t> words(word_count);
  for (std::uint32_t i = 0; i < word_count; ++i) {
    words[i] = (std::uint32_t{container[pos]} << 24) |
               (std::uint32_t{container[pos + 1]} << 16) |
               (std::uint32_t{container[pos + 2]} << 8) |
               std::uint32_t{container[pos + 3]};
    pos += 4;
  }
  if (pos != container.size()) {
    throw format_error("codec: trailing bytes in container");
  }
  RansState state = RansState::restore(words);
  if (config_out != nullptr) *config_out = config;
  return decode_stream(state, model, config, r);
}

}  // namespace ivpf
