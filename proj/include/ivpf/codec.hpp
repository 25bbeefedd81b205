// SPDX-License-Identifier: Apache-2.0
//
// End-to-end encode/decode: preprocessing, bits-back dequantization, the
// quantized flow pass with the shared remainder register, latent coding
// against the prior, and the codelength accounting that goes with it.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ivpf/model.hpp"
#include "ivpf/rans.hpp"

namespace ivpf {

struct CodecConfig {
  int h = 8;   // input bit depth
  int k = 14;  // latent precision, k >= h
  int C = 16;  // modulus bits for the remainder register
  int n = 0;   // CDF frequency bits; 0 picks the smallest workable value

  void validate() const;
};

// Frequency bits actually used for a given config/model pair.
int effective_freq_bits(const CodecConfig& config, const FlowModel& model);

struct CodelengthReport {
  double bits_latent = 0.0;           // measured stream growth, latent phase
  double bits_uniform_debited = 0.0;  // nominal (k - h) * d bits-back debit
  double bits_aux_register = 0.0;     // C, for storing r
  double net_bits = 0.0;              // latent - debited + aux
  double container_bits = 0.0;        // full container incl. header padding
  double bpd = 0.0;                   // net_bits / d
};

struct FactoredLatent {
  std::vector<std::int64_t> mantissas;
  std::vector<double> mu;
  std::vector<double> gamma;
};

struct FlowForwardResult {
  std::vector<std::int64_t> latent;      // final level
  std::vector<FactoredLatent> factored;  // in forward (shallow-first) order
  std::uint64_t r = 0;
};

FlowForwardResult flow_forward(const FlowModel& model,
                               std::span<const std::int64_t> x, int k,
                               std::uint64_t r, int mod_bits);

// Supplies the factored latent for factor-out `index` (forward numbering)
// given its conditional parameters; called deepest-first during the reverse
// walk, which is the retrieval order a LIFO stream imposes.
using LatentSource = std::function<std::vector<std::int64_t>(
    std::size_t index, std::span<const double> mu,
    std::span<const double> gamma)>;

struct FlowInverseResult {
  std::vector<std::int64_t> x;
  std::uint64_t r = 0;
};

FlowInverseResult flow_inverse(const FlowModel& model,
                               std::span<const std::int64_t> latent, int k,
                               std::uint64_t r, int mod_bits,
                               const LatentSource& source);

// Stream-level encode: x0 holds integers in [0, 2^h). Decodes the
// dequantization digits from `state`, runs the flow, codes every latent,
// and leaves the final remainder register in `r_out`. The caller owns the
// state, so accounting tests can run it on a pre-charged stream.
CodelengthReport encode_stream(RansState& state,
                               std::span<const std::int64_t> x0,
                               const FlowModel& model,
                               const CodecConfig& config,
                               std::uint64_t& r_out);

// Exact inverse of encode_stream, returning the state to its prior value.
std::vector<std::int64_t> decode_stream(RansState& state,
                                        const FlowModel& model,
                                        const CodecConfig& config,
                                        std::uint64_t r);

// Container-level API. Format: magic "IVPF", version u8, then u32
// little-endian h, k, C, n, rank, dims..., 32-byte model hash, r (low C
// bits), word count, followed by the stream words in big-endian order.
std::vector<std::uint8_t> encode(std::span<const std::int64_t> x0,
                                 const FlowModel& model,
                                 const CodecConfig& config,
                                 CodelengthReport* report = nullptr);

std::vector<std::int64_t> decode(std::span<const std::uint8_t> container,
                                 const FlowModel& model,
                                 CodecConfig* config_out = nullptr);

}  // namespace ivpf
