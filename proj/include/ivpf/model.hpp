// SPDX-License-Identifier: Apache-2.0
//
// Flow-model persistence and validation, random identity-start
// initialization, and a continuous binary64 reference evaluator used by the
// error-scaling probes. File format: magic "IVPM", version, shape block,
// layer blocks, prior block, 32-byte content hash (little-endian
// throughout).

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ivpf/layers.hpp"
#include "ivpf/prior.hpp"

namespace ivpf {

enum class PriorKind : std::uint8_t { kUniform = 0, kMixGauss = 1 };

struct FlowModel {
  std::vector<std::uint32_t> shape;  // tensor dims, channels last
  std::vector<Layer> layers;         // factor-outs embedded in order
  PriorKind prior_kind = PriorKind::kUniform;
  MixGaussPrior prior;               // over the final latent dims
  double support = 2.0;              // S: latent grid clamp [-S, S)
  std::array<std::uint8_t, 32> hash{};  // content hash of the parameter bytes

  std::uint32_t dim() const;
  // Dim of the final latent (after all factor-outs).
  std::uint32_t final_dim() const;

  // Checks every invariant the codec's preconditions rely on; throws
  // domain_error with a description on violation.
  void validate() const;
};

std::vector<std::uint8_t> save(const FlowModel& model);
FlowModel load(const std::vector<std::uint8_t>& bytes);

FlowModel load_file(const std::string& path);
void save_file(const FlowModel& model, const std::string& path);

std::string hash_hex(const FlowModel& model);

// Reproducible random model. alpha = 0 gives the identity-start coupling of
// the reference architecture; a small positive alpha perturbs every
// coupling away from identity while keeping latents inside the support.
struct InitOptions {
  std::uint32_t layers = 4;   // total flow blocks across all levels
  std::uint32_t levels = 1;   // factor-out after each level but the last
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::uint32_t hidden = 24;  // coupling/head net width
  PriorKind prior = PriorKind::kMixGauss;
};

FlowModel random_init(const std::vector<std::uint32_t>& shape,
                      const InitOptions& options);

// Continuous reference: the underlying volume-preserving flow evaluated in
// binary64 with no quantization and true matrix multiplies for the 1x1
// convolutions. Returns the canonical latent concatenation
// [factored level 1, ..., factored level M-1, final].
std::vector<double> continuous_eval(const FlowModel& model,
                                    std::vector<double> x);

}  // namespace ivpf
