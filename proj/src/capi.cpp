// SPDX-License-Identifier: Apache-2.0

#include "ivpf.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <random>
#include <string>

#include "ivpf/codec.hpp"
#include "ivpf/model.hpp"
#include "ivpf/oracle.hpp"

namespace {

thread_local std::string g_last_error;

ivpf_status fail(ivpf_status status, const char* message) {
  g_last_error = message;
  return status;
}

template <typename F>
ivpf_status guarded(F&& f) {
  try {
    return f();
  } catch (const ivpf::overflow_error& e) {
    return fail(IVPF_ERR_OVERFLOW, e.what());
  } catch (const ivpf::format_error& e) {
    return fail(IVPF_ERR_FORMAT, e.what());
  } catch (const ivpf::domain_error& e) {
    return fail(IVPF_ERR_ARGUMENT, e.what());
  } catch (const ivpf::error& e) {
    return fail(IVPF_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(IVPF_ERR_INTERNAL, e.what());
  }
}

const ivpf::FlowModel& unwrap(const ivpf_model* model) {
  return *reinterpret_cast<const ivpf::FlowModel*>(model);
}

ivpf::CodecConfig to_config(const ivpf_config* config) {
  ivpf::CodecConfig out;
  if (config != nullptr) {
    out.h = config->h;
    out.k = config->k;
    out.C = config->c;
    out.n = config->n;
  }
  return out;
}

void to_report(const ivpf::CodelengthReport& in, ivpf_report* out) {
  out->bits_latent = in.bits_latent;
  out->bits_uniform_debited = in.bits_uniform_debited;
  out->bits_aux_register = in.bits_aux_register;
  out->net_bits = in.net_bits;
  out->container_bits = in.container_bits;
  out->bpd = in.bpd;
}

}  // namespace

extern "C" {

const char* ivpf_last_error(void) { return g_last_error.c_str(); }

void ivpf_config_default(ivpf_config* config) {
  if (config == nullptr) return;
  config->h = 8;
  config->k = 14;
  config->c = 16;
  config->n = 0;
}

ivpf_status ivpf_model_load_file(const char* path, ivpf_model** out) {
  if (path == nullptr || out == nullptr) {
    return fail(IVPF_ERR_ARGUMENT, "null argument");
  }
  return guarded([&] {
    auto* model = new ivpf::FlowModel(ivpf::load_file(path));
    *out = reinterpret_cast<ivpf_model*>(model);
    return IVPF_OK;
  });
}

ivpf_status ivpf_model_save_file(const ivpf_model* model, const char* path) {
  if (model == nullptr || path == nullptr) {
    return fail(IVPF_ERR_ARGUMENT, "null argument");
  }
  return guarded([&] {
    ivpf::save_file(unwrap(model), path);
    return IVPF_OK;
  });
}

ivpf_status ivpf_model_random(const uint32_t* shape, size_t rank,
                              uint32_t layers, uint32_t levels, uint64_t seed,
                              double alpha, int prior_kind, ivpf_model** out) {
  if (shape == nullptr || rank == 0 || out == nullptr) {
    return fail(IVPF_ERR_ARGUMENT, "null or empty shape");
  }
  if (prior_kind != 0 && prior_kind != 1) {
    return fail(IVPF_ERR_ARGUMENT, "prior_kind must be 0 or 1");
  }
  return guarded([&] {
    ivpf::InitOptions options;
    options.layers = layers;
    options.levels = levels;
    options.seed = seed;
    options.alpha = alpha;
    options.prior = prior_kind == 0 ? ivpf::PriorKind::kUniform
                                    : ivpf::PriorKind::kMixGauss;
    auto* model = new ivpf::FlowModel(ivpf::random_init(
        std::vector<uint32_t>(shape, shape + rank), options));
    *out = reinterpret_cast<ivpf_model*>(model);
    return IVPF_OK;
  });
}

void ivpf_model_free(ivpf_model* model) {
  delete reinterpret_cast<ivpf::FlowModel*>(model);
}

uint32_t ivpf_model_dim(const ivpf_model* model) {
  return model == nullptr ? 0 : unwrap(model).dim();
}

ivpf_status ivpf_model_shape(const ivpf_model* model, uint32_t* dims,
                             size_t* rank) {
  if (model == nullptr || dims == nullptr || rank == nullptr) {
    return fail(IVPF_ERR_ARGUMENT, "null argument");
  }
  const auto& shape = unwrap(model).shape;
  if (*rank < shape.size()) {
    return fail(IVPF_ERR_ARGUMENT, "shape buffer too small");
  }
  std::memcpy(dims, shape.data(), shape.size() * sizeof(uint32_t));
  *rank = shape.size();
  return IVPF_OK;
}

ivpf_status ivpf_model_hash_hex(const ivpf_model* model, char* out) {
  if (model == nullptr || out == nullptr) {
    return fail(IVPF_ERR_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const std::string hex = ivpf::hash_hex(unwrap(model));
    std::memcpy(out, hex.c_str(), hex.size() + 1);
    return IVPF_OK;
  });
}

ivpf_status ivpf_encode(const ivpf_model* model, const ivpf_config* config,
                        const int64_t* samples, size_t count,
                        uint8_t** container, size_t* container_len,
                        ivpf_report* report) {
  if (model == nullptr || samples == nullptr || container == nullptr ||
      container_len == nullptr) {
    return fail(IVPF_ERR_ARGUMENT, "null argument");
  }
  return guarded([&] {
    ivpf::CodelengthReport rep;
    const std::vector<uint8_t> bytes =
        ivpf::encode(std::span(samples, count), unwrap(model),
                     to_config(config), &rep);
    auto* buffer = static_cast<uint8_t*>(std::malloc(bytes.size()));
    if (buffer == nullptr) {
      return fail(IVPF_ERR_INTERNAL, "allocation failed");
    }
    std::memcpy(buffer, bytes.data(), bytes.size());
    *container = buffer;
    *container_len = bytes.size();
    if (report != nullptr) to_report(rep, report);
    return IVPF_OK;
  });
}

ivpf_status ivpf_decode(const ivpf_model* model, const uint8_t* container,
                        size_t container_len, int64_t* samples, size_t count) {
  if (model == nullptr || container == nullptr || samples == nullptr) {
    return fail(IVPF_ERR_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const std::vector<int64_t> decoded =
        ivpf::decode(std::span(container, container_len), unwrap(model));
    if (decoded.size() != count) {
      return fail(IVPF_ERR_ARGUMENT, "sample buffer size mismatch");
    }
    std::memcpy(samples, decoded.data(), count * sizeof(int64_t));
    return IVPF_OK;
  });
}

void ivpf_buffer_free(uint8_t* buffer) { std::free(buffer); }

ivpf_status ivpf_selftest(int* failures) {
  if (failures == nullptr) return fail(IVPF_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *failures = ivpf::run_selftest(std::cerr);
    return IVPF_OK;
  });
}

ivpf_status ivpf_bench(const ivpf_model* model, const ivpf_config* config,
                       uint32_t items, ivpf_bench_report* out) {
  if (model == nullptr || out == nullptr || items == 0) {
    return fail(IVPF_ERR_ARGUMENT, "null argument or zero items");
  }
  return guarded([&] {
    using clock = std::chrono::steady_clock;
    const ivpf::FlowModel& m = unwrap(model);
    const ivpf::CodecConfig cfg = to_config(config);
    cfg.validate();
    const uint32_t d = m.dim();

    std::mt19937_64 rng(1234);
    std::vector<std::vector<int64_t>> data(items);
    for (auto& item : data) {
      item.resize(d);
      for (auto& v : item) {
        v = static_cast<int64_t>(rng() & ((uint64_t{1} << cfg.h) - 1));
      }
    }

    // Flow-only pass, to split model evaluation from entropy coding.
    const auto flow_start = clock::now();
    for (const auto& item : data) {
      std::vector<int64_t> x(d);
      for (uint32_t i = 0; i < d; ++i) {
        x[i] = (item[i] - (int64_t{1} << (cfg.h - 1))) << (cfg.k - cfg.h);
      }
      ivpf::flow_forward(m, x, cfg.k, 0, cfg.C);
    }
    const double flow_secs =
        std::chrono::duration<double>(clock::now() - flow_start).count();

    std::vector<std::vector<uint8_t>> blobs(items);
    const auto enc_start = clock::now();
    for (uint32_t i = 0; i < items; ++i) {
      blobs[i] = ivpf::encode(data[i], m, cfg);
    }
    const double enc_secs =
        std::chrono::duration<double>(clock::now() - enc_start).count();

    const auto dec_start = clock::now();
    for (uint32_t i = 0; i < items; ++i) {
      if (ivpf::decode(blobs[i], m) != data[i]) {
        return fail(IVPF_ERR_INTERNAL, "bench round trip mismatch");
      }
    }
    const double dec_secs =
        std::chrono::duration<double>(clock::now() - dec_start).count();

    out->encode_items_per_sec = items / std::max(enc_secs, 1e-9);
    out->decode_items_per_sec = items / std::max(dec_secs, 1e-9);
    out->flow_fraction = std::min(1.0, flow_secs / std::max(enc_secs, 1e-9));
    // One dequantization-digit batch plus one latent batch per item.
    out->coding_steps_per_item = 2;
    return IVPF_OK;
  });
}

}  // extern "C"
