// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "ivpf.h"

namespace {

struct Model {
  ivpf_model* handle = nullptr;
  ~Model() { ivpf_model_free(handle); }
};

Model make_model(uint64_t seed = 0, double alpha = 0.08) {
  Model m;
  const uint32_t shape[3] = {4, 4, 3};
  REQUIRE(ivpf_model_random(shape, 3, 4, 2, seed, alpha, 1, &m.handle) ==
          IVPF_OK);
  return m;
}

}  // namespace

TEST_CASE("defaults") {
  ivpf_config config;
  ivpf_config_default(&config);
  CHECK(config.h == 8);
  CHECK(config.k == 14);
  CHECK(config.c == 16);
  CHECK(config.n == 0);
}

TEST_CASE("model lifecycle through the C surface") {
  const Model m = make_model();
  CHECK(ivpf_model_dim(m.handle) == 48);

  uint32_t dims[8];
  size_t rank = 8;
  REQUIRE(ivpf_model_shape(m.handle, dims, &rank) == IVPF_OK);
  CHECK(rank == 3);
  CHECK(dims[0] == 4);
  CHECK(dims[2] == 3);

  char hex[65];
  REQUIRE(ivpf_model_hash_hex(m.handle, hex) == IVPF_OK);
  CHECK(std::strlen(hex) == 64);

  const std::string path = "/tmp/ivpf_capi_test_model.bin";
  REQUIRE(ivpf_model_save_file(m.handle, path.c_str()) == IVPF_OK);
  Model loaded;
  REQUIRE(ivpf_model_load_file(path.c_str(), &loaded.handle) == IVPF_OK);
  char hex2[65];
  REQUIRE(ivpf_model_hash_hex(loaded.handle, hex2) == IVPF_OK);
  CHECK(std::string(hex) == hex2);
  std::remove(path.c_str());
}

TEST_CASE("encode/decode round trip") {
  const Model m = make_model(7);
  const uint32_t d = ivpf_model_dim(m.handle);
  ivpf_config config;
  ivpf_config_default(&config);

  std::vector<int64_t> samples(d);
  for (uint32_t i = 0; i < d; ++i) samples[i] = (i * 37 + 11) % 256;

  uint8_t* blob = nullptr;
  size_t blob_len = 0;
  ivpf_report report;
  REQUIRE(ivpf_encode(m.handle, &config, samples.data(), samples.size(),
                      &blob, &blob_len, &report) == IVPF_OK);
  CHECK(blob_len > 0);
  CHECK(report.bits_aux_register == 16.0);
  CHECK(report.net_bits ==
        report.bits_latent - report.bits_uniform_debited + 16.0);

  std::vector<int64_t> decoded(d, -1);
  REQUIRE(ivpf_decode(m.handle, blob, blob_len, decoded.data(),
                      decoded.size()) == IVPF_OK);
  CHECK(decoded == samples);
  ivpf_buffer_free(blob);
}

TEST_CASE("errors carry messages") {
  CHECK(ivpf_model_load_file(nullptr, nullptr) == IVPF_ERR_ARGUMENT);
  CHECK(std::strlen(ivpf_last_error()) > 0);

  ivpf_model* out = nullptr;
  CHECK(ivpf_model_load_file("/nonexistent/path.bin", &out) != IVPF_OK);

  const Model m = make_model();
  ivpf_config config;
  ivpf_config_default(&config);
  std::vector<int64_t> bad(ivpf_model_dim(m.handle), 300);  // >= 2^8
  uint8_t* blob = nullptr;
  size_t blob_len = 0;
  CHECK(ivpf_encode(m.handle, &config, bad.data(), bad.size(), &blob,
                    &blob_len, nullptr) == IVPF_ERR_ARGUMENT);

  const uint8_t junk[8] = {0};
  std::vector<int64_t> dst(ivpf_model_dim(m.handle));
  CHECK(ivpf_decode(m.handle, junk, sizeof junk, dst.data(), dst.size()) ==
        IVPF_ERR_FORMAT);
}

TEST_CASE("bench smoke") {
  const Model m = make_model();
  ivpf_config config;
  ivpf_config_default(&config);
  ivpf_bench_report report;
  REQUIRE(ivpf_bench(m.handle, &config, 4, &report) == IVPF_OK);
  CHECK(report.encode_items_per_sec > 0.0);
  CHECK(report.decode_items_per_sec > 0.0);
  CHECK(report.coding_steps_per_item == 2);
}
