/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the ivpf codec. All functions return ivpf_status; on any
 * failure ivpf_last_error() gives a thread-local description. Model handles
 * are immutable after creation and may be shared across threads.
 */

#ifndef IVPF_H
#define IVPF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ivpf_status {
  IVPF_OK = 0,
  IVPF_ERR_ARGUMENT = 1, /* invalid argument or domain violation */
  IVPF_ERR_OVERFLOW = 2, /* fixed-point overflow guard tripped */
  IVPF_ERR_FORMAT = 3,   /* malformed or mismatched stream/model file */
  IVPF_ERR_IO = 4,       /* file system failure */
  IVPF_ERR_INTERNAL = 5
} ivpf_status;

typedef struct ivpf_model ivpf_model;

typedef struct ivpf_config {
  int32_t h; /* input bit depth, default 8 */
  int32_t k; /* latent precision, default 14, must be >= h */
  int32_t c; /* modulus bits for the remainder register, default 16 */
  int32_t n; /* CDF frequency bits; 0 selects automatically */
} ivpf_config;

typedef struct ivpf_report {
  double bits_latent;
  double bits_uniform_debited;
  double bits_aux_register;
  double net_bits;
  double container_bits;
  double bpd;
} ivpf_report;

/* Thread-local message for the most recent failure in this thread. */
const char* ivpf_last_error(void);

void ivpf_config_default(ivpf_config* config);

/* Model lifecycle. prior_kind: 0 = uniform, 1 = mixture of Gaussians. */
ivpf_status ivpf_model_load_file(const char* path, ivpf_model** out);
ivpf_status ivpf_model_save_file(const ivpf_model* model, const char* path);
ivpf_status ivpf_model_random(const uint32_t* shape, size_t rank,
                              uint32_t layers, uint32_t levels, uint64_t seed,
                              double alpha, int prior_kind, ivpf_model** out);
void ivpf_model_free(ivpf_model* model);

uint32_t ivpf_model_dim(const ivpf_model* model);
/* rank is in/out: capacity of dims on entry, actual rank on exit. */
ivpf_status ivpf_model_shape(const ivpf_model* model, uint32_t* dims,
                             size_t* rank);
/* out must hold at least 65 bytes (hex digest + NUL). */
ivpf_status ivpf_model_hash_hex(const ivpf_model* model, char* out);

/*
 * samples: count integers in [0, 2^h), count == ivpf_model_dim(model).
 * On success *container is malloc'd (free with ivpf_buffer_free) and
 * *report, if non-NULL, receives the codelength decomposition.
 */
ivpf_status ivpf_encode(const ivpf_model* model, const ivpf_config* config,
                        const int64_t* samples, size_t count,
                        uint8_t** container, size_t* container_len,
                        ivpf_report* report);

ivpf_status ivpf_decode(const ivpf_model* model, const uint8_t* container,
                        size_t container_len, int64_t* samples, size_t count);

void ivpf_buffer_free(uint8_t* buffer);

/* Verification sweep; prints one line per check to stderr. *failures
 * receives the number of failed checks (0 on a correct build). */
ivpf_status ivpf_selftest(int* failures);

typedef struct ivpf_bench_report {
  double encode_items_per_sec;
  double decode_items_per_sec;
  double flow_fraction;      /* share of encode time in the flow pass */
  int coding_steps_per_item; /* entropy-coder batches per item */
} ivpf_bench_report;

ivpf_status ivpf_bench(const ivpf_model* model, const ivpf_config* config,
                       uint32_t items, ivpf_bench_report* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* IVPF_H */
