/* Copyright 2026 mbss authors
 * License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * C API for the multi-beam speech separation toolkit. All functionality is
 * reached through an opaque context holding a loaded configuration; calls
 * return status codes and the last error message is queryable per context.
 */

#ifndef MBSS_H
#define MBSS_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define MBSS_API __declspec(dllexport)
#else
#define MBSS_API __attribute__((visibility("default")))
#endif

typedef enum mbss_status {
  MBSS_OK = 0,
  MBSS_ERR_USAGE = 1,   /* bad arguments or configuration */
  MBSS_ERR_DATA = 2,    /* malformed files, incompatible artifacts */
  MBSS_ERR_NUMERIC = 3, /* solver failure or training divergence */
} mbss_status;

typedef struct mbss_ctx mbss_ctx;

MBSS_API uint32_t mbss_version(void);

/* Create a context from a JSON config file / string. Missing fields take
 * defaults; unknown fields are rejected. On failure *out is NULL and a
 * message is available via mbss_ctx_last_error(NULL) — i.e. errors during
 * creation are reported through the return code only. */
MBSS_API mbss_status mbss_ctx_create_from_file(const char* path,
                                               mbss_ctx** out);
MBSS_API mbss_status mbss_ctx_create_from_json(const char* json,
                                               mbss_ctx** out);
MBSS_API void mbss_ctx_destroy(mbss_ctx* ctx);

/* Message for the most recent failing call on this context. Valid until the
 * next call on the same context. */
MBSS_API const char* mbss_ctx_last_error(const mbss_ctx* ctx);

/* Canonical hash of the cross-stage configuration fields, as embedded in
 * every artifact this context produces. 17 bytes including NUL. */
MBSS_API mbss_status mbss_ctx_config_hash(const mbss_ctx* ctx, char* buf,
                                          uint64_t buf_len);

/* Generate the synthetic mixture corpus into the configured (or overridden)
 * output directory; writes WAVs plus a line-delimited JSON manifest. */
MBSS_API mbss_status mbss_gen_corpus(mbss_ctx* ctx, const char* out_dir);

/* Design the fixed beamformer bank; writes the bank file and, when
 * pattern_csv_dir is non-NULL, one angle->dB beampattern CSV per beam. */
MBSS_API mbss_status mbss_design_beams(mbss_ctx* ctx, const char* bank_path,
                                       const char* pattern_csv_dir);

/* Train the separation network on a corpus. Writes a checkpoint and a
 * step,loss CSV. */
MBSS_API mbss_status mbss_train(mbss_ctx* ctx, const char* manifest_path,
                                const char* bank_path, const char* ckpt_path,
                                const char* loss_csv_path);

/* Separate one mixture WAV into C output WAVs plus a JSON selection report.
 * reference_paths (length num_references, may be 0) enables oracle selection
 * when oracle_select is nonzero. */
MBSS_API mbss_status mbss_separate(mbss_ctx* ctx, const char* bank_path,
                                   const char* ckpt_path,
                                   const char* mixture_wav,
                                   const char* const* reference_paths,
                                   uint64_t num_references, int oracle_select,
                                   const char* out_dir);

/* Evaluate systems over a corpus. `systems` is a comma-separated subset of
 * proposed,proposed_oracle,mbbf,irm,mbirm,omvdr (NULL = all). Writes a
 * per-speaker detail CSV and, when summary_csv is non-NULL, a per-system
 * summary CSV. */
MBSS_API mbss_status mbss_evaluate(mbss_ctx* ctx, const char* manifest_path,
                                   const char* bank_path,
                                   const char* ckpt_path, const char* systems,
                                   const char* out_csv,
                                   const char* summary_csv);

#ifdef __cplusplus
}
#endif

#endif /* MBSS_H */
