// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mbss.h"

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "common.hpp"
#include "config.hpp"
#include "pipeline.hpp"

struct mbss_ctx {
  mbss::pipeline::PipelineConfig config;
  std::string last_error;
};

namespace {

mbss_status status_of(const mbss::Error& e) {
  switch (e.kind()) {
    case mbss::ErrorKind::usage:
      return MBSS_ERR_USAGE;
    case mbss::ErrorKind::data:
      return MBSS_ERR_DATA;
    case mbss::ErrorKind::numeric:
      return MBSS_ERR_NUMERIC;
  }
  return MBSS_ERR_USAGE;
}

// Runs the body, mapping exceptions onto status codes and the per-context
// error slot.
template <typename Fn>
mbss_status guarded(mbss_ctx* ctx, Fn&& fn) {
  if (!ctx) return MBSS_ERR_USAGE;
  ctx->last_error.clear();
  try {
    fn();
    return MBSS_OK;
  } catch (const mbss::Error& e) {
    ctx->last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return MBSS_ERR_DATA;
  }
}

const char* c_str_or(const char* s, const char* fallback) {
  return s ? s : fallback;
}

}  // namespace

extern "C" {

MBSS_API uint32_t mbss_version(void) { return 10000; }

MBSS_API mbss_status mbss_ctx_create_from_json(const char* json,
                                               mbss_ctx** out) {
  if (!out) return MBSS_ERR_USAGE;
  *out = nullptr;
  if (!json) return MBSS_ERR_USAGE;
  try {
    auto ctx = std::make_unique<mbss_ctx>();
    ctx->config = mbss::pipeline::PipelineConfig::from_json_text(json);
    *out = ctx.release();
    return MBSS_OK;
  } catch (const mbss::Error& e) {
    return status_of(e);
  } catch (const std::exception&) {
    return MBSS_ERR_USAGE;
  }
}

MBSS_API mbss_status mbss_ctx_create_from_file(const char* path,
                                               mbss_ctx** out) {
  if (!out) return MBSS_ERR_USAGE;
  *out = nullptr;
  if (!path) return MBSS_ERR_USAGE;
  try {
    auto ctx = std::make_unique<mbss_ctx>();
    ctx->config = mbss::pipeline::PipelineConfig::from_file(path);
    *out = ctx.release();
    return MBSS_OK;
  } catch (const mbss::Error& e) {
    return status_of(e);
  } catch (const std::exception&) {
    return MBSS_ERR_USAGE;
  }
}

MBSS_API void mbss_ctx_destroy(mbss_ctx* ctx) { delete ctx; }

MBSS_API const char* mbss_ctx_last_error(const mbss_ctx* ctx) {
  if (!ctx) return "null context";
  return ctx->last_error.c_str();
}

MBSS_API mbss_status mbss_ctx_config_hash(const mbss_ctx* ctx, char* buf,
                                          uint64_t buf_len) {
  if (!ctx || !buf) return MBSS_ERR_USAGE;
  const std::string hash = ctx->config.config_hash();
  if (buf_len < hash.size() + 1) return MBSS_ERR_USAGE;
  std::memcpy(buf, hash.c_str(), hash.size() + 1);
  return MBSS_OK;
}

MBSS_API mbss_status mbss_gen_corpus(mbss_ctx* ctx, const char* out_dir) {
  return guarded(ctx, [&] {
    mbss::pipeline::cmd_gen_corpus(ctx->config, c_str_or(out_dir, ""));
  });
}

MBSS_API mbss_status mbss_design_beams(mbss_ctx* ctx, const char* bank_path,
                                       const char* pattern_csv_dir) {
  return guarded(ctx, [&] {
    if (!bank_path) throw mbss::UsageError("bank path is required");
    mbss::pipeline::cmd_design_beams(ctx->config, bank_path,
                                     c_str_or(pattern_csv_dir, ""));
  });
}

MBSS_API mbss_status mbss_train(mbss_ctx* ctx, const char* manifest_path,
                                const char* bank_path, const char* ckpt_path,
                                const char* loss_csv_path) {
  return guarded(ctx, [&] {
    if (!manifest_path || !bank_path || !ckpt_path)
      throw mbss::UsageError("train needs manifest, bank and checkpoint paths");
    mbss::pipeline::cmd_train(ctx->config, manifest_path, bank_path, ckpt_path,
                              c_str_or(loss_csv_path, ""));
  });
}

MBSS_API mbss_status mbss_separate(mbss_ctx* ctx, const char* bank_path,
                                   const char* ckpt_path,
                                   const char* mixture_wav,
                                   const char* const* reference_paths,
                                   uint64_t num_references, int oracle_select,
                                   const char* out_dir) {
  return guarded(ctx, [&] {
    if (!bank_path || !ckpt_path || !mixture_wav || !out_dir)
      throw mbss::UsageError(
          "separate needs bank, checkpoint, mixture and output paths");
    std::vector<std::string> refs;
    for (uint64_t i = 0; i < num_references; ++i) {
      if (!reference_paths || !reference_paths[i])
        throw mbss::UsageError("null reference path");
      refs.emplace_back(reference_paths[i]);
    }
    mbss::pipeline::cmd_separate(ctx->config, bank_path, ckpt_path, mixture_wav,
                                 refs, oracle_select != 0, out_dir);
  });
}

MBSS_API mbss_status mbss_evaluate(mbss_ctx* ctx, const char* manifest_path,
                                   const char* bank_path,
                                   const char* ckpt_path, const char* systems,
                                   const char* out_csv,
                                   const char* summary_csv) {
  return guarded(ctx, [&] {
    if (!manifest_path || !bank_path || !out_csv)
      throw mbss::UsageError("evaluate needs manifest, bank and CSV paths");
    std::vector<std::string> system_list;
    if (systems && *systems) {
      std::string cur;
      for (const char* p = systems;; ++p) {
        if (*p == ',' || *p == '\0') {
          if (!cur.empty()) system_list.push_back(cur);
          cur.clear();
          if (*p == '\0') break;
        } else {
          cur += *p;
        }
      }
    } else {
      system_list = ctx->config.systems;
    }
    mbss::pipeline::cmd_evaluate(ctx->config, manifest_path, bank_path,
                                 c_str_or(ckpt_path, ""), system_list, out_csv,
                                 c_str_or(summary_csv, ""));
  });
}

}  // extern "C"
