// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Batch driver for the separation pipeline. Subcommands map 1:1 onto the
// shared-library C API; exit codes are the library status codes
// (0 ok, 1 usage, 2 data/format, 3 numerical).

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "mbss.h"

namespace {

struct CtxHolder {
  mbss_ctx* ctx = nullptr;
  ~CtxHolder() { mbss_ctx_destroy(ctx); }
};

int finish(const CtxHolder& holder, mbss_status status, const char* verb) {
  if (status == MBSS_OK) return 0;
  const char* msg = holder.ctx ? mbss_ctx_last_error(holder.ctx) : "";
  std::fprintf(stderr, "mbss %s failed (%d): %s\n", verb,
               static_cast<int>(status), msg && *msg ? msg : "bad arguments");
  return static_cast<int>(status);
}

int load_ctx(CtxHolder& holder, const std::string& config_path) {
  const mbss_status status =
      mbss_ctx_create_from_file(config_path.c_str(), &holder.ctx);
  if (status != MBSS_OK)
    std::fprintf(stderr, "mbss: cannot load config %s (%d)\n",
                 config_path.c_str(), static_cast<int>(status));
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-beam multi-talker speech separation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate the mixture corpus");
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory (default: config)");

  // design-beams
  auto* design = app.add_subcommand("design-beams", "design the fixed beam bank");
  std::string bank_path = "bank.bin", pattern_dir;
  design->add_option("--bank", bank_path, "bank output path");
  design->add_option("--patterns", pattern_dir, "beampattern CSV directory");

  // train
  auto* train = app.add_subcommand("train", "train the separation network");
  std::string train_manifest, train_bank, ckpt_path = "model.ckpt", loss_csv;
  train->add_option("--manifest", train_manifest, "corpus manifest")->required();
  train->add_option("--bank", train_bank, "beamformer bank")->required();
  train->add_option("--checkpoint", ckpt_path, "checkpoint output path");
  train->add_option("--loss-csv", loss_csv, "per-step loss CSV");

  // separate
  auto* sep = app.add_subcommand("separate", "separate one mixture WAV");
  std::string sep_bank, sep_ckpt, sep_mix, sep_out = "separated";
  std::vector<std::string> sep_refs;
  bool oracle = false;
  sep->add_option("--bank", sep_bank, "beamformer bank")->required();
  sep->add_option("--checkpoint", sep_ckpt, "model checkpoint")->required();
  sep->add_option("--mixture", sep_mix, "mixture WAV")->required();
  sep->add_option("--refs", sep_refs, "reference WAVs (for oracle selection)");
  sep->add_flag("--oracle-select", oracle,
                "pick outputs by SDR against --refs");
  sep->add_option("--out", sep_out, "output directory");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "evaluate systems over a corpus");
  std::string ev_manifest, ev_bank, ev_ckpt, ev_csv = "evaluation.csv",
                                             ev_summary;
  std::string ev_systems;
  ev->add_option("--manifest", ev_manifest, "corpus manifest")->required();
  ev->add_option("--bank", ev_bank, "beamformer bank")->required();
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint");
  ev->add_option("--systems", ev_systems,
                 "comma-separated: proposed,proposed_oracle,mbbf,irm,mbirm,"
                 "omvdr (default: config)");
  ev->add_option("--out-csv", ev_csv, "per-speaker detail CSV");
  ev->add_option("--summary-csv", ev_summary, "per-system summary CSV");

  CLI11_PARSE(app, argc, argv);

  CtxHolder holder;
  if (const int rc = load_ctx(holder, config_path)) return rc;

  if (gen->parsed())
    return finish(holder,
                  mbss_gen_corpus(holder.ctx,
                                  gen_out.empty() ? nullptr : gen_out.c_str()),
                  "gen-corpus");

  if (design->parsed())
    return finish(
        holder,
        mbss_design_beams(holder.ctx, bank_path.c_str(),
                          pattern_dir.empty() ? nullptr : pattern_dir.c_str()),
        "design-beams");

  if (train->parsed())
    return finish(holder,
                  mbss_train(holder.ctx, train_manifest.c_str(),
                             train_bank.c_str(), ckpt_path.c_str(),
                             loss_csv.empty() ? nullptr : loss_csv.c_str()),
                  "train");

  if (sep->parsed()) {
    std::vector<const char*> refs;
    for (const auto& r : sep_refs) refs.push_back(r.c_str());
    return finish(holder,
                  mbss_separate(holder.ctx, sep_bank.c_str(), sep_ckpt.c_str(),
                                sep_mix.c_str(), refs.data(), refs.size(),
                                oracle ? 1 : 0, sep_out.c_str()),
                  "separate");
  }

  if (ev->parsed())
    return finish(
        holder,
        mbss_evaluate(holder.ctx, ev_manifest.c_str(), ev_bank.c_str(),
                      ev_ckpt.empty() ? nullptr : ev_ckpt.c_str(),
                      ev_systems.empty() ? nullptr : ev_systems.c_str(),
                      ev_csv.c_str(),
                      ev_summary.empty() ? nullptr : ev_summary.c_str()),
        "evaluate");

  return 1;
}
