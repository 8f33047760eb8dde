// mlfg command-line tool. Thin argv layer over the C API in mlfg/mlfg.h;
// exit codes: 0 success, 1 validation error, 2 I/O error. All human
// messages go to stderr, files are the only other output.

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "mlfg/mlfg.h"

namespace {

char g_err[1024];

int status_to_exit(mlfg_status s) {
  switch (s) {
    case MLFG_OK: return 0;
    case MLFG_ERR_IO: return 2;
    default: return 1;
  }
}

int finish(mlfg_status s, const char* what) {
  if (s != MLFG_OK) std::fprintf(stderr, "mlfg: %s: %s\n", what, g_err);
  return status_to_exit(s);
}

std::vector<const char*> as_cstrs(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (auto& s : v) out.push_back(s.c_str());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent fingerprint enhancement toolkit"};
  app.require_subcommand(1);
  g_err[0] = '\0';

  // datagen
  auto* datagen = app.add_subcommand("datagen", "generate a labeled synthetic dataset");
  int dg_n = 0, dg_size = 0;
  long long dg_seed = 0;
  std::string dg_out, dg_config;
  std::vector<std::string> dg_set;
  datagen->add_option("--n", dg_n, "number of samples")->required();
  datagen->add_option("--size", dg_size, "sample size in pixels (multiple of 32)")->required();
  datagen->add_option("--seed", dg_seed, "dataset seed");
  datagen->add_option("--out", dg_out, "output directory")->required();
  datagen->add_option("--config", dg_config, "degradation config file (degrade.* keys)");
  datagen->add_option("--set", dg_set, "override, key=value (repeatable)");

  // train / train-mg
  std::string tr_config, tr_mg_config;
  std::vector<std::string> tr_set, tr_mg_set;
  auto* train = app.add_subcommand("train", "train the enhancement network (phase from config)");
  train->add_option("--config", tr_config, "training config file")->required();
  train->add_option("--set", tr_set, "override, key=value (repeatable)");
  auto* train_mg = app.add_subcommand("train-mg", "pretrain the minutiae-guidance network");
  train_mg->add_option("--config", tr_mg_config, "training config file")->required();
  train_mg->add_option("--set", tr_mg_set, "override, key=value (repeatable)");

  // enhance
  auto* enhance = app.add_subcommand("enhance", "enhance a grayscale PNG");
  std::string en_model, en_in, en_out;
  bool en_aux = false;
  enhance->add_option("--model", en_model, "checkpoint path")->required();
  enhance->add_option("--in", en_in, "input PNG")->required();
  enhance->add_option("--out", en_out, "output PNG")->required();
  enhance->add_flag("--aux", en_aux, "also write weight/orientation rasters");

  // regions
  auto* regions = app.add_subcommand("regions", "write branch-weight region overlays");
  std::string rg_model, rg_in, rg_prefix;
  regions->add_option("--model", rg_model, "checkpoint path")->required();
  regions->add_option("--in", rg_in, "input PNG")->required();
  regions->add_option("--out-prefix", rg_prefix, "output path prefix")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "run the evaluation harness on a dataset");
  std::string ev_model, ev_data, ev_report, ev_mg;
  bool ev_raw = false;
  std::vector<int> ev_ranks;
  eval->add_option("--model", ev_model, "checkpoint path")->required();
  eval->add_option("--data", ev_data, "dataset directory")->required();
  eval->add_option("--report", ev_report, "report CSV path")->required();
  eval->add_option("--mg", ev_mg, "MG checkpoint (enables minutiae-map AUC)");
  eval->add_flag("--raw", ev_raw, "also rank raw degraded probes");
  eval->add_option("--ranks", ev_ranks, "rank cutoffs (default 1 5 10 20)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Spec: exit codes are the machine contract, human text on stderr.
    std::string msg;
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      std::fputs(app.help().c_str(), stderr);
      return 0;
    }
    std::fprintf(stderr, "mlfg: %s\n", e.what());
    std::fputs(app.help().c_str(), stderr);
    return 1;
  }

  if (*datagen) {
    auto set = as_cstrs(dg_set);
    return finish(mlfg_datagen(dg_out.c_str(), dg_n, dg_size, dg_seed,
                               dg_config.empty() ? nullptr : dg_config.c_str(), set.data(),
                               static_cast<int>(set.size()), g_err, sizeof g_err),
                  "datagen");
  }
  if (*train || *train_mg) {
    const bool mg = train_mg->parsed();
    auto set = as_cstrs(mg ? tr_mg_set : tr_set);
    char ckpt[1024] = {0};
    const mlfg_status s =
        mlfg_train((mg ? tr_mg_config : tr_config).c_str(), set.data(),
                   static_cast<int>(set.size()), mg ? "mg" : nullptr, ckpt, sizeof ckpt, g_err,
                   sizeof g_err);
    if (s == MLFG_OK) std::fprintf(stderr, "mlfg: checkpoint written to %s\n", ckpt);
    return finish(s, mg ? "train-mg" : "train");
  }
  if (*enhance) {
    mlfg_model* model = nullptr;
    mlfg_status s = mlfg_model_open(en_model.c_str(), &model, g_err, sizeof g_err);
    if (s != MLFG_OK) return finish(s, "enhance");
    int wrote_ori = 0;
    s = mlfg_enhance_file(model, en_in.c_str(), en_out.c_str(), en_aux ? 1 : 0, &wrote_ori, g_err,
                          sizeof g_err);
    if (s == MLFG_OK && en_aux && !wrote_ori)
      std::fprintf(stderr, "mlfg: %s checkpoint has no orientation heads; wrote weight maps only\n",
                   mlfg_model_variant(model));
    mlfg_model_close(model);
    return finish(s, "enhance");
  }
  if (*regions) {
    mlfg_model* model = nullptr;
    mlfg_status s = mlfg_model_open(rg_model.c_str(), &model, g_err, sizeof g_err);
    if (s != MLFG_OK) return finish(s, "regions");
    s = mlfg_regions_file(model, rg_in.c_str(), rg_prefix.c_str(), g_err, sizeof g_err);
    mlfg_model_close(model);
    return finish(s, "regions");
  }
  if (*eval) {
    return finish(mlfg_evaluate(ev_model.c_str(), ev_data.c_str(), ev_report.c_str(),
                                ev_mg.empty() ? nullptr : ev_mg.c_str(), ev_raw ? 1 : 0,
                                ev_ranks.empty() ? nullptr : ev_ranks.data(),
                                static_cast<int>(ev_ranks.size()), g_err, sizeof g_err),
                  "eval");
  }
  return 1;
}
