#include "mlfg/mlfg.h"

#include <cstring>
#include <memory>
#include <string>

#include "core/errors.hpp"
#include "eval/evaluate.hpp"
#include "io/config.hpp"
#include "synth/dataset.hpp"
#include "train/trainer.hpp"

using namespace mlfg;

struct mlfg_model {
  std::unique_ptr<models::Enhancer<float>> enhancer;
  std::string variant;
};

namespace {

void put_err(char* errbuf, size_t errcap, const std::string& msg) {
  if (!errbuf || errcap == 0) return;
  const size_t n = std::min(errcap - 1, msg.size());
  std::memcpy(errbuf, msg.data(), n);
  errbuf[n] = '\0';
}

template <typename Fn>
mlfg_status guarded(char* errbuf, size_t errcap, Fn&& fn) {
  try {
    fn();
    return MLFG_OK;
  } catch (const IoError& e) {
    put_err(errbuf, errcap, e.what());
    return MLFG_ERR_IO;
  } catch (const ValidationError& e) {
    put_err(errbuf, errcap, e.what());
    return MLFG_ERR_VALIDATION;
  } catch (const ContractError& e) {
    put_err(errbuf, errcap, e.what());
    return MLFG_ERR_VALIDATION;
  } catch (const std::invalid_argument& e) {
    put_err(errbuf, errcap, e.what());
    return MLFG_ERR_VALIDATION;
  } catch (const std::exception& e) {
    put_err(errbuf, errcap, e.what());
    return MLFG_ERR_INTERNAL;
  }
}

io::Config load_config(const char* config_path, const char* const* overrides, int n_overrides) {
  io::Config cfg;
  if (config_path && config_path[0]) cfg = io::Config::from_file(config_path);
  for (int i = 0; i < n_overrides; ++i) cfg.apply_override(overrides[i]);
  return cfg;
}

}  // namespace

extern "C" {

const char* mlfg_version(void) { return "mlfg 1.0.0 (MLFG-CKPT-1)"; }

mlfg_status mlfg_model_open(const char* checkpoint_path, mlfg_model** out_model, char* errbuf,
                            size_t errcap) {
  if (!checkpoint_path || !out_model) {
    put_err(errbuf, errcap, "mlfg_model_open: NULL argument");
    return MLFG_ERR_VALIDATION;
  }
  *out_model = nullptr;
  return guarded(errbuf, errcap, [&] {
    auto m = std::make_unique<mlfg_model>();
    m->enhancer = models::load_enhancer<float>(checkpoint_path);
    m->variant = models::variant_name(m->enhancer->variant());
    *out_model = m.release();
  });
}

void mlfg_model_close(mlfg_model* model) { delete model; }

const char* mlfg_model_variant(const mlfg_model* model) {
  return model ? model->variant.c_str() : "";
}

mlfg_status mlfg_enhance_buffer(const mlfg_model* model, const float* input, int h, int w,
                                float* output, char* errbuf, size_t errcap) {
  if (!model || !input || !output) {
    put_err(errbuf, errcap, "mlfg_enhance_buffer: NULL argument");
    return MLFG_ERR_VALIDATION;
  }
  return guarded(errbuf, errcap, [&] {
    if (h <= 0 || w <= 0) throw ValidationError("mlfg_enhance_buffer: empty image");
    synth::Image img(h, w);
    std::memcpy(img.v.data(), input, sizeof(float) * img.v.size());
    auto res = eval::enhance_image(*model->enhancer, img, /*want_aux=*/false);
    std::memcpy(output, res.enhanced.v.data(), sizeof(float) * res.enhanced.v.size());
  });
}

mlfg_status mlfg_enhance_file(const mlfg_model* model, const char* input_png,
                              const char* output_png, int emit_aux, int* out_wrote_ori,
                              char* errbuf, size_t errcap) {
  if (!model || !input_png || !output_png) {
    put_err(errbuf, errcap, "mlfg_enhance_file: NULL argument");
    return MLFG_ERR_VALIDATION;
  }
  return guarded(errbuf, errcap, [&] {
    const bool wrote = eval::enhance_file(*model->enhancer, input_png, output_png, emit_aux != 0);
    if (out_wrote_ori) *out_wrote_ori = wrote ? 1 : 0;
  });
}

mlfg_status mlfg_regions_file(const mlfg_model* model, const char* input_png,
                              const char* out_prefix, char* errbuf, size_t errcap) {
  if (!model || !input_png || !out_prefix) {
    put_err(errbuf, errcap, "mlfg_regions_file: NULL argument");
    return MLFG_ERR_VALIDATION;
  }
  return guarded(errbuf, errcap,
                 [&] { eval::regions_files(*model->enhancer, input_png, out_prefix); });
}

mlfg_status mlfg_datagen(const char* out_dir, int n, int size, long long seed,
                         const char* config_path, const char* const* overrides, int n_overrides,
                         char* errbuf, size_t errcap) {
  if (!out_dir) {
    put_err(errbuf, errcap, "mlfg_datagen: NULL out_dir");
    return MLFG_ERR_VALIDATION;
  }
  return guarded(errbuf, errcap, [&] {
    io::Config cfg = load_config(config_path, overrides, n_overrides);
    cfg.require_known(synth::degradation_config_keys());
    const auto deg = synth::degradation_from_config(cfg);
    synth::make_dataset(n, size, deg, static_cast<uint64_t>(seed), out_dir);
  });
}

mlfg_status mlfg_train(const char* config_path, const char* const* overrides, int n_overrides,
                       const char* force_phase, char* out_ckpt, size_t out_ckpt_cap, char* errbuf,
                       size_t errcap) {
  return guarded(errbuf, errcap, [&] {
    io::Config cfg = load_config(config_path, overrides, n_overrides);
    auto tc = train::TrainConfig::from_config(cfg);
    if (force_phase && force_phase[0]) tc.phase = force_phase;
    tc.validate();
    const std::string path = train::train(tc);
    if (out_ckpt && out_ckpt_cap > 0) {
      const size_t nn = std::min(out_ckpt_cap - 1, path.size());
      std::memcpy(out_ckpt, path.data(), nn);
      out_ckpt[nn] = '\0';
    }
  });
}

mlfg_status mlfg_evaluate(const char* checkpoint, const char* dataset_dir,
                          const char* report_path, const char* mg_checkpoint, int include_raw,
                          const int* ranks, int n_ranks, char* errbuf, size_t errcap) {
  if (!checkpoint || !dataset_dir || !report_path) {
    put_err(errbuf, errcap, "mlfg_evaluate: NULL argument");
    return MLFG_ERR_VALIDATION;
  }
  return guarded(errbuf, errcap, [&] {
    eval::EvalOptions opts;
    if (mg_checkpoint && mg_checkpoint[0]) opts.mg_checkpoint = mg_checkpoint;
    opts.include_raw = include_raw != 0;
    if (ranks && n_ranks > 0) opts.ranks.assign(ranks, ranks + n_ranks);
    eval::evaluate(checkpoint, dataset_dir, report_path, opts);
  });
}

}  // extern "C"
