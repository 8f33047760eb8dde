/*
 * mlfg — latent fingerprint enhancement toolkit, C API.
 *
 * Everything the command-line tool does is reachable through this header:
 * synthetic dataset generation, two-phase training (MG pretraining, then
 * the main enhancement network against a frozen MG), image enhancement,
 * branch-weight region maps, and the evaluation/identification harness.
 *
 * All functions return mlfg_status; on failure a human-readable message is
 * written to the caller's errbuf (always NUL-terminated when errcap > 0).
 * Handles are opaque and single-threaded unless noted; a model handle may
 * be shared across threads for concurrent enhancement calls.
 */
#ifndef MLFG_H
#define MLFG_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mlfg_status {
  MLFG_OK = 0,
  MLFG_ERR_VALIDATION = 1, /* bad arguments, malformed files, contract violations */
  MLFG_ERR_IO = 2,         /* missing/unwritable files */
  MLFG_ERR_INTERNAL = 3
} mlfg_status;

typedef struct mlfg_model mlfg_model; /* opaque enhancer handle */

const char* mlfg_version(void);

/* ---- model lifecycle ---- */

/* Opens a tbsfnet/mlfgnet checkpoint (format MLFG-CKPT-1). */
mlfg_status mlfg_model_open(const char* checkpoint_path, mlfg_model** out_model, char* errbuf,
                            size_t errcap);
void mlfg_model_close(mlfg_model* model);

/* "tbsfnet" or "mlfgnet"; pointer owned by the handle. */
const char* mlfg_model_variant(const mlfg_model* model);

/* ---- enhancement ---- */

/* input/output: h*w row-major floats in [0,1]. Arbitrary sizes; the image
 * is reflect-padded to a multiple of 32 internally and cropped back. */
mlfg_status mlfg_enhance_buffer(const mlfg_model* model, const float* input, int h, int w,
                                float* output, char* errbuf, size_t errcap);

/* PNG in, PNG out. With emit_aux != 0 also writes <out>_weights.f32 and,
 * for mlfgnet, <out>_ori_msff.f32 / <out>_ori_tbsf.f32. When out_wrote_ori
 * is non-NULL it reports whether orientation grids were produced. */
mlfg_status mlfg_enhance_file(const mlfg_model* model, const char* input_png,
                              const char* output_png, int emit_aux, int* out_wrote_ori,
                              char* errbuf, size_t errcap);

/* Branch-weight overlays: <prefix>_high.png, _low.png, _bg.png and the RGB
 * composite <prefix>_composite.png (R=low, G=high, B=background). */
mlfg_status mlfg_regions_file(const mlfg_model* model, const char* input_png,
                              const char* out_prefix, char* errbuf, size_t errcap);

/* ---- dataset generation ---- */

/* Writes n fully labeled synthetic samples plus manifest.json into out_dir.
 * config_path (optional) and overrides ("degrade.key=value") configure the
 * degradation model. size must be a multiple of 32. */
mlfg_status mlfg_datagen(const char* out_dir, int n, int size, long long seed,
                         const char* config_path, const char* const* overrides, int n_overrides,
                         char* errbuf, size_t errcap);

/* ---- training ---- */

/* Runs one training phase driven by a key=value config file plus overrides.
 * force_phase may be NULL, "mg" or "main" (the CLI's train-mg uses "mg").
 * The final checkpoint path is copied into out_ckpt when provided. */
mlfg_status mlfg_train(const char* config_path, const char* const* overrides, int n_overrides,
                       const char* force_phase, char* out_ckpt, size_t out_ckpt_cap, char* errbuf,
                       size_t errcap);

/* ---- evaluation ---- */

/* Enhances every sample of the dataset, matches minutiae against the
 * clean-target gallery and writes report_path (CSV) + report_path.txt.
 * mg_checkpoint (optional) enables the minutiae-map AUC metric; include_raw
 * adds the raw-probe rank table. ranks may be NULL for {1,5,10,20}. */
mlfg_status mlfg_evaluate(const char* checkpoint, const char* dataset_dir,
                          const char* report_path, const char* mg_checkpoint, int include_raw,
                          const int* ranks, int n_ranks, char* errbuf, size_t errcap);

#ifdef __cplusplus
}
#endif

#endif /* MLFG_H */
