#pragma once

#include <optional>
#include <string>
#include <vector>

#include "models/checkpoint.hpp"
#include "synth/dataset.hpp"

namespace mlfg::eval {

struct EnhanceResult {
  synth::Image enhanced;         // original size
  int gh = 0, gw = 0;            // cropped grid dims (ceil of size/8)
  std::vector<float> w_high, w_low, w_bg;        // gh*gw each
  std::vector<float> ori_msff_s, ori_msff_c;     // mlfgnet only
  std::vector<float> ori_tbsf_s, ori_tbsf_c;
  bool has_orientation = false;
};

// Reflect-pads to the next multiple of 32 (bottom/right), runs an eval-mode
// forward, crops back. Aux grids are cropped to ceil(h/8) x ceil(w/8).
EnhanceResult enhance_image(const models::Enhancer<float>& model, const synth::Image& input,
                            bool want_aux);

// binarize(0.5) -> thin -> crossing number; angles from the structure tensor
// of the image itself, restricted to the given foreground mask.
std::vector<synth::MinutiaPoint> minutiae_from_image(const synth::Image& img,
                                                     const synth::OrientationField& fg_field);

struct EvalOptions {
  std::string mg_checkpoint;  // enables minumap_auc when set
  bool include_raw = false;   // also score raw degraded probes
  std::vector<int> ranks = {1, 5, 10, 20};
};

struct MetricsReport {
  double rec_l1 = 0;
  double psnr = 0;
  std::optional<double> ori_rmse_deg;       // MSFF_O head
  std::optional<double> ori_rmse_tbsf_deg;  // TBSF_O head
  std::optional<double> minumap_auc;
  std::vector<std::pair<int, double>> rank_enhanced;
  std::vector<std::pair<int, double>> rank_raw;
  int n_samples = 0;
};

// Enhances every probe, matches extracted minutiae against the clean-target
// gallery and writes `report_path` (CSV) plus `report_path`.txt (summary).
MetricsReport evaluate(const std::string& model_path, const std::string& dataset_dir,
                       const std::string& report_path, const EvalOptions& opts = {});

void write_report(const std::string& report_path, const MetricsReport& r);

// `enhance` subcommand body: reads an 8-bit grayscale PNG, writes the
// enhanced PNG, and with emit_aux also <out>_weights.f32 (3 planes) plus,
// for mlfgnet checkpoints, <out>_ori_msff.f32 / <out>_ori_tbsf.f32 (2 planes
// each). Returns whether orientation grids were written.
bool enhance_file(const models::Enhancer<float>& model, const std::string& input_png,
                  const std::string& output_png, bool emit_aux);

// `regions` subcommand body: nearest-upsampled (x8) branch weight maps as
// <prefix>_high.png, _low.png, _bg.png and an RGB composite
// <prefix>_composite.png with R=low, G=high, B=background.
void regions_files(const models::Enhancer<float>& model, const std::string& input_png,
                   const std::string& out_prefix);

}  // namespace mlfg::eval
