#pragma once

#include <optional>

#include "synth/types.hpp"

namespace mlfg::eval {

// Angular RMSE in degrees between two doubled-angle grids over masked cells.
// Each cell's error is the half-angle of the doubled difference, folded into
// [-90, 90]. Empty mask -> absent.
std::optional<double> ori_rmse_deg(const synth::OrientationField& pred,
                                   const synth::OrientationField& gt);

// Area under the ROC of pred scores against gt binarized at `threshold`.
// Ties handled by midrank averaging (equivalent to the trapezoidal ROC over
// unique thresholds). Absent when gt is single-class.
std::optional<double> roc_auc(const std::vector<float>& pred, const std::vector<float>& gt,
                              float threshold = 0.5f);

double l1_error(const synth::Image& a, const synth::Image& b);
double psnr_db(const synth::Image& a, const synth::Image& b);  // MAX = 1

// Structure-tensor orientation estimate of a grayscale image on the 1/8
// grid; the mask marks cells with enough gradient coherence to trust.
synth::OrientationField orientation_from_image(const synth::Image& img);

}  // namespace mlfg::eval
