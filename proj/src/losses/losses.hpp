#pragma once

#include "models/model.hpp"

namespace mlfg::losses {

template <typename T>
struct LossWeights {
  T lambda_rec = T(1.0);
  T lambda_ori = T(0.5);  // applied to each of the two orientation heads
  T lambda_mg = T(0.1);
  T w_m = T(3.0);  // reconstruction amplification inside minutiae regions
};

// Mean over all pixels of (1 + (w_m - 1) * M(p)) * |pred - target|.
// `minutiae_map` is the full-resolution weighting raster in [0,1]; pass an
// all-zero raster for plain L1.
template <typename T>
Var<T> rec_loss(const Var<T>& pred, const Tensor<T>& target, const Tensor<T>& minutiae_map,
                T w_m);

// Mean over masked cells of |(s,c)_pred - (s,c)_gt|^2 (both planes summed);
// returns 0 when the mask is empty.
template <typename T>
Var<T> ori_loss(const Var<T>& pred, const Tensor<T>& gt_sc, const Tensor<T>& mask);

// Mean BCE with soft labels; predictions clamped at 1e-7 before the logs.
template <typename T>
Var<T> mg_pretrain_loss(const Var<T>& pred, const Tensor<T>& gt);

// Runs the frozen MG on the enhanced image and scores its prediction
// against the ground-truth region map. Gradient reaches `enhanced` only.
template <typename T>
Var<T> mg_guidance_loss(const models::MgModel<T>& mg, const Var<T>& enhanced,
                        const Tensor<T>& gt_map);

template <typename T>
struct BatchTargets {
  Tensor<T> target;        // {N,1,H,W}
  Tensor<T> ori_sc;        // {N,2,H/8,W/8}
  Tensor<T> ori_mask;      // {N,1,H/8,W/8}, 1 on foreground cells
  Tensor<T> minumap_grid;  // {N,1,H/8,W/8}
};

template <typename T>
struct LossBreakdown {
  Var<T> total;
  double rec = 0.0, ori_msff = 0.0, ori_tbsf = 0.0, mg = 0.0;
};

// lambda_rec*rec + lambda_ori*(ori_msff + ori_tbsf) + lambda_mg*guidance for
// mlfgnet outputs; the tbsfnet variant uses the rec term only. The rec
// weighting raster is the frozen MG's prediction on the enhanced output,
// detached and bilinearly upsampled x8; the guidance target is the ground
// truth map.
template <typename T>
LossBreakdown<T> total_loss(const models::EnhanceOutput<T>& out, const BatchTargets<T>& tgt,
                            models::Variant variant, const models::MgModel<T>* mg,
                            const LossWeights<T>& w);

}  // namespace mlfg::losses
