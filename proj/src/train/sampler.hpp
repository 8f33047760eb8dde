#pragma once

#include "core/tensor.hpp"
#include "synth/dataset.hpp"

namespace mlfg::train {

struct Batch {
  Tensor<float> degraded;  // {N,1,P,P}
  Tensor<float> target;    // {N,1,P,P}
  Tensor<float> ori_sc;    // {N,2,P/8,P/8}
  Tensor<float> ori_mask;  // {N,1,P/8,P/8}
  Tensor<float> minumap;   // {N,1,P/8,P/8}
};

struct CropPlan {
  int index = 0;
  int oy = 0, ox = 0;  // pixel offsets, multiples of 32
  bool flip = false;   // horizontal
};

// The per-step plan is a pure function of (seed, step), which is what makes
// checkpoint resume replay the exact data order.
std::vector<CropPlan> plan_batch(uint64_t seed, int64_t step, int batch_size, int n_samples,
                                 int sample_px, int patch_px, bool flip_augment);

Batch assemble_batch(const synth::Dataset& ds, const std::vector<CropPlan>& plan, int patch_px);

Batch sample_batch(const synth::Dataset& ds, uint64_t seed, int64_t step, int batch_size,
                   int patch_px, bool flip_augment);

// Horizontal flip of a doubled-angle field: x reversed, sin plane negated,
// cos plane kept.
synth::OrientationField flip_field_x(const synth::OrientationField& f);

}  // namespace mlfg::train
