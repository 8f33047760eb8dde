#include "train/sampler.hpp"

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace mlfg::train {

using synth::OrientationField;

std::vector<CropPlan> plan_batch(uint64_t seed, int64_t step, int batch_size, int n_samples,
                                 int sample_px, int patch_px, bool flip_augment) {
  if (n_samples <= 0) throw ValidationError("sample_batch: dataset is empty");
  if (patch_px % 32 != 0 || patch_px <= 0)
    throw ValidationError("patch size must be a positive multiple of 32");
  if (patch_px > sample_px)
    throw ValidationError("patch size exceeds sample size");
  Pcg32 rng(child_seed(seed, 0xb000 + static_cast<uint64_t>(step)), 0x5eed);
  const int slots = (sample_px - patch_px) / 32 + 1;
  std::vector<CropPlan> plan;
  for (int i = 0; i < batch_size; ++i) {
    CropPlan p;
    p.index = static_cast<int>(rng.below(static_cast<uint32_t>(n_samples)));
    p.oy = 32 * static_cast<int>(rng.below(static_cast<uint32_t>(slots)));
    p.ox = 32 * static_cast<int>(rng.below(static_cast<uint32_t>(slots)));
    p.flip = flip_augment && rng.bernoulli(0.5);
    plan.push_back(p);
  }
  return plan;
}

namespace {

// Copy a patch of one full-res image into batch slot n, optionally x-flipped.
void copy_patch(const synth::Image& src, float* dst, int oy, int ox, int p, bool flip) {
  for (int y = 0; y < p; ++y)
    for (int x = 0; x < p; ++x)
      dst[static_cast<int64_t>(y) * p + x] = src.at(oy + y, flip ? ox + p - 1 - x : ox + x);
}

}  // namespace

Batch assemble_batch(const synth::Dataset& ds, const std::vector<CropPlan>& plan, int patch_px) {
  const int N = static_cast<int>(plan.size());
  const int P = patch_px;
  const int G = P / 8;
  Batch b;
  b.degraded = Tensor<float>({N, 1, P, P});
  b.target = Tensor<float>({N, 1, P, P});
  b.ori_sc = Tensor<float>({N, 2, G, G});
  b.ori_mask = Tensor<float>({N, 1, G, G});
  b.minumap = Tensor<float>({N, 1, G, G});

  for (int n = 0; n < N; ++n) {
    const auto& cp = plan[static_cast<size_t>(n)];
    const auto& s = ds.samples.at(static_cast<size_t>(cp.index));
    copy_patch(s.degraded, b.degraded.ptr() + static_cast<int64_t>(n) * P * P, cp.oy, cp.ox, P,
               cp.flip);
    copy_patch(s.target, b.target.ptr() + static_cast<int64_t>(n) * P * P, cp.oy, cp.ox, P,
               cp.flip);
    const int gy0 = cp.oy / 8, gx0 = cp.ox / 8;
    float* sv = b.ori_sc.ptr() + static_cast<int64_t>(n) * 2 * G * G;
    float* cv = sv + static_cast<int64_t>(G) * G;
    float* mv = b.ori_mask.ptr() + static_cast<int64_t>(n) * G * G;
    float* uv = b.minumap.ptr() + static_cast<int64_t>(n) * G * G;
    for (int y = 0; y < G; ++y)
      for (int x = 0; x < G; ++x) {
        const int sx = cp.flip ? gx0 + G - 1 - x : gx0 + x;
        const size_t si = static_cast<size_t>(gy0 + y) * s.field.gw + sx;
        const int64_t di = static_cast<int64_t>(y) * G + x;
        sv[di] = cp.flip ? -s.field.s[si] : s.field.s[si];
        cv[di] = s.field.c[si];
        mv[di] = s.field.mask[si] ? 1.f : 0.f;
        uv[di] = s.minumap_grid.v[si];
      }
  }
  return b;
}

Batch sample_batch(const synth::Dataset& ds, uint64_t seed, int64_t step, int batch_size,
                   int patch_px, bool flip_augment) {
  auto plan = plan_batch(seed, step, batch_size, static_cast<int>(ds.samples.size()), ds.size_px,
                         patch_px, flip_augment);
  return assemble_batch(ds, plan, patch_px);
}

OrientationField flip_field_x(const OrientationField& f) {
  OrientationField out(f.gh, f.gw);
  for (int y = 0; y < f.gh; ++y)
    for (int x = 0; x < f.gw; ++x) {
      const size_t src = static_cast<size_t>(y) * f.gw + (f.gw - 1 - x);
      const size_t dst = static_cast<size_t>(y) * f.gw + x;
      out.s[dst] = -f.s[src];
      out.c[dst] = f.c[src];
      out.mask[dst] = f.mask[src];
    }
  return out;
}

}  // namespace mlfg::train
