#include "losses/losses.hpp"

#include "core/errors.hpp"

namespace mlfg::losses {

using namespace mlfg::ops;

template <typename T>
Var<T> rec_loss(const Var<T>& pred, const Tensor<T>& target, const Tensor<T>& minutiae_map,
                T w_m) {
  if (!pred->value.same_shape(target) || !pred->value.same_shape(minutiae_map))
    throw ValidationError("rec_loss: shape mismatch, pred " + shape_str(pred->value.shape) +
                          " target " + shape_str(target.shape) + " map " +
                          shape_str(minutiae_map.shape));
  Tensor<T> weight(minutiae_map.shape);
  for (int64_t i = 0; i < weight.numel(); ++i)
    weight.data[i] = T(1) + (w_m - T(1)) * minutiae_map.data[i];
  auto diff = sub(pred, constant(target));
  return mean_all(mul_raster(abs_op(diff), std::move(weight)));
}

template <typename T>
Var<T> ori_loss(const Var<T>& pred, const Tensor<T>& gt_sc, const Tensor<T>& mask) {
  if (!pred->value.same_shape(gt_sc))
    throw ValidationError("ori_loss: shape mismatch, pred " + shape_str(pred->value.shape) +
                          " vs gt " + shape_str(gt_sc.shape));
  auto pd = dims4(pred->value);
  auto md = dims4(mask);
  if (md.n != pd.n || md.c != 1 || md.h != pd.h || md.w != pd.w)
    throw ValidationError("ori_loss: bad mask shape " + shape_str(mask.shape));
  double count = 0.0;
  for (auto v : mask.data) count += v;
  if (count <= 0.0) return constant(Tensor<T>::scalar(T(0)));
  auto sq = square(sub(pred, constant(gt_sc)));
  auto masked = mul_raster(sq, mask);  // mask broadcasts over the 2 planes
  return affine(sum_all(masked), static_cast<T>(1.0 / count), T(0));
}

template <typename T>
Var<T> mg_pretrain_loss(const Var<T>& pred, const Tensor<T>& gt) {
  if (!pred->value.same_shape(gt))
    throw ValidationError("mg_pretrain_loss: shape mismatch");
  return bce_mean(pred, gt, T(1e-7));
}

template <typename T>
Var<T> mg_guidance_loss(const models::MgModel<T>& mg, const Var<T>& enhanced,
                        const Tensor<T>& gt_map) {
  if (!mg.frozen())
    throw ContractError("mg_guidance_loss: MG network must be frozen");
  auto pred = mg.forward(enhanced, /*training=*/false);
  return mg_pretrain_loss(pred, gt_map);
}

template <typename T>
LossBreakdown<T> total_loss(const models::EnhanceOutput<T>& out, const BatchTargets<T>& tgt,
                            models::Variant variant, const models::MgModel<T>* mg,
                            const LossWeights<T>& w) {
  LossBreakdown<T> bd;
  std::vector<std::pair<T, Var<T>>> terms;

  if (variant == models::Variant::kMlfgNet) {
    if (!out.ori_msff || !out.ori_tbsf)
      throw ContractError("total_loss: mlfgnet output is missing an orientation head");
    if (!mg) throw ContractError("total_loss: mlfgnet training requires the frozen MG network");
    if (!mg->frozen()) throw ContractError("total_loss: MG network must be frozen");

    // One MG pass serves both roles: its graph value feeds the guidance
    // term, its detached value the reconstruction weighting raster.
    auto mg_pred = mg->forward(out.enhanced, /*training=*/false);
    Tensor<T> m_full = upsample_bilinear(mg_pred->value, 8);

    auto rec = rec_loss(out.enhanced, tgt.target, m_full, w.w_m);
    auto o1 = ori_loss(out.ori_msff, tgt.ori_sc, tgt.ori_mask);
    auto o2 = ori_loss(out.ori_tbsf, tgt.ori_sc, tgt.ori_mask);
    auto guide = mg_pretrain_loss(mg_pred, tgt.minumap_grid);

    bd.rec = rec->value.data[0];
    bd.ori_msff = o1->value.data[0];
    bd.ori_tbsf = o2->value.data[0];
    bd.mg = guide->value.data[0];
    terms = {{w.lambda_rec, rec}, {w.lambda_ori, o1}, {w.lambda_ori, o2}, {w.lambda_mg, guide}};
  } else {
    if (out.ori_msff || out.ori_tbsf)
      throw ContractError("total_loss: tbsfnet output unexpectedly has orientation heads");
    Tensor<T> zero_map(tgt.target.shape, T(0));
    auto rec = rec_loss(out.enhanced, tgt.target, zero_map, w.w_m);
    bd.rec = rec->value.data[0];
    terms = {{w.lambda_rec, rec}};
  }
  bd.total = wsum_scalars(terms);
  return bd;
}

#define MLFG_INSTANTIATE_LOSSES(T)                                                              \
  template Var<T> rec_loss<T>(const Var<T>&, const Tensor<T>&, const Tensor<T>&, T);            \
  template Var<T> ori_loss<T>(const Var<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Var<T> mg_pretrain_loss<T>(const Var<T>&, const Tensor<T>&);                         \
  template Var<T> mg_guidance_loss<T>(const models::MgModel<T>&, const Var<T>&,                 \
                                      const Tensor<T>&);                                        \
  template LossBreakdown<T> total_loss<T>(const models::EnhanceOutput<T>&,                      \
                                          const BatchTargets<T>&, models::Variant,              \
                                          const models::MgModel<T>*, const LossWeights<T>&);

MLFG_INSTANTIATE_LOSSES(float)
MLFG_INSTANTIATE_LOSSES(double)

}  // namespace mlfg::losses
