#include "models/model.hpp"

#include <stdexcept>

namespace mlfg::models {

using namespace mlfg::nn;
using namespace mlfg::ops;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kTbsfNet: return "tbsfnet";
    case Variant::kMlfgNet: return "mlfgnet";
    case Variant::kMg: return "mg";
  }
  return "?";
}

std::optional<Variant> variant_from_name(const std::string& s) {
  if (s == "tbsfnet") return Variant::kTbsfNet;
  if (s == "mlfgnet") return Variant::kMlfgNet;
  if (s == "mg") return Variant::kMg;
  return std::nullopt;
}

template <typename T>
Enhancer<T>::Enhancer(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg), seed_(seed) {
  if (cfg.variant == Variant::kMg) throw std::invalid_argument("enhancer: variant must be tbsfnet or mlfgnet");
  const bool with_oe = cfg.variant == Variant::kMlfgNet;
  const auto& ch = cfg.block.encoder_channels;
  const int c = cfg.block.base_channels;
  enc1_ = std::make_unique<DownStage<T>>(store_, "enc1", 1, ch[0], Act::kPrelu);
  enc2_ = std::make_unique<DownStage<T>>(store_, "enc2", ch[0], ch[1], Act::kPrelu);
  enc3_ = std::make_unique<DownStage<T>>(store_, "enc3", ch[1], ch[2], Act::kPrelu);
  for (int i = 0; i < cfg.tbsf_count; ++i)
    tbsf_.push_back(std::make_unique<TbsfBlock<T>>(store_, "tbsf" + std::to_string(i), c, with_oe,
                                                   cfg.block));
  for (int i = 0; i < cfg.msff_count; ++i) {
    Msff m;
    const std::string base = "msff" + std::to_string(i);
    m.msfe = std::make_unique<Msfe<T>>(store_, base + ".msfe", c, cfg.block);
    m.trunk = std::make_unique<Msfs<T>>(store_, base + ".msfs", 3 * c, c);
    if (with_oe) m.ori = std::make_unique<Msfs<T>>(store_, base + ".ori_msfs", 3 * c, 2);
    msff_.push_back(std::move(m));
  }
  dec1_ = std::make_unique<UpStage<T>>(store_, "dec1", c, ch[1]);
  dec2_ = std::make_unique<UpStage<T>>(store_, "dec2", ch[1], ch[0]);
  dec3_ = std::make_unique<UpStage<T>>(store_, "dec3", ch[0], 1);
  store_.init_params(seed);
}

template <typename T>
EnhanceOutput<T> Enhancer<T>::forward(const Var<T>& image, bool training) const {
  auto d = dims4(image->value);
  if (d.c != 1) throw std::invalid_argument("enhancer: expected 1 input channel");
  if (d.h % 32 != 0 || d.w % 32 != 0)
    throw std::invalid_argument("enhancer: H and W must be divisible by 32, got " +
                                shape_str(image->value.shape));
  RunCtx<T> ctx{training};
  EnhanceOutput<T> out;

  auto y = enc3_->forward(enc2_->forward(enc1_->forward(image, ctx), ctx), ctx);
  for (auto& tb : tbsf_) {
    auto t = tb->forward(y, ctx);
    y = t.fused;
    out.w_high = t.w_high;
    out.w_low = t.w_low;
    out.w_bg = t.w_bg;
    if (t.orientation) out.ori_tbsf = t.orientation;
  }
  for (auto& m : msff_) {
    auto feats = m.msfe->forward(y, ctx);
    if (m.ori) out.ori_msff = tanh_op(m.ori->forward(feats, ctx));
    y = m.trunk->forward(feats, ctx);
  }
  y = dec3_->forward(dec2_->forward(dec1_->forward(y, ctx), ctx), ctx);
  // Tanh maps to (-1,1); the affine map is the unique one onto (0,1).
  out.enhanced = affine(tanh_op(y), T(0.5), T(0.5));
  return out;
}

template <typename T>
MgModel<T>::MgModel(const nn::BlockConfig& cfg, uint64_t seed) : seed_(seed), cfg_(cfg) {
  net_ = std::make_unique<MgNet<T>>(store_, "mg", cfg);
  store_.init_params(seed);
}

template <typename T>
Var<T> MgModel<T>::forward(const Var<T>& image, bool training) const {
  return net_->forward(image, RunCtx<T>{training});
}

template class Enhancer<float>;
template class Enhancer<double>;
template class MgModel<float>;
template class MgModel<double>;

}  // namespace mlfg::models
