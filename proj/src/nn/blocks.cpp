#include "nn/blocks.hpp"

#include <stdexcept>

namespace mlfg::nn {

using namespace mlfg::ops;

namespace {
void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace

// ---- Conv2d ----

template <typename T>
Conv2d<T>::Conv2d(ParamStore<T>& s, const std::string& path, int cin, int cout, int k, int stride,
                  int pad, int dilation, bool bias)
    : stride_(stride), pad_(pad), dilation_(dilation) {
  w_ = &s.add(path + ".weight", {cout, cin, k, k}, true, InitKind::kKaimingConv, cin * k * k);
  if (bias) b_ = &s.add(path + ".bias", {cout}, true, InitKind::kZeros);
}

template <typename T>
Var<T> Conv2d<T>::forward(const Var<T>& x) const {
  return conv2d(x, w_->var, b_ ? b_->var : Var<T>{}, stride_, pad_, dilation_);
}

// ---- ConvTranspose2d ----

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(ParamStore<T>& s, const std::string& path, int cin, int cout,
                                    int k, int stride, int pad, int output_padding, bool bias)
    : stride_(stride), pad_(pad), outpad_(output_padding) {
  w_ = &s.add(path + ".weight", {cin, cout, k, k}, true, InitKind::kKaimingConv, cin * k * k);
  if (bias) b_ = &s.add(path + ".bias", {cout}, true, InitKind::kZeros);
}

template <typename T>
Var<T> ConvTranspose2d<T>::forward(const Var<T>& x) const {
  return conv_transpose2d(x, w_->var, b_ ? b_->var : Var<T>{}, stride_, pad_, outpad_);
}

// ---- BatchNorm2d ----

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ParamStore<T>& s, const std::string& path, int c) {
  gamma_ = &s.add(path + ".gamma", {c}, true, InitKind::kOnes);
  beta_ = &s.add(path + ".beta", {c}, true, InitKind::kZeros);
  run_mean_ = &s.add(path + ".running_mean", {c}, false, InitKind::kZeros);
  run_var_ = &s.add(path + ".running_var", {c}, false, InitKind::kOnes);
}

template <typename T>
Var<T> BatchNorm2d<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  return batch_norm(x, gamma_->var, beta_->var, run_mean_->var, run_var_->var, ctx.training);
}

// ---- Activation ----

template <typename T>
Activation<T>::Activation(ParamStore<T>& s, const std::string& path, Act kind,
                          double negative_slope)
    : kind_(kind), slope_(negative_slope) {
  if (kind == Act::kPrelu) prelu_ = &s.add(path + ".prelu", {1}, true, InitKind::kPreluSlope);
}

template <typename T>
Var<T> Activation<T>::forward(const Var<T>& x) const {
  if (kind_ == Act::kPrelu) return prelu(x, prelu_->var);
  return leaky_relu(x, slope_);
}

// ---- DownStage ----

template <typename T>
DownStage<T>::DownStage(ParamStore<T>& s, const std::string& path, int cin, int cout, Act act,
                        double negative_slope) {
  conv_ = std::make_unique<Conv2d<T>>(s, path + ".conv", cin, cout, 3, 2, 1, 1, false);
  bn_ = std::make_unique<BatchNorm2d<T>>(s, path + ".bn", cout);
  act_ = std::make_unique<Activation<T>>(s, path + ".act", act, negative_slope);
}

template <typename T>
Var<T> DownStage<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  auto d = dims4(x->value);
  require(d.h % 2 == 0 && d.w % 2 == 0,
          "down_stage: spatial dims must be even, got " + shape_str(x->value.shape));
  return act_->forward(bn_->forward(conv_->forward(x), ctx));
}

// ---- UpStage ----

template <typename T>
UpStage<T>::UpStage(ParamStore<T>& s, const std::string& path, int cin, int cout) {
  tconv_ = std::make_unique<ConvTranspose2d<T>>(s, path + ".tconv", cin, cout, 3, 2, 1, 1, false);
  bn_ = std::make_unique<BatchNorm2d<T>>(s, path + ".bn", cout);
  act_ = std::make_unique<Activation<T>>(s, path + ".act", Act::kPrelu, 0.2);
  conv_ = std::make_unique<Conv2d<T>>(s, path + ".conv", cout, cout, 3, 1, 1, 1, true);
}

template <typename T>
Var<T> UpStage<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  return conv_->forward(act_->forward(bn_->forward(tconv_->forward(x), ctx)));
}

// ---- ResidualBlock ----

template <typename T>
ResidualBlock<T>::ResidualBlock(ParamStore<T>& s, const std::string& path, int c, Act act,
                                double negative_slope) {
  conv1_ = std::make_unique<Conv2d<T>>(s, path + ".conv1", c, c, 3, 1, 1, 1, false);
  bn1_ = std::make_unique<BatchNorm2d<T>>(s, path + ".bn1", c);
  act1_ = std::make_unique<Activation<T>>(s, path + ".act1", act, negative_slope);
  conv2_ = std::make_unique<Conv2d<T>>(s, path + ".conv2", c, c, 3, 1, 1, 1, false);
  bn2_ = std::make_unique<BatchNorm2d<T>>(s, path + ".bn2", c);
  act_out_ = std::make_unique<Activation<T>>(s, path + ".act2", act, negative_slope);
}

template <typename T>
Var<T> ResidualBlock<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  auto f = bn2_->forward(
      conv2_->forward(act1_->forward(bn1_->forward(conv1_->forward(x), ctx))), ctx);
  return act_out_->forward(add(x, f));
}

// ---- Msfe ----

template <typename T>
Msfe<T>::Msfe(ParamStore<T>& s, const std::string& path, int c, const BlockConfig& cfg) {
  for (int i = 0; i < 3; ++i) {
    Path p;
    const int d = cfg.dilations[i];
    const std::string base = path + ".d" + std::to_string(d);
    p.conv = std::make_unique<Conv2d<T>>(s, base + ".conv", c, c, 3, 1, d, d, false);
    p.bn = std::make_unique<BatchNorm2d<T>>(s, base + ".bn", c);
    p.act = std::make_unique<Activation<T>>(s, base + ".act", Act::kPrelu, 0.2);
    paths_.push_back(std::move(p));
  }
}

template <typename T>
Var<T> Msfe<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  std::vector<Var<T>> outs;
  for (auto& p : paths_) outs.push_back(p.act->forward(p.bn->forward(p.conv->forward(x), ctx)));
  return concat_ch(outs);
}

// ---- Msfs ----

template <typename T>
Msfs<T>::Msfs(ParamStore<T>& s, const std::string& path, int cin, int k) : plain_head_(k == 2) {
  const int hidden = std::max(1, cin / 4);
  gate1_ = std::make_unique<Conv2d<T>>(s, path + ".gate1", cin, hidden, 1, 1, 0, 1, true);
  gate2_ = std::make_unique<Conv2d<T>>(s, path + ".gate2", hidden, cin, 1, 1, 0, 1, true);
  proj_ = std::make_unique<Conv2d<T>>(s, path + ".proj", cin, k, 1, 1, 0, 1, plain_head_);
  if (!plain_head_) {
    bn_ = std::make_unique<BatchNorm2d<T>>(s, path + ".bn", k);
    act_ = std::make_unique<Activation<T>>(s, path + ".act", Act::kPrelu, 0.2);
  }
}

template <typename T>
Var<T> Msfs<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  // LeakyReLU rather than ReLU in the squeeze: GAP descriptors are nearly
  // identical across samples at init, so ReLU would leave a large share of
  // gate units with exactly-zero gradients.
  auto g = sigmoid(gate2_->forward(leaky_relu(gate1_->forward(global_avg_pool(x)), 0.1)));
  auto gated = channel_scale(g, x);
  auto y = proj_->forward(gated);
  if (plain_head_) return y;
  return act_->forward(bn_->forward(y, ctx));
}

// ---- OeBlock ----

template <typename T>
OeBlock<T>::OeBlock(ParamStore<T>& s, const std::string& path, int c, const BlockConfig& cfg) {
  msfe_ = std::make_unique<Msfe<T>>(s, path + ".msfe", c, cfg);
  msfs_ = std::make_unique<Msfs<T>>(s, path + ".msfs", 3 * c, 2);
}

template <typename T>
Var<T> OeBlock<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  return tanh_op(msfs_->forward(msfe_->forward(x, ctx), ctx));
}

// ---- Dbsa ----

template <typename T>
Dbsa<T>::Dbsa(ParamStore<T>& s, const std::string& path, int c) {
  const int inter = std::max(1, c / 2);
  w1_ = std::make_unique<Conv2d<T>>(s, path + ".w1", c, inter, 1, 1, 0, 1, false);
  w2_ = std::make_unique<Conv2d<T>>(s, path + ".w2", c, inter, 1, 1, 0, 1, true);
  psi_ = std::make_unique<Conv2d<T>>(s, path + ".psi", inter, 2, 1, 1, 0, 1, true);
}

template <typename T>
DbsaOut<T> Dbsa<T>::forward(const Var<T>& x1, const Var<T>& x2) const {
  require(x1->value.same_shape(x2->value), "dbsa: input shape mismatch " +
                                               shape_str(x1->value.shape) + " vs " +
                                               shape_str(x2->value.shape));
  auto g = relu(add(w1_->forward(x1), w2_->forward(x2)));
  auto e = softmax2(psi_->forward(g));
  auto a1 = slice_ch(e, 0, 1);
  auto a2 = slice_ch(e, 1, 2);
  auto fused = add(mul_bcast_c(a1, x1), mul_bcast_c(a2, x2));
  return {fused, a1, a2};
}

// ---- TbsfBlock ----

template <typename T>
TbsfBlock<T>::TbsfBlock(ParamStore<T>& s, const std::string& path, int c, bool with_oe,
                        const BlockConfig& cfg) {
  for (int i = 0; i < 3; ++i)
    hq_.push_back(std::make_unique<ResidualBlock<T>>(s, path + ".hq.res" + std::to_string(i), c,
                                                     Act::kPrelu));
  lq_down1_ = std::make_unique<DownStage<T>>(s, path + ".lq.down1", c, c, Act::kPrelu);
  lq_down2_ = std::make_unique<DownStage<T>>(s, path + ".lq.down2", c, c, Act::kPrelu);
  for (int i = 0; i < 3; ++i)
    lq_res_.push_back(std::make_unique<ResidualBlock<T>>(s, path + ".lq.res" + std::to_string(i),
                                                         c, Act::kPrelu));
  lq_up1_ = std::make_unique<UpStage<T>>(s, path + ".lq.up1", c, c);
  lq_up2_ = std::make_unique<UpStage<T>>(s, path + ".lq.up2", c, c);
  bg_down1_ = std::make_unique<DownStage<T>>(s, path + ".bg.down1", c, c, Act::kPrelu);
  bg_down2_ = std::make_unique<DownStage<T>>(s, path + ".bg.down2", c, c, Act::kPrelu);
  for (int i = 0; i < 3; ++i)
    bg_res_.push_back(std::make_unique<ResidualBlock<T>>(s, path + ".bg.res" + std::to_string(i),
                                                         c, Act::kPrelu));
  bg_up1_ = std::make_unique<UpStage<T>>(s, path + ".bg.up1", c, c);
  bg_up2_ = std::make_unique<UpStage<T>>(s, path + ".bg.up2", c, c);
  dbsa1_ = std::make_unique<Dbsa<T>>(s, path + ".dbsa1", c);
  dbsa2_ = std::make_unique<Dbsa<T>>(s, path + ".dbsa2", c);
  if (with_oe) oe_ = std::make_unique<OeBlock<T>>(s, path + ".oe", c, cfg);
}

template <typename T>
TbsfOut<T> TbsfBlock<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  auto d = dims4(x->value);
  require(d.h % 4 == 0 && d.w % 4 == 0,
          "tbsf: spatial dims must be divisible by 4, got " + shape_str(x->value.shape));

  auto hq = x;
  for (auto& r : hq_) hq = r->forward(hq, ctx);

  auto lq = lq_down2_->forward(lq_down1_->forward(x, ctx), ctx);
  for (auto& r : lq_res_) lq = r->forward(lq, ctx);
  lq = lq_up2_->forward(lq_up1_->forward(lq, ctx), ctx);

  auto bg = bg_down2_->forward(bg_down1_->forward(x, ctx), ctx);
  for (auto& r : bg_res_) bg = r->forward(bg, ctx);
  bg = bg_up2_->forward(bg_up1_->forward(bg, ctx), ctx);

  auto s1 = dbsa1_->forward(hq, lq);
  auto s2 = dbsa2_->forward(s1.fused, bg);

  TbsfOut<T> out;
  out.fused = s2.fused;
  // Effective contribution of each branch to the final fusion; partitions
  // to 1 because (a_hq + a_lq) * a_fg + a_bg = a_fg + a_bg = 1.
  out.w_high = mul(s1.a1, s2.a1);
  out.w_low = mul(s1.a2, s2.a1);
  out.w_bg = s2.a2;
  if (oe_) out.orientation = oe_->forward(lq, ctx);
  return out;
}

// ---- MgNet ----

template <typename T>
MgNet<T>::MgNet(ParamStore<T>& s, const std::string& path, const BlockConfig& cfg) {
  down1_ = std::make_unique<DownStage<T>>(s, path + ".down1", 1, cfg.encoder_channels[0],
                                          Act::kLeakyRelu, cfg.negative_slope);
  down2_ = std::make_unique<DownStage<T>>(s, path + ".down2", cfg.encoder_channels[0],
                                          cfg.encoder_channels[1], Act::kLeakyRelu,
                                          cfg.negative_slope);
  down3_ = std::make_unique<DownStage<T>>(s, path + ".down3", cfg.encoder_channels[1],
                                          cfg.encoder_channels[2], Act::kLeakyRelu,
                                          cfg.negative_slope);
  for (int i = 0; i < 3; ++i)
    res_.push_back(std::make_unique<ResidualBlock<T>>(s, path + ".res" + std::to_string(i),
                                                      cfg.encoder_channels[2], Act::kLeakyRelu,
                                                      cfg.negative_slope));
  head_ = std::make_unique<Conv2d<T>>(s, path + ".head", cfg.encoder_channels[2], 1, 3, 1, 1, 1,
                                      true);
}

template <typename T>
Var<T> MgNet<T>::forward(const Var<T>& x, const RunCtx<T>& ctx) const {
  auto d = dims4(x->value);
  require(d.c == 1, "mg: expected 1 input channel");
  require(d.h % 8 == 0 && d.w % 8 == 0,
          "mg: spatial dims must be divisible by 8, got " + shape_str(x->value.shape));
  auto y = down3_->forward(down2_->forward(down1_->forward(x, ctx), ctx), ctx);
  for (auto& r : res_) y = r->forward(y, ctx);
  return sigmoid(head_->forward(y));
}

#define MLFG_INSTANTIATE_BLOCKS(T) \
  template class Conv2d<T>;        \
  template class ConvTranspose2d<T>; \
  template class BatchNorm2d<T>;   \
  template class Activation<T>;    \
  template class DownStage<T>;     \
  template class UpStage<T>;       \
  template class ResidualBlock<T>; \
  template class Msfe<T>;          \
  template class Msfs<T>;          \
  template class OeBlock<T>;       \
  template class Dbsa<T>;          \
  template class TbsfBlock<T>;     \
  template class MgNet<T>;

MLFG_INSTANTIATE_BLOCKS(float)
MLFG_INSTANTIATE_BLOCKS(double)

}  // namespace mlfg::nn
