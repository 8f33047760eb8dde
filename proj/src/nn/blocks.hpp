#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/ops.hpp"
#include "nn/module.hpp"

namespace mlfg::nn {

// Activation used inside the composite stages: the enhancement trunk uses
// PReLU (learnable), the MG network LeakyReLU with fixed slope.
enum class Act { kPrelu, kLeakyRelu };

struct BlockConfig {
  int base_channels = 256;
  int encoder_channels[3] = {64, 128, 256};
  double negative_slope = 0.2;
  int dilations[3] = {1, 2, 3};
};

template <typename T>
struct RunCtx {
  bool training = false;
};

template <typename T>
class Conv2d {
 public:
  Conv2d(ParamStore<T>& s, const std::string& path, int cin, int cout, int k, int stride, int pad,
         int dilation, bool bias);
  Var<T> forward(const Var<T>& x) const;

 private:
  Parameter<T>* w_;
  Parameter<T>* b_ = nullptr;
  int stride_, pad_, dilation_;
};

template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d(ParamStore<T>& s, const std::string& path, int cin, int cout, int k, int stride,
                  int pad, int output_padding, bool bias);
  Var<T> forward(const Var<T>& x) const;

 private:
  Parameter<T>* w_;
  Parameter<T>* b_ = nullptr;
  int stride_, pad_, outpad_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(ParamStore<T>& s, const std::string& path, int c);
  Var<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  Parameter<T>*gamma_, *beta_, *run_mean_, *run_var_;
};

// Learnable activation wrapper: PReLU owns one slope parameter; LeakyReLU is
// parameter-free.
template <typename T>
class Activation {
 public:
  Activation(ParamStore<T>& s, const std::string& path, Act kind, double negative_slope);
  Var<T> forward(const Var<T>& x) const;

 private:
  Act kind_;
  double slope_;
  Parameter<T>* prelu_ = nullptr;
};

// 3x3 stride-2 conv -> BN -> activation; halves H and W exactly (they must
// be even).
template <typename T>
class DownStage {
 public:
  DownStage(ParamStore<T>& s, const std::string& path, int cin, int cout, Act act,
            double negative_slope = 0.2);
  Var<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  std::unique_ptr<Conv2d<T>> conv_;
  std::unique_ptr<BatchNorm2d<T>> bn_;
  std::unique_ptr<Activation<T>> act_;
};

// 3x3 stride-2 transposed conv -> BN -> activation -> 3x3 conv; doubles H,W.
template <typename T>
class UpStage {
 public:
  UpStage(ParamStore<T>& s, const std::string& path, int cin, int cout);
  Var<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  std::unique_ptr<ConvTranspose2d<T>> tconv_;
  std::unique_ptr<BatchNorm2d<T>> bn_;
  std::unique_ptr<Activation<T>> act_;
  std::unique_ptr<Conv2d<T>> conv_;
};

// y = act(x + BN(conv(act(BN(conv(x)))))), shape-preserving.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock(ParamStore<T>& s, const std::string& path, int c, Act act,
                double negative_slope = 0.2);
  Var<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  std::unique_ptr<Conv2d<T>> conv1_, conv2_;
  std::unique_ptr<BatchNorm2d<T>> bn1_, bn2_;
  std::unique_ptr<Activation<T>> act1_, act_out_;
};

// Three parallel dilated 3x3 convs (dilations 1/2/3), each C->C with
// BN+PReLU, concatenated to 3C channels.
template <typename T>
class Msfe {
 public:
  Msfe(ParamStore<T>& s, const std::string& path, int c, const BlockConfig& cfg);
  Var<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  struct Path {
    std::unique_ptr<Conv2d<T>> conv;
    std::unique_ptr<BatchNorm2d<T>> bn;
    std::unique_ptr<Activation<T>> act;
  };
  std::vector<Path> paths_;
};

// Squeeze-style channel gating (reduction 4) followed by a 1x1 projection to
// k channels. BN+PReLU are omitted for the 2-channel orientation head.
template <typename T>
class Msfs {
 public:
  Msfs(ParamStore<T>& s, const std::string& path, int cin, int k);
  Var<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  std::unique_ptr<Conv2d<T>> gate1_, gate2_, proj_;
  std::unique_ptr<BatchNorm2d<T>> bn_;
  std::unique_ptr<Activation<T>> act_;
  bool plain_head_;
};

// Orientation estimation: MSFE -> MSFS(k=2) -> Tanh. Output planes are
// (sin 2theta, cos 2theta).
template <typename T>
class OeBlock {
 public:
  OeBlock(ParamStore<T>& s, const std::string& path, int c, const BlockConfig& cfg);
  Var<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  std::unique_ptr<Msfe<T>> msfe_;
  std::unique_ptr<Msfs<T>> msfs_;
};

template <typename T>
struct DbsaOut {
  Var<T> fused;
  Var<T> a1;  // {N,1,H,W}
  Var<T> a2;
};

// Two-input attention-gate fusion; per-pixel softmax weights partition to 1.
template <typename T>
class Dbsa {
 public:
  Dbsa(ParamStore<T>& s, const std::string& path, int c);
  DbsaOut<T> forward(const Var<T>& x1, const Var<T>& x2) const;

 private:
  std::unique_ptr<Conv2d<T>> w1_, w2_, psi_;
};

template <typename T>
struct TbsfOut {
  Var<T> fused;
  Var<T> w_high, w_low, w_bg;  // effective per-branch weights, {N,1,h,w}
  Var<T> orientation;          // {N,2,h,w} when the OE head is attached, else null
};

// Triple-branch spatial fusion. High-quality branch: 3 residual blocks at
// full resolution. Low-quality and background branches: 2 down stages, 3
// residual blocks, 2 up stages (separate weights). Two DBSA stages fuse
// HQ+LQ first, then +BG. With `with_oe`, an OE head taps the LQ branch
// output after upsampling.
template <typename T>
class TbsfBlock {
 public:
  TbsfBlock(ParamStore<T>& s, const std::string& path, int c, bool with_oe,
            const BlockConfig& cfg);
  TbsfOut<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  std::vector<std::unique_ptr<ResidualBlock<T>>> hq_;
  std::unique_ptr<DownStage<T>> lq_down1_, lq_down2_, bg_down1_, bg_down2_;
  std::vector<std::unique_ptr<ResidualBlock<T>>> lq_res_, bg_res_;
  std::unique_ptr<UpStage<T>> lq_up1_, lq_up2_, bg_up1_, bg_up2_;
  std::unique_ptr<Dbsa<T>> dbsa1_, dbsa2_;
  std::unique_ptr<OeBlock<T>> oe_;
};

// Minutiae-region network: 1xHxW -> 1x(H/8)x(W/8) in (0,1).
template <typename T>
class MgNet {
 public:
  MgNet(ParamStore<T>& s, const std::string& path, const BlockConfig& cfg);
  Var<T> forward(const Var<T>& x, const RunCtx<T>& ctx) const;

 private:
  std::unique_ptr<DownStage<T>> down1_, down2_, down3_;
  std::vector<std::unique_ptr<ResidualBlock<T>>> res_;
  std::unique_ptr<Conv2d<T>> head_;
};

}  // namespace mlfg::nn
