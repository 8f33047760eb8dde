#pragma once

#include <utility>
#include <vector>

#include "core/graph.hpp"
#include "core/tensor.hpp"

namespace mlfg::ops {

// All differentiable ops. Feature tensors are {N,C,H,W}; scalar results are
// shape {1}. Ops validate shapes and throw std::invalid_argument on misuse.

template <typename T>
struct Conv2dSpec {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

// w: {Cout,Cin,kh,kw}; b: {Cout} or null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad,
              int dilation = 1);

// w: {Cin,Cout,kh,kw}; output H' = (H-1)*stride - 2*pad + kh + output_padding.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad,
                        int output_padding);

// gamma/beta: {C}; run_mean/run_var: non-trainable leaves mutated in training mode.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  const Var<T>& run_mean, const Var<T>& run_var, bool training,
                  double momentum = 0.1, double eps = 1e-5);

template <typename T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope);  // slope: {1}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, double slope);

template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> sigmoid(const Var<T>& x);

template <typename T>
Var<T> tanh_op(const Var<T>& x);

// Per-pixel softmax across channels; requires C == 2.
template <typename T>
Var<T> softmax2(const Var<T>& x);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

// scale * x + shift, elementwise.
template <typename T>
Var<T> affine(const Var<T>& x, T scale, T shift);

// alpha {N,1,H,W} * x {N,C,H,W}, broadcasting over channels.
template <typename T>
Var<T> mul_bcast_c(const Var<T>& alpha, const Var<T>& x);

// s {N,C,1,1} * x {N,C,H,W}, broadcasting over spatial dims.
template <typename T>
Var<T> channel_scale(const Var<T>& s, const Var<T>& x);

template <typename T>
Var<T> concat_ch(const std::vector<Var<T>>& xs);

template <typename T>
Var<T> slice_ch(const Var<T>& x, int c0, int c1);

template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

template <typename T>
Var<T> abs_op(const Var<T>& x);

template <typename T>
Var<T> square(const Var<T>& x);

// x * r with r a constant raster; r.shape == x.shape, or r {N,1,H,W} vs x {N,C,H,W}.
template <typename T>
Var<T> mul_raster(const Var<T>& x, Tensor<T> r);

template <typename T>
Var<T> mean_all(const Var<T>& x);

template <typename T>
Var<T> sum_all(const Var<T>& x);

// Weighted sum of scalar vars: sum_i coeff_i * s_i.
template <typename T>
Var<T> wsum_scalars(const std::vector<std::pair<T, Var<T>>>& terms);

// Mean binary cross-entropy against a constant soft-label target.
// Predictions are clamped to [clamp_eps, 1-clamp_eps] before the logs.
template <typename T>
Var<T> bce_mean(const Var<T>& pred, Tensor<T> target, T clamp_eps = T(1e-7));

// Cut the graph: value copy as a non-grad leaf.
template <typename T>
Var<T> detach(const Var<T>& x);

// ---- forward-only raster utilities (no autodiff) ----

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int factor);  // {...,H,W} -> {...,H*f,W*f}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor);

template <typename T>
Tensor<T> pad_reflect_hw(const Tensor<T>& x, int top, int bottom, int left, int right);

template <typename T>
Tensor<T> crop_hw(const Tensor<T>& x, int top, int left, int h, int w);

}  // namespace mlfg::ops
