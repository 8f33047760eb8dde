#include "core/ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "core/blas.hpp"

namespace mlfg::ops {
namespace {

template <typename T>
void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline int conv_out_dim(int in, int k, int stride, int pad, int dil) {
  return (in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
}

// cols is (C*kh*kw) x (Ho*Wo), row-major.
template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad, int dil, int Ho,
            int Wo, T* cols) {
  const int64_t plane = static_cast<int64_t>(Ho) * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* row = cols + (((static_cast<int64_t>(c) * kh + ki) * kw + kj) * plane);
        const int iy0 = ki * dil - pad;
        const int ix0 = kj * dil - pad;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = iy0 + oy * stride;
          T* dst = row + static_cast<int64_t>(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::memset(dst, 0, sizeof(T) * Wo);
            continue;
          }
          const T* src = x + (static_cast<int64_t>(c) * H + iy) * W;
          if (stride == 1 && ix0 >= 0 && ix0 + Wo <= W) {
            std::memcpy(dst, src + ix0, sizeof(T) * Wo);
          } else {
            for (int ox = 0; ox < Wo; ++ox) {
              const int ix = ix0 + ox * stride;
              dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* cols, int C, int H, int W, int kh, int kw, int stride, int pad, int dil,
            int Ho, int Wo, T* x) {
  const int64_t plane = static_cast<int64_t>(Ho) * Wo;
  std::memset(x, 0, sizeof(T) * C * H * W);
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* row = cols + (((static_cast<int64_t>(c) * kh + ki) * kw + kj) * plane);
        const int iy0 = ki * dil - pad;
        const int ix0 = kj * dil - pad;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = iy0 + oy * stride;
          if (iy < 0 || iy >= H) continue;
          const T* srow = row + static_cast<int64_t>(oy) * Wo;
          T* drow = x + (static_cast<int64_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ix0 + ox * stride;
            if (ix >= 0 && ix < W) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T>&)> bw) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  bool any = false;
  for (auto& p : parents)
    if (p && p->requires_grad) any = true;
  if (GradMode::enabled() && any) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(bw);
  }
  return n;
}

// Generic unary elementwise op: forward f(x), backward df(x, y, dy).
template <typename T, typename F, typename DF>
Var<T> unary_ew(const Var<T>& x, F f, DF df) {
  Tensor<T> y(x->value.shape);
  const T* xv = x->value.ptr();
  T* yv = y.ptr();
  const int64_t n = y.numel();
  for (int64_t i = 0; i < n; ++i) yv[i] = f(xv[i]);
  return make_result<T>(std::move(y), {x}, [x, df](Node<T>& out) {
    x->ensure_grad();
    const T* xv = x->value.ptr();
    const T* yv = out.value.ptr();
    const T* dy = out.grad.ptr();
    T* dx = x->grad.ptr();
    const int64_t n = out.value.numel();
    for (int64_t i = 0; i < n; ++i) dx[i] += df(xv[i], yv[i], dy[i]);
  });
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad,
              int dilation) {
  auto [N, Cin, H, W] = dims4(x->value);
  check<T>(w->value.ndim() == 4, "conv2d: weight must be 4-d");
  const int Cout = w->value.shape[0];
  const int kh = w->value.shape[2];
  const int kw = w->value.shape[3];
  check<T>(w->value.shape[1] == Cin, "conv2d: channel mismatch " + shape_str(x->value.shape) +
                                         " vs " + shape_str(w->value.shape));
  if (b) check<T>(b->value.ndim() == 1 && b->value.shape[0] == Cout, "conv2d: bad bias shape");
  const int Ho = conv_out_dim(H, kh, stride, pad, dilation);
  const int Wo = conv_out_dim(W, kw, stride, pad, dilation);
  check<T>(Ho > 0 && Wo > 0, "conv2d: empty output");
  const int64_t K = static_cast<int64_t>(Cin) * kh * kw;
  const int64_t ohw = static_cast<int64_t>(Ho) * Wo;

  Tensor<T> y({N, Cout, Ho, Wo});
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    std::vector<T> cols(K * ohw);
    im2col(x->value.ptr() + static_cast<int64_t>(n) * Cin * H * W, Cin, H, W, kh, kw, stride, pad,
           dilation, Ho, Wo, cols.data());
    T* yn = y.ptr() + static_cast<int64_t>(n) * Cout * ohw;
    blas::gemm(false, false, Cout, static_cast<int>(ohw), static_cast<int>(K), T(1),
               w->value.ptr(), static_cast<int>(K), cols.data(), static_cast<int>(ohw), T(0), yn,
               static_cast<int>(ohw));
    if (b) {
      const T* bv = b->value.ptr();
      for (int c = 0; c < Cout; ++c) {
        T* row = yn + static_cast<int64_t>(c) * ohw;
        for (int64_t i = 0; i < ohw; ++i) row[i] += bv[c];
      }
    }
  }

  auto bw = [x, w, b, stride, pad, dilation, N, Cin, H, W, Cout, kh, kw, Ho, Wo, K,
             ohw](Node<T>& out) {
    const T* dy = out.grad.ptr();
    if (x->requires_grad) {
      x->ensure_grad();
#pragma omp parallel for schedule(static)
      for (int n = 0; n < N; ++n) {
        std::vector<T> dcols(K * ohw);
        std::vector<T> dxn(static_cast<size_t>(Cin) * H * W);
        blas::gemm(true, false, static_cast<int>(K), static_cast<int>(ohw), Cout, T(1),
                   w->value.ptr(), static_cast<int>(K),
                   dy + static_cast<int64_t>(n) * Cout * ohw, static_cast<int>(ohw), T(0),
                   dcols.data(), static_cast<int>(ohw));
        col2im(dcols.data(), Cin, H, W, kh, kw, stride, pad, dilation, Ho, Wo, dxn.data());
        T* dst = x->grad.ptr() + static_cast<int64_t>(n) * Cin * H * W;
        for (size_t i = 0; i < dxn.size(); ++i) dst[i] += dxn[i];
      }
    }
    if (w->requires_grad) {
      w->ensure_grad();
      // Per-sample partials reduced in sample order keeps this deterministic
      // regardless of thread count.
      std::vector<std::vector<T>> partial(N);
#pragma omp parallel for schedule(static)
      for (int n = 0; n < N; ++n) {
        std::vector<T> cols(K * ohw);
        im2col(x->value.ptr() + static_cast<int64_t>(n) * Cin * H * W, Cin, H, W, kh, kw, stride,
               pad, dilation, Ho, Wo, cols.data());
        partial[n].assign(static_cast<size_t>(Cout) * K, T(0));
        blas::gemm(false, true, Cout, static_cast<int>(K), static_cast<int>(ohw), T(1),
                   dy + static_cast<int64_t>(n) * Cout * ohw, static_cast<int>(ohw), cols.data(),
                   static_cast<int>(ohw), T(0), partial[n].data(), static_cast<int>(K));
      }
      T* dw = w->grad.ptr();
      for (int n = 0; n < N; ++n)
        for (size_t i = 0; i < partial[n].size(); ++i) dw[i] += partial[n][i];
    }
    if (b && b->requires_grad) {
      b->ensure_grad();
      T* db = b->grad.ptr();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < Cout; ++c) {
          const T* row = dy + (static_cast<int64_t>(n) * Cout + c) * ohw;
          T acc = 0;
          for (int64_t i = 0; i < ohw; ++i) acc += row[i];
          db[c] += acc;
        }
    }
  };
  std::vector<Var<T>> parents = {x, w};
  if (b) parents.push_back(b);
  return make_result<T>(std::move(y), std::move(parents), bw);
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad,
                        int output_padding) {
  auto [N, Cin, H, W] = dims4(x->value);
  check<T>(w->value.ndim() == 4 && w->value.shape[0] == Cin,
           "conv_transpose2d: bad weight shape " + shape_str(w->value.shape));
  const int Cout = w->value.shape[1];
  const int kh = w->value.shape[2];
  const int kw = w->value.shape[3];
  const int Ho = (H - 1) * stride - 2 * pad + kh + output_padding;
  const int Wo = (W - 1) * stride - 2 * pad + kw + output_padding;
  check<T>(Ho > 0 && Wo > 0, "conv_transpose2d: empty output");
  if (b) check<T>(b->value.ndim() == 1 && b->value.shape[0] == Cout, "conv_transpose2d: bad bias");
  // The op is the adjoint of a conv mapping (Cout,Ho,Wo) -> (Cin,H,W); reuse
  // that conv's im2col geometry ("virtual conv" below).
  const int64_t K2 = static_cast<int64_t>(Cout) * kh * kw;
  const int64_t ihw = static_cast<int64_t>(H) * W;

  Tensor<T> y({N, Cout, Ho, Wo});
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    std::vector<T> cols(K2 * ihw);
    blas::gemm(true, false, static_cast<int>(K2), static_cast<int>(ihw), Cin, T(1), w->value.ptr(),
               static_cast<int>(K2), x->value.ptr() + static_cast<int64_t>(n) * Cin * ihw,
               static_cast<int>(ihw), T(0), cols.data(), static_cast<int>(ihw));
    T* yn = y.ptr() + static_cast<int64_t>(n) * Cout * Ho * Wo;
    col2im(cols.data(), Cout, Ho, Wo, kh, kw, stride, pad, 1, H, W, yn);
    if (b) {
      const T* bv = b->value.ptr();
      const int64_t ohw = static_cast<int64_t>(Ho) * Wo;
      for (int c = 0; c < Cout; ++c) {
        T* row = yn + c * ohw;
        for (int64_t i = 0; i < ohw; ++i) row[i] += bv[c];
      }
    }
  }

  auto bw = [x, w, b, stride, pad, N, Cin, H, W, Cout, kh, kw, Ho, Wo, K2, ihw](Node<T>& out) {
    const T* dy = out.grad.ptr();
    const int64_t ohw = static_cast<int64_t>(Ho) * Wo;
    const bool need_dx = x->requires_grad;
    const bool need_dw = w->requires_grad;
    std::vector<std::vector<T>> partial(need_dw ? N : 0);
    if (need_dx) x->ensure_grad();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
      if (!need_dx && !need_dw) continue;
      std::vector<T> cols(K2 * ihw);
      im2col(dy + static_cast<int64_t>(n) * Cout * ohw, Cout, Ho, Wo, kh, kw, stride, pad, 1, H, W,
             cols.data());
      if (need_dx) {
        std::vector<T> dxn(static_cast<size_t>(Cin) * ihw);
        blas::gemm(false, false, Cin, static_cast<int>(ihw), static_cast<int>(K2), T(1),
                   w->value.ptr(), static_cast<int>(K2), cols.data(), static_cast<int>(ihw), T(0),
                   dxn.data(), static_cast<int>(ihw));
        T* dst = x->grad.ptr() + static_cast<int64_t>(n) * Cin * ihw;
        for (size_t i = 0; i < dxn.size(); ++i) dst[i] += dxn[i];
      }
      if (need_dw) {
        partial[n].assign(static_cast<size_t>(Cin) * K2, T(0));
        blas::gemm(false, true, Cin, static_cast<int>(K2), static_cast<int>(ihw), T(1),
                   x->value.ptr() + static_cast<int64_t>(n) * Cin * ihw, static_cast<int>(ihw),
                   cols.data(), static_cast<int>(ihw), T(0), partial[n].data(),
                   static_cast<int>(K2));
      }
    }
    if (need_dw) {
      w->ensure_grad();
      T* dw = w->grad.ptr();
      for (int n = 0; n < N; ++n)
        for (size_t i = 0; i < partial[n].size(); ++i) dw[i] += partial[n][i];
    }
    if (b && b->requires_grad) {
      b->ensure_grad();
      T* db = b->grad.ptr();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < Cout; ++c) {
          const T* row = dy + (static_cast<int64_t>(n) * Cout + c) * ohw;
          T acc = 0;
          for (int64_t i = 0; i < ohw; ++i) acc += row[i];
          db[c] += acc;
        }
    }
  };
  std::vector<Var<T>> parents = {x, w};
  if (b) parents.push_back(b);
  return make_result<T>(std::move(y), std::move(parents), bw);
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  const Var<T>& run_mean, const Var<T>& run_var, bool training, double momentum,
                  double eps) {
  auto [N, C, H, W] = dims4(x->value);
  check<T>(gamma->value.numel() == C && beta->value.numel() == C, "batch_norm: bad affine shape");
  check<T>(run_mean->value.numel() == C && run_var->value.numel() == C,
           "batch_norm: bad running-stat shape");
  const int64_t m = static_cast<int64_t>(N) * H * W;
  const int64_t chw = static_cast<int64_t>(C) * H * W;
  const int64_t hw = static_cast<int64_t>(H) * W;

  Tensor<T> mean({C}), invstd({C});
  if (training) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0, s2 = 0.0;
      for (int n = 0; n < N; ++n) {
        const T* p = x->value.ptr() + n * chw + c * hw;
        for (int64_t i = 0; i < hw; ++i) {
          s += p[i];
          s2 += static_cast<double>(p[i]) * p[i];
        }
      }
      const double mu = s / static_cast<double>(m);
      double var = s2 / static_cast<double>(m) - mu * mu;
      if (var < 0) var = 0;
      mean.data[c] = static_cast<T>(mu);
      invstd.data[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
      // PyTorch-style: biased variance normalizes, unbiased feeds the
      // running estimate.
      const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
      run_mean->value.data[c] =
          static_cast<T>((1.0 - momentum) * run_mean->value.data[c] + momentum * mu);
      run_var->value.data[c] =
          static_cast<T>((1.0 - momentum) * run_var->value.data[c] + momentum * unbiased);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean.data[c] = run_mean->value.data[c];
      invstd.data[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(run_var->value.data[c]) + eps));
    }
  }

  Tensor<T> y(x->value.shape);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = x->value.ptr() + n * chw + c * hw;
      T* q = y.ptr() + n * chw + c * hw;
      const T mu = mean.data[c], is = invstd.data[c];
      const T g = gamma->value.data[c], bb = beta->value.data[c];
      for (int64_t i = 0; i < hw; ++i) q[i] = (p[i] - mu) * is * g + bb;
    }

  auto bw = [x, gamma, beta, mean, invstd, training, N, C, hw, chw, m](Node<T>& out) {
    const T* dy = out.grad.ptr();
    Tensor<T> dbeta_t({C}, T(0)), dgamma_t({C}, T(0));
    for (int c = 0; c < C; ++c) {
      double db = 0.0, dg = 0.0;
      const T mu = mean.data[c], is = invstd.data[c];
      for (int n = 0; n < N; ++n) {
        const T* xp = x->value.ptr() + n * chw + c * hw;
        const T* dp = dy + n * chw + c * hw;
        for (int64_t i = 0; i < hw; ++i) {
          db += dp[i];
          dg += dp[i] * (xp[i] - mu) * is;
        }
      }
      dbeta_t.data[c] = static_cast<T>(db);
      dgamma_t.data[c] = static_cast<T>(dg);
    }
    if (beta->requires_grad) {
      beta->ensure_grad();
      for (int c = 0; c < C; ++c) beta->grad.data[c] += dbeta_t.data[c];
    }
    if (gamma->requires_grad) {
      gamma->ensure_grad();
      for (int c = 0; c < C; ++c) gamma->grad.data[c] += dgamma_t.data[c];
    }
    if (x->requires_grad) {
      x->ensure_grad();
      for (int c = 0; c < C; ++c) {
        const T mu = mean.data[c], is = invstd.data[c];
        const T g = gamma->value.data[c];
        const T k1 = training ? dbeta_t.data[c] / static_cast<T>(m) : T(0);
        const T k2 = training ? dgamma_t.data[c] / static_cast<T>(m) : T(0);
        for (int n = 0; n < N; ++n) {
          const T* xp = x->value.ptr() + n * chw + c * hw;
          const T* dp = dy + n * chw + c * hw;
          T* dx = x->grad.ptr() + n * chw + c * hw;
          for (int64_t i = 0; i < hw; ++i) {
            const T xhat = (xp[i] - mu) * is;
            dx[i] += g * is * (dp[i] - k1 - xhat * k2);
          }
        }
      }
    }
  };
  return make_result<T>(std::move(y), {x, gamma, beta}, bw);
}

template <typename T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope) {
  check<T>(slope->value.numel() == 1, "prelu: slope must be scalar");
  const T a = slope->value.data[0];
  Tensor<T> y(x->value.shape);
  const T* xv = x->value.ptr();
  T* yv = y.ptr();
  const int64_t n = y.numel();
  for (int64_t i = 0; i < n; ++i) yv[i] = xv[i] >= 0 ? xv[i] : a * xv[i];
  auto bw = [x, slope, a](Node<T>& out) {
    const T* xv = x->value.ptr();
    const T* dy = out.grad.ptr();
    const int64_t n = out.value.numel();
    if (x->requires_grad) {
      x->ensure_grad();
      T* dx = x->grad.ptr();
      for (int64_t i = 0; i < n; ++i) dx[i] += xv[i] >= 0 ? dy[i] : a * dy[i];
    }
    if (slope->requires_grad) {
      slope->ensure_grad();
      double da = 0.0;
      for (int64_t i = 0; i < n; ++i)
        if (xv[i] < 0) da += static_cast<double>(dy[i]) * xv[i];
      slope->grad.data[0] += static_cast<T>(da);
    }
  };
  return make_result<T>(std::move(y), {x, slope}, bw);
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, double slope) {
  const T a = static_cast<T>(slope);
  return unary_ew(
      x, [a](T v) { return v >= 0 ? v : a * v; },
      [a](T xv, T, T dy) { return xv >= 0 ? dy : a * dy; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary_ew(
      x, [](T v) { return v > 0 ? v : T(0); }, [](T xv, T, T dy) { return xv > 0 ? dy : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary_ew(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y, T dy) { return dy * y * (T(1) - y); });
}

template <typename T>
Var<T> tanh_op(const Var<T>& x) {
  return unary_ew(
      x, [](T v) { return std::tanh(v); }, [](T, T y, T dy) { return dy * (T(1) - y * y); });
}

template <typename T>
Var<T> softmax2(const Var<T>& x) {
  auto [N, C, H, W] = dims4(x->value);
  check<T>(C == 2, "softmax2: expected 2 channels, got " + std::to_string(C));
  const int64_t hw = static_cast<int64_t>(H) * W;
  Tensor<T> y(x->value.shape);
  for (int n = 0; n < N; ++n) {
    const T* x0 = x->value.ptr() + (static_cast<int64_t>(n) * 2 + 0) * hw;
    const T* x1 = x->value.ptr() + (static_cast<int64_t>(n) * 2 + 1) * hw;
    T* y0 = y.ptr() + (static_cast<int64_t>(n) * 2 + 0) * hw;
    T* y1 = y.ptr() + (static_cast<int64_t>(n) * 2 + 1) * hw;
    for (int64_t i = 0; i < hw; ++i) {
      const T m = std::max(x0[i], x1[i]);
      const T e0 = std::exp(x0[i] - m), e1 = std::exp(x1[i] - m);
      const T z = e0 + e1;
      y0[i] = e0 / z;
      y1[i] = e1 / z;
    }
  }
  auto bw = [x, N, hw](Node<T>& out) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int n = 0; n < N; ++n) {
      const T* y0 = out.value.ptr() + (static_cast<int64_t>(n) * 2 + 0) * hw;
      const T* y1 = out.value.ptr() + (static_cast<int64_t>(n) * 2 + 1) * hw;
      const T* d0 = out.grad.ptr() + (static_cast<int64_t>(n) * 2 + 0) * hw;
      const T* d1 = out.grad.ptr() + (static_cast<int64_t>(n) * 2 + 1) * hw;
      T* g0 = x->grad.ptr() + (static_cast<int64_t>(n) * 2 + 0) * hw;
      T* g1 = x->grad.ptr() + (static_cast<int64_t>(n) * 2 + 1) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        const T dot = d0[i] * y0[i] + d1[i] * y1[i];
        g0[i] += y0[i] * (d0[i] - dot);
        g1[i] += y1[i] * (d1[i] - dot);
      }
    }
  };
  return make_result<T>(std::move(y), {x}, bw);
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check<T>(a->value.same_shape(b->value), "add: shape mismatch " + shape_str(a->value.shape) +
                                              " vs " + shape_str(b->value.shape));
  Tensor<T> y(a->value.shape);
  const int64_t n = y.numel();
  for (int64_t i = 0; i < n; ++i) y.data[i] = a->value.data[i] + b->value.data[i];
  auto bw = [a, b](Node<T>& out) {
    if (a->requires_grad) a->accumulate(out.grad.ptr());
    if (b->requires_grad) b->accumulate(out.grad.ptr());
  };
  return make_result<T>(std::move(y), {a, b}, bw);
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check<T>(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor<T> y(a->value.shape);
  const int64_t n = y.numel();
  for (int64_t i = 0; i < n; ++i) y.data[i] = a->value.data[i] - b->value.data[i];
  auto bw = [a, b](Node<T>& out) {
    if (a->requires_grad) a->accumulate(out.grad.ptr());
    if (b->requires_grad) {
      b->ensure_grad();
      const int64_t n = out.grad.numel();
      for (int64_t i = 0; i < n; ++i) b->grad.data[i] -= out.grad.data[i];
    }
  };
  return make_result<T>(std::move(y), {a, b}, bw);
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check<T>(a->value.same_shape(b->value), "mul: shape mismatch");
  Tensor<T> y(a->value.shape);
  const int64_t n = y.numel();
  for (int64_t i = 0; i < n; ++i) y.data[i] = a->value.data[i] * b->value.data[i];
  auto bw = [a, b](Node<T>& out) {
    const int64_t n = out.grad.numel();
    if (a->requires_grad) {
      a->ensure_grad();
      for (int64_t i = 0; i < n; ++i) a->grad.data[i] += out.grad.data[i] * b->value.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int64_t i = 0; i < n; ++i) b->grad.data[i] += out.grad.data[i] * a->value.data[i];
    }
  };
  return make_result<T>(std::move(y), {a, b}, bw);
}

template <typename T>
Var<T> affine(const Var<T>& x, T scale, T shift) {
  return unary_ew(
      x, [scale, shift](T v) { return scale * v + shift; },
      [scale](T, T, T dy) { return scale * dy; });
}

template <typename T>
Var<T> mul_bcast_c(const Var<T>& alpha, const Var<T>& x) {
  auto [N, C, H, W] = dims4(x->value);
  auto ad = dims4(alpha->value);
  check<T>(ad.n == N && ad.c == 1 && ad.h == H && ad.w == W, "mul_bcast_c: alpha must be {N,1,H,W}");
  const int64_t hw = static_cast<int64_t>(H) * W;
  Tensor<T> y(x->value.shape);
  for (int n = 0; n < N; ++n) {
    const T* av = alpha->value.ptr() + n * hw;
    for (int c = 0; c < C; ++c) {
      const T* xv = x->value.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
      T* yv = y.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) yv[i] = av[i] * xv[i];
    }
  }
  auto bw = [alpha, x, N, C, hw](Node<T>& out) {
    const T* dy = out.grad.ptr();
    if (alpha->requires_grad) {
      alpha->ensure_grad();
      for (int n = 0; n < N; ++n) {
        T* da = alpha->grad.ptr() + n * hw;
        for (int c = 0; c < C; ++c) {
          const T* xv = x->value.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
          const T* dp = dy + (static_cast<int64_t>(n) * C + c) * hw;
          for (int64_t i = 0; i < hw; ++i) da[i] += dp[i] * xv[i];
        }
      }
    }
    if (x->requires_grad) {
      x->ensure_grad();
      for (int n = 0; n < N; ++n) {
        const T* av = alpha->value.ptr() + n * hw;
        for (int c = 0; c < C; ++c) {
          const T* dp = dy + (static_cast<int64_t>(n) * C + c) * hw;
          T* dx = x->grad.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
          for (int64_t i = 0; i < hw; ++i) dx[i] += dp[i] * av[i];
        }
      }
    }
  };
  return make_result<T>(std::move(y), {alpha, x}, bw);
}

template <typename T>
Var<T> channel_scale(const Var<T>& s, const Var<T>& x) {
  auto [N, C, H, W] = dims4(x->value);
  auto sd = dims4(s->value);
  check<T>(sd.n == N && sd.c == C && sd.h == 1 && sd.w == 1, "channel_scale: s must be {N,C,1,1}");
  const int64_t hw = static_cast<int64_t>(H) * W;
  Tensor<T> y(x->value.shape);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T sv = s->value.data[static_cast<size_t>(n) * C + c];
      const T* xv = x->value.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
      T* yv = y.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) yv[i] = sv * xv[i];
    }
  auto bw = [s, x, N, C, hw](Node<T>& out) {
    const T* dy = out.grad.ptr();
    if (s->requires_grad) {
      s->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const T* xv = x->value.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
          const T* dp = dy + (static_cast<int64_t>(n) * C + c) * hw;
          double acc = 0.0;
          for (int64_t i = 0; i < hw; ++i) acc += static_cast<double>(dp[i]) * xv[i];
          s->grad.data[static_cast<size_t>(n) * C + c] += static_cast<T>(acc);
        }
    }
    if (x->requires_grad) {
      x->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const T sv = s->value.data[static_cast<size_t>(n) * C + c];
          const T* dp = dy + (static_cast<int64_t>(n) * C + c) * hw;
          T* dx = x->grad.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
          for (int64_t i = 0; i < hw; ++i) dx[i] += sv * dp[i];
        }
    }
  };
  return make_result<T>(std::move(y), {s, x}, bw);
}

template <typename T>
Var<T> concat_ch(const std::vector<Var<T>>& xs) {
  check<T>(!xs.empty(), "concat_ch: empty input");
  auto [N, C0, H, W] = dims4(xs[0]->value);
  int Ctot = 0;
  for (auto& v : xs) {
    auto d = dims4(v->value);
    check<T>(d.n == N && d.h == H && d.w == W, "concat_ch: shape mismatch");
    Ctot += d.c;
  }
  const int64_t hw = static_cast<int64_t>(H) * W;
  Tensor<T> y({N, Ctot, H, W});
  for (int n = 0; n < N; ++n) {
    int coff = 0;
    for (auto& v : xs) {
      const int c = v->value.shape[1];
      std::memcpy(y.ptr() + (static_cast<int64_t>(n) * Ctot + coff) * hw,
                  v->value.ptr() + static_cast<int64_t>(n) * c * hw, sizeof(T) * c * hw);
      coff += c;
    }
  }
  std::vector<Var<T>> parents(xs.begin(), xs.end());
  auto bw = [xs, N, Ctot, hw](Node<T>& out) {
    for (int n = 0; n < N; ++n) {
      int coff = 0;
      for (auto& v : xs) {
        const int c = v->value.shape[1];
        if (v->requires_grad) {
          v->ensure_grad();
          const T* src = out.grad.ptr() + (static_cast<int64_t>(n) * Ctot + coff) * hw;
          T* dst = v->grad.ptr() + static_cast<int64_t>(n) * c * hw;
          for (int64_t i = 0; i < static_cast<int64_t>(c) * hw; ++i) dst[i] += src[i];
        }
        coff += c;
      }
    }
  };
  return make_result<T>(std::move(y), std::move(parents), bw);
}

template <typename T>
Var<T> slice_ch(const Var<T>& x, int c0, int c1) {
  auto [N, C, H, W] = dims4(x->value);
  check<T>(0 <= c0 && c0 < c1 && c1 <= C, "slice_ch: bad range");
  const int Cs = c1 - c0;
  const int64_t hw = static_cast<int64_t>(H) * W;
  Tensor<T> y({N, Cs, H, W});
  for (int n = 0; n < N; ++n)
    std::memcpy(y.ptr() + static_cast<int64_t>(n) * Cs * hw,
                x->value.ptr() + (static_cast<int64_t>(n) * C + c0) * hw, sizeof(T) * Cs * hw);
  auto bw = [x, c0, Cs, N, C, hw](Node<T>& out) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int n = 0; n < N; ++n) {
      const T* src = out.grad.ptr() + static_cast<int64_t>(n) * Cs * hw;
      T* dst = x->grad.ptr() + (static_cast<int64_t>(n) * C + c0) * hw;
      for (int64_t i = 0; i < static_cast<int64_t>(Cs) * hw; ++i) dst[i] += src[i];
    }
  };
  return make_result<T>(std::move(y), {x}, bw);
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  auto [N, C, H, W] = dims4(x->value);
  const int64_t hw = static_cast<int64_t>(H) * W;
  Tensor<T> y({N, C, 1, 1});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = x->value.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
      double acc = 0.0;
      for (int64_t i = 0; i < hw; ++i) acc += p[i];
      y.data[static_cast<size_t>(n) * C + c] = static_cast<T>(acc / static_cast<double>(hw));
    }
  auto bw = [x, N, C, hw](Node<T>& out) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const T g = out.grad.data[static_cast<size_t>(n) * C + c] / static_cast<T>(hw);
        T* dx = x->grad.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
        for (int64_t i = 0; i < hw; ++i) dx[i] += g;
      }
  };
  return make_result<T>(std::move(y), {x}, bw);
}

template <typename T>
Var<T> abs_op(const Var<T>& x) {
  return unary_ew(
      x, [](T v) { return v < 0 ? -v : v; },
      [](T xv, T, T dy) { return xv > 0 ? dy : (xv < 0 ? -dy : T(0)); });
}

template <typename T>
Var<T> square(const Var<T>& x) {
  return unary_ew(
      x, [](T v) { return v * v; }, [](T xv, T, T dy) { return T(2) * xv * dy; });
}

template <typename T>
Var<T> mul_raster(const Var<T>& x, Tensor<T> r) {
  const bool same = r.shape == x->value.shape;
  bool bcast = false;
  if (!same) {
    auto [N, C, H, W] = dims4(x->value);
    auto rd = dims4(r);
    check<T>(rd.n == N && rd.c == 1 && rd.h == H && rd.w == W,
             "mul_raster: raster must match or be {N,1,H,W}");
    bcast = true;
    (void)C;
  }
  Tensor<T> y(x->value.shape);
  if (!bcast) {
    const int64_t n = y.numel();
    for (int64_t i = 0; i < n; ++i) y.data[i] = x->value.data[i] * r.data[i];
  } else {
    auto [N, C, H, W] = dims4(x->value);
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const T* rv = r.ptr() + n * hw;
        const T* xv = x->value.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
        T* yv = y.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
        for (int64_t i = 0; i < hw; ++i) yv[i] = rv[i] * xv[i];
      }
  }
  auto bw = [x, r = std::move(r), bcast](Node<T>& out) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    if (!bcast) {
      const int64_t n = out.grad.numel();
      for (int64_t i = 0; i < n; ++i) x->grad.data[i] += out.grad.data[i] * r.data[i];
    } else {
      auto [N, C, H, W] = dims4(x->value);
      const int64_t hw = static_cast<int64_t>(H) * W;
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const T* rv = r.ptr() + n * hw;
          const T* dp = out.grad.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
          T* dx = x->grad.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
          for (int64_t i = 0; i < hw; ++i) dx[i] += dp[i] * rv[i];
        }
    }
  };
  return make_result<T>(std::move(y), {x}, bw);
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  const int64_t n = x->value.numel();
  check<T>(n > 0, "mean_all: empty");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += x->value.data[i];
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  auto bw = [x, n](Node<T>& out) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    const T g = out.grad.data[0] / static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i) x->grad.data[i] += g;
  };
  return make_result<T>(std::move(y), {x}, bw);
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  const int64_t n = x->value.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += x->value.data[i];
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc));
  auto bw = [x, n](Node<T>& out) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    const T g = out.grad.data[0];
    for (int64_t i = 0; i < n; ++i) x->grad.data[i] += g;
  };
  return make_result<T>(std::move(y), {x}, bw);
}

template <typename T>
Var<T> wsum_scalars(const std::vector<std::pair<T, Var<T>>>& terms) {
  check<T>(!terms.empty(), "wsum_scalars: empty");
  double acc = 0.0;
  std::vector<Var<T>> parents;
  for (auto& [k, v] : terms) {
    check<T>(v->value.numel() == 1, "wsum_scalars: non-scalar term");
    acc += static_cast<double>(k) * v->value.data[0];
    parents.push_back(v);
  }
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc));
  auto bw = [terms](Node<T>& out) {
    for (auto& [k, v] : terms)
      if (v->requires_grad) {
        v->ensure_grad();
        v->grad.data[0] += k * out.grad.data[0];
      }
  };
  return make_result<T>(std::move(y), std::move(parents), bw);
}

template <typename T>
Var<T> bce_mean(const Var<T>& pred, Tensor<T> target, T clamp_eps) {
  check<T>(pred->value.shape == target.shape, "bce_mean: shape mismatch");
  const int64_t n = pred->value.numel();
  check<T>(n > 0, "bce_mean: empty");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    T p = pred->value.data[i];
    if (p < clamp_eps) p = clamp_eps;
    if (p > T(1) - clamp_eps) p = T(1) - clamp_eps;
    const T t = target.data[i];
    acc += -(static_cast<double>(t) * std::log(static_cast<double>(p)) +
             (1.0 - static_cast<double>(t)) * std::log(1.0 - static_cast<double>(p)));
  }
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  auto bw = [pred, target = std::move(target), clamp_eps, n](Node<T>& out) {
    if (!pred->requires_grad) return;
    pred->ensure_grad();
    const T g = out.grad.data[0] / static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i) {
      const T p = pred->value.data[i];
      if (p <= clamp_eps || p >= T(1) - clamp_eps) continue;  // clamped: zero slope
      const T t = target.data[i];
      pred->grad.data[i] += g * (p - t) / (p * (T(1) - p));
    }
  };
  return make_result<T>(std::move(y), {pred}, bw);
}

template <typename T>
Var<T> detach(const Var<T>& x) {
  return make_leaf(x->value, false);
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int factor) {
  if (x.ndim() < 2) throw std::invalid_argument("upsample_bilinear: need >=2 dims");
  const int W = x.shape.back();
  const int H = x.shape[x.ndim() - 2];
  int64_t planes = 1;
  for (int i = 0; i + 2 < x.ndim(); ++i) planes *= x.shape[i];
  const int Ho = H * factor, Wo = W * factor;
  std::vector<int> oshape = x.shape;
  oshape[x.ndim() - 2] = Ho;
  oshape[x.ndim() - 1] = Wo;
  Tensor<T> y(oshape);
  // align_corners=false convention.
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = x.ptr() + p * H * W;
    T* dst = y.ptr() + static_cast<int64_t>(p) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      const double sy = (oy + 0.5) / factor - 0.5;
      int y0 = static_cast<int>(std::floor(sy));
      const double fy = sy - y0;
      int y1 = y0 + 1;
      y0 = std::min(std::max(y0, 0), H - 1);
      y1 = std::min(std::max(y1, 0), H - 1);
      for (int ox = 0; ox < Wo; ++ox) {
        const double sx = (ox + 0.5) / factor - 0.5;
        int x0 = static_cast<int>(std::floor(sx));
        const double fx = sx - x0;
        int x1 = x0 + 1;
        x0 = std::min(std::max(x0, 0), W - 1);
        x1 = std::min(std::max(x1, 0), W - 1);
        const double v = (1 - fy) * ((1 - fx) * src[y0 * W + x0] + fx * src[y0 * W + x1]) +
                         fy * ((1 - fx) * src[y1 * W + x0] + fx * src[y1 * W + x1]);
        dst[static_cast<int64_t>(oy) * Wo + ox] = static_cast<T>(v);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor) {
  if (x.ndim() < 2) throw std::invalid_argument("upsample_nearest: need >=2 dims");
  const int W = x.shape.back();
  const int H = x.shape[x.ndim() - 2];
  int64_t planes = 1;
  for (int i = 0; i + 2 < x.ndim(); ++i) planes *= x.shape[i];
  const int Ho = H * factor, Wo = W * factor;
  std::vector<int> oshape = x.shape;
  oshape[x.ndim() - 2] = Ho;
  oshape[x.ndim() - 1] = Wo;
  Tensor<T> y(oshape);
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = x.ptr() + p * H * W;
    T* dst = y.ptr() + static_cast<int64_t>(p) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox)
        dst[static_cast<int64_t>(oy) * Wo + ox] = src[(oy / factor) * W + (ox / factor)];
  }
  return y;
}

template <typename T>
Tensor<T> pad_reflect_hw(const Tensor<T>& x, int top, int bottom, int left, int right) {
  if (x.ndim() < 2) throw std::invalid_argument("pad_reflect_hw: need >=2 dims");
  const int W = x.shape.back();
  const int H = x.shape[x.ndim() - 2];
  if (top >= H || bottom >= H || left >= W || right >= W)
    throw std::invalid_argument("pad_reflect_hw: padding exceeds image size");
  int64_t planes = 1;
  for (int i = 0; i + 2 < x.ndim(); ++i) planes *= x.shape[i];
  const int Ho = H + top + bottom, Wo = W + left + right;
  std::vector<int> oshape = x.shape;
  oshape[x.ndim() - 2] = Ho;
  oshape[x.ndim() - 1] = Wo;
  Tensor<T> y(oshape);
  auto reflect = [](int i, int n) {
    // reflect-101: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
  };
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = x.ptr() + p * H * W;
    T* dst = y.ptr() + static_cast<int64_t>(p) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      const int iy = reflect(oy - top, H);
      for (int ox = 0; ox < Wo; ++ox)
        dst[static_cast<int64_t>(oy) * Wo + ox] = src[iy * W + reflect(ox - left, W)];
    }
  }
  return y;
}

template <typename T>
Tensor<T> crop_hw(const Tensor<T>& x, int top, int left, int h, int w) {
  const int W = x.shape.back();
  const int H = x.shape[x.ndim() - 2];
  if (top < 0 || left < 0 || top + h > H || left + w > W)
    throw std::invalid_argument("crop_hw: window out of bounds");
  int64_t planes = 1;
  for (int i = 0; i + 2 < x.ndim(); ++i) planes *= x.shape[i];
  std::vector<int> oshape = x.shape;
  oshape[x.ndim() - 2] = h;
  oshape[x.ndim() - 1] = w;
  Tensor<T> y(oshape);
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = x.ptr() + p * H * W;
    T* dst = y.ptr() + static_cast<int64_t>(p) * h * w;
    for (int oy = 0; oy < h; ++oy)
      std::memcpy(dst + static_cast<int64_t>(oy) * w, src + (static_cast<int64_t>(top + oy)) * W + left,
                  sizeof(T) * w);
  }
  return y;
}

// Explicit instantiations for float and double.
#define MLFG_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, int, int);         \
  template Var<T> conv_transpose2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, int,     \
                                      int);                                                      \
  template Var<T> batch_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,      \
                                const Var<T>&, bool, double, double);                            \
  template Var<T> prelu<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> leaky_relu<T>(const Var<T>&, double);                                          \
  template Var<T> relu<T>(const Var<T>&);                                                        \
  template Var<T> sigmoid<T>(const Var<T>&);                                                     \
  template Var<T> tanh_op<T>(const Var<T>&);                                                     \
  template Var<T> softmax2<T>(const Var<T>&);                                                    \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                          \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                          \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                          \
  template Var<T> affine<T>(const Var<T>&, T, T);                                                \
  template Var<T> mul_bcast_c<T>(const Var<T>&, const Var<T>&);                                  \
  template Var<T> channel_scale<T>(const Var<T>&, const Var<T>&);                                \
  template Var<T> concat_ch<T>(const std::vector<Var<T>>&);                                      \
  template Var<T> slice_ch<T>(const Var<T>&, int, int);                                          \
  template Var<T> global_avg_pool<T>(const Var<T>&);                                             \
  template Var<T> abs_op<T>(const Var<T>&);                                                      \
  template Var<T> square<T>(const Var<T>&);                                                      \
  template Var<T> mul_raster<T>(const Var<T>&, Tensor<T>);                                       \
  template Var<T> mean_all<T>(const Var<T>&);                                                    \
  template Var<T> sum_all<T>(const Var<T>&);                                                     \
  template Var<T> wsum_scalars<T>(const std::vector<std::pair<T, Var<T>>>&);                     \
  template Var<T> bce_mean<T>(const Var<T>&, Tensor<T>, T);                                      \
  template Var<T> detach<T>(const Var<T>&);                                                      \
  template Tensor<T> upsample_bilinear<T>(const Tensor<T>&, int);                                \
  template Tensor<T> upsample_nearest<T>(const Tensor<T>&, int);                                 \
  template Tensor<T> pad_reflect_hw<T>(const Tensor<T>&, int, int, int, int);                    \
  template Tensor<T> crop_hw<T>(const Tensor<T>&, int, int, int, int);

MLFG_INSTANTIATE_OPS(float)
MLFG_INSTANTIATE_OPS(double)

}  // namespace mlfg::ops
