#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/blas.hpp"
#include "core/ops.hpp"
#include "testutil.hpp"

using namespace mlfg;
using namespace mlfg::ops;
using testutil::check_gradients;
using testutil::random_tensor;

namespace {

// Reference direct convolution, independent of the im2col path.
Tensor<double> conv2d_naive(const Tensor<double>& x, const Tensor<double>& w,
                            const Tensor<double>* b, int stride, int pad, int dil) {
  auto [N, Cin, H, W] = dims4(x);
  const int Cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const int Ho = (H + 2 * pad - dil * (kh - 1) - 1) / stride + 1;
  const int Wo = (W + 2 * pad - dil * (kw - 1) - 1) / stride + 1;
  Tensor<double> y({N, Cout, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = b ? b->data[co] : 0.0;
          for (int ci = 0; ci < Cin; ++ci)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                const int iy = oy * stride - pad + ki * dil;
                const int ix = ox * stride - pad + kj * dil;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x.data[((static_cast<int64_t>(n) * Cin + ci) * H + iy) * W + ix] *
                       w.data[((static_cast<int64_t>(co) * Cin + ci) * kh + ki) * kw + kj];
              }
          y.data[((static_cast<int64_t>(n) * Cout + co) * Ho + oy) * Wo + ox] = acc;
        }
  return y;
}

// Reference transposed convolution via output scattering.
Tensor<double> tconv2d_naive(const Tensor<double>& x, const Tensor<double>& w,
                             const Tensor<double>* b, int stride, int pad, int outpad) {
  auto [N, Cin, H, W] = dims4(x);
  const int Cout = w.shape[1], kh = w.shape[2], kw = w.shape[3];
  const int Ho = (H - 1) * stride - 2 * pad + kh + outpad;
  const int Wo = (W - 1) * stride - 2 * pad + kw + outpad;
  Tensor<double> y({N, Cout, Ho, Wo});
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Cout; ++co)
      if (b)
        for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i)
          y.data[(static_cast<int64_t>(n) * Cout + co) * Ho * Wo + i] = b->data[co];
    for (int ci = 0; ci < Cin; ++ci)
      for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix) {
          const double xv = x.data[((static_cast<int64_t>(n) * Cin + ci) * H + iy) * W + ix];
          for (int co = 0; co < Cout; ++co)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                const int oy = iy * stride - pad + ki;
                const int ox = ix * stride - pad + kj;
                if (oy < 0 || oy >= Ho || ox < 0 || ox >= Wo) continue;
                y.data[((static_cast<int64_t>(n) * Cout + co) * Ho + oy) * Wo + ox] +=
                    xv * w.data[((static_cast<int64_t>(ci) * Cout + co) * kh + ki) * kw + kj];
              }
        }
  }
  return y;
}

}  // namespace

TEST_CASE("conv2d forward matches naive reference") {
  Pcg32 rng(11, 1);
  for (auto [stride, pad, dil] : std::vector<std::array<int, 3>>{{1, 1, 1}, {2, 1, 1}, {1, 2, 2}, {1, 3, 3}}) {
    auto x = random_tensor({2, 3, 10, 8}, rng);
    auto w = random_tensor({4, 3, 3, 3}, rng);
    auto b = random_tensor({4}, rng);
    auto y = conv2d(make_leaf(x), make_leaf(w), make_leaf(b), stride, pad, dil);
    auto ref = conv2d_naive(x, w, &b, stride, pad, dil);
    REQUIRE(y->value.shape == ref.shape);
    for (int64_t i = 0; i < ref.numel(); ++i)
      CHECK(y->value.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-9));
  }
}

TEST_CASE("conv_transpose2d forward matches naive reference") {
  Pcg32 rng(12, 1);
  auto x = random_tensor({2, 3, 5, 6}, rng);
  auto w = random_tensor({3, 4, 3, 3}, rng);
  auto b = random_tensor({4}, rng);
  auto y = conv_transpose2d(make_leaf(x), make_leaf(w), make_leaf(b), 2, 1, 1);
  auto ref = tconv2d_naive(x, w, &b, 2, 1, 1);
  REQUIRE(y->value.shape == ref.shape);
  REQUIRE(y->value.shape == std::vector<int>{2, 4, 10, 12});
  for (int64_t i = 0; i < ref.numel(); ++i)
    CHECK(y->value.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-9));
}

TEST_CASE("conv2d gradients match finite differences") {
  Pcg32 rng(13, 1);
  auto x = make_leaf(random_tensor({2, 3, 6, 6}, rng), true);
  auto w = make_leaf(random_tensor({4, 3, 3, 3}, rng), true);
  auto b = make_leaf(random_tensor({4}, rng), true);
  auto loss = [&] { return mean_all(mul(conv2d(x, w, b, 2, 1, 1), conv2d(x, w, b, 2, 1, 1))); };
  auto res = check_gradients(loss, {x, w, b}, 6, 99);
  CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at, " analytic=", res.worst_analytic,
                " numeric=", res.worst_numeric);
}

TEST_CASE("conv_transpose2d gradients match finite differences") {
  Pcg32 rng(14, 1);
  auto x = make_leaf(random_tensor({2, 3, 4, 5}, rng), true);
  auto w = make_leaf(random_tensor({3, 2, 3, 3}, rng), true);
  auto b = make_leaf(random_tensor({2}, rng), true);
  auto loss = [&] {
    auto y = conv_transpose2d(x, w, b, 2, 1, 1);
    return mean_all(square(y));
  };
  auto res = check_gradients(loss, {x, w, b}, 6, 98);
  CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at);
}

TEST_CASE("batch_norm training and eval gradients") {
  Pcg32 rng(15, 1);
  auto x = make_leaf(random_tensor({3, 2, 4, 4}, rng), true);
  auto gamma = make_leaf(random_tensor({2}, rng, 0.5, 1.5), true);
  auto beta = make_leaf(random_tensor({2}, rng), true);

  SUBCASE("training mode") {
    auto rm = make_leaf(Tensor<double>({2}, 0.0));
    auto rv = make_leaf(Tensor<double>({2}, 1.0));
    auto loss = [&] { return mean_all(square(batch_norm(x, gamma, beta, rm, rv, true))); };
    auto res = check_gradients(loss, {x, gamma, beta}, 8, 97);
    CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at);
  }
  SUBCASE("eval mode") {
    auto rm = make_leaf(random_tensor({2}, rng, -0.2, 0.2));
    auto rv = make_leaf(random_tensor({2}, rng, 0.5, 1.5));
    auto loss = [&] { return mean_all(square(batch_norm(x, gamma, beta, rm, rv, false))); };
    auto res = check_gradients(loss, {x, gamma, beta}, 8, 96);
    CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at);
  }
  SUBCASE("training mode updates running stats") {
    auto rm = make_leaf(Tensor<double>({2}, 0.0));
    auto rv = make_leaf(Tensor<double>({2}, 1.0));
    batch_norm(x, gamma, beta, rm, rv, true);
    CHECK(rm->value.data[0] != 0.0);
    batch_norm(x, gamma, beta, rm, rv, false);  // eval must not touch them
    const double saved = rm->value.data[0];
    batch_norm(x, gamma, beta, rm, rv, false);
    CHECK(rm->value.data[0] == saved);
  }
}

TEST_CASE("activation and pointwise gradients") {
  Pcg32 rng(16, 1);
  // Values away from the relu/abs kinks.
  auto mk = [&](double lo, double hi) {
    auto t = random_tensor({2, 3, 4, 4}, rng, lo, hi);
    for (auto& v : t.data)
      if (std::fabs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
    return make_leaf(t, true);
  };
  auto x = mk(-1.0, 1.0);
  auto a = make_leaf(Tensor<double>({1}, 0.25), true);

  auto run = [&](const std::function<Var<double>()>& f, std::vector<Var<double>> leaves,
                 uint64_t seed) {
    auto res = check_gradients(f, leaves, 8, seed);
    CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at, " a=", res.worst_analytic,
                  " n=", res.worst_numeric);
  };
  run([&] { return mean_all(prelu(x, a)); }, {x, a}, 1);
  run([&] { return mean_all(square(leaky_relu(x, 0.2))); }, {x}, 2);
  run([&] { return mean_all(square(relu(x))); }, {x}, 3);
  run([&] { return mean_all(square(sigmoid(x))); }, {x}, 4);
  run([&] { return mean_all(square(tanh_op(x))); }, {x}, 5);
  run([&] { return mean_all(abs_op(x)); }, {x}, 6);
  run([&] { return sum_all(square(affine(x, 2.5, -0.5))); }, {x}, 7);
}

TEST_CASE("softmax2 partitions and differentiates") {
  Pcg32 rng(17, 1);
  auto x = make_leaf(random_tensor({2, 2, 5, 5}, rng, -2, 2), true);
  auto y = softmax2(x);
  auto [N, C, H, W] = dims4(y->value);
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < H * W; ++i) {
      const double s = y->value.data[(n * 2 + 0) * H * W + i] + y->value.data[(n * 2 + 1) * H * W + i];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  auto wsum = random_tensor({2, 2, 5, 5}, rng);
  auto loss = [&] { return mean_all(mul_raster(softmax2(x), wsum)); };
  auto res = check_gradients(loss, {x}, 10, 95);
  CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at);
}

TEST_CASE("structural ops gradients") {
  Pcg32 rng(18, 1);
  auto x1 = make_leaf(random_tensor({2, 3, 4, 4}, rng), true);
  auto x2 = make_leaf(random_tensor({2, 3, 4, 4}, rng), true);
  auto alpha = make_leaf(random_tensor({2, 1, 4, 4}, rng, 0.0, 1.0), true);
  auto s = make_leaf(random_tensor({2, 3, 1, 1}, rng, 0.2, 1.0), true);

  auto run = [&](const std::function<Var<double>()>& f, std::vector<Var<double>> leaves,
                 uint64_t seed) {
    auto res = check_gradients(f, leaves, 8, seed);
    CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at);
  };
  run([&] { return mean_all(square(add(x1, x2))); }, {x1, x2}, 11);
  run([&] { return mean_all(square(sub(x1, x2))); }, {x1, x2}, 12);
  run([&] { return mean_all(mul(x1, x2)); }, {x1, x2}, 13);
  run([&] { return mean_all(square(mul_bcast_c(alpha, x1))); }, {alpha, x1}, 14);
  run([&] { return mean_all(square(channel_scale(s, x1))); }, {s, x1}, 15);
  run([&] { return mean_all(square(concat_ch<double>({x1, x2}))); }, {x1, x2}, 16);
  run([&] { return mean_all(square(slice_ch(x1, 1, 3))); }, {x1}, 17);
  run([&] { return mean_all(square(global_avg_pool(x1))); }, {x1}, 18);
}

TEST_CASE("bce_mean values and gradients") {
  // BCE(0.5, 0.5) = ln 2.
  auto p = make_leaf(Tensor<double>({1, 1, 2, 2}, 0.5), true);
  auto t = Tensor<double>({1, 1, 2, 2}, 0.5);
  CHECK(bce_mean(p, t)->value.data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Pcg32 rng(19, 1);
  auto pred = make_leaf(random_tensor({1, 1, 4, 4}, rng, 0.05, 0.95), true);
  auto tgt = random_tensor({1, 1, 4, 4}, rng, 0.0, 1.0);
  auto loss = [&] { return bce_mean(pred, tgt); };
  auto res = check_gradients(loss, {pred}, 10, 94);
  CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at);

  // Exact 0/1 predictions are clamped, not NaN.
  auto hard = make_leaf(Tensor<double>({1, 1, 1, 2}, 0.0));
  hard->value.data[1] = 1.0;
  auto v = bce_mean(hard, Tensor<double>({1, 1, 1, 2}, 1.0))->value.data[0];
  CHECK(std::isfinite(v));
}

TEST_CASE("wsum_scalars combines weighted scalar terms") {
  auto a = make_leaf(Tensor<double>::scalar(2.0), true);
  auto b = make_leaf(Tensor<double>::scalar(-3.0), true);
  auto y = wsum_scalars<double>({{1.5, a}, {0.5, b}});
  CHECK(y->value.data[0] == doctest::Approx(1.5));
  backward(y);
  CHECK(a->grad.data[0] == doctest::Approx(1.5));
  CHECK(b->grad.data[0] == doctest::Approx(0.5));
}

TEST_CASE("detach cuts the graph") {
  auto x = make_leaf(Tensor<double>::scalar(3.0), true);
  auto y = detach(square(x));
  CHECK_FALSE(y->requires_grad);
  auto z = mean_all(y);
  backward(z);  // no-op: nothing trainable upstream
  CHECK(x->grad.empty());
}

TEST_CASE("no-grad mode skips graph construction") {
  auto x = make_leaf(Tensor<double>::scalar(2.0), true);
  {
    NoGradGuard ng;
    auto y = square(x);
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
  }
  auto y = square(x);
  CHECK(y->requires_grad);
}

TEST_CASE("upsample, pad and crop utilities") {
  Tensor<double> x({1, 1, 2, 2});
  x.data = {1, 2, 3, 4};
  auto up = upsample_nearest(x, 2);
  CHECK(up.shape == std::vector<int>{1, 1, 4, 4});
  CHECK(up.data[0] == 1);
  CHECK(up.data[3] == 2);
  auto bi = upsample_bilinear(x, 2);
  CHECK(bi.shape == std::vector<int>{1, 1, 4, 4});
  // Center sample between all four values.
  CHECK(bi.data[5] == doctest::Approx((1 + 2 + 3 + 4) / 4.0 * 0.0 + 1 * 0.5625 + 2 * 0.1875 + 3 * 0.1875 + 4 * 0.0625));

  Tensor<double> img({3, 3});
  img.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto padded = pad_reflect_hw(img, 1, 1, 1, 1);
  CHECK(padded.shape == std::vector<int>{5, 5});
  CHECK(padded.data[0] == 5);   // reflect-101 corner
  CHECK(padded.data[6] == 1);
  auto back = crop_hw(padded, 1, 1, 3, 3);
  for (int i = 0; i < 9; ++i) CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("gemm backend is loaded") {
  MESSAGE("blas backend: ", std::string(blas::backend()));
  // Multiplying by identity must be exact whichever backend is active.
  std::vector<float> a = {1, 2, 3, 4};
  std::vector<float> eye = {1, 0, 0, 1};
  std::vector<float> c(4, -1);
  blas::gemm(false, false, 2, 2, 2, 1.0f, a.data(), 2, eye.data(), 2, 0.0f, c.data(), 2);
  for (int i = 0; i < 4; ++i) CHECK(c[i] == a[i]);
}
