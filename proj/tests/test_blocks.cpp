#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nn/blocks.hpp"
#include "testutil.hpp"

using namespace mlfg;
using namespace mlfg::nn;
using namespace mlfg::ops;
using testutil::check_gradients;

namespace {

template <typename T>
Var<T> input(std::vector<int> shape, uint64_t seed, T lo = T(-1), T hi = T(1)) {
  Pcg32 rng(seed, 5);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return make_leaf(std::move(t), false);
}

// Randomize BN running stats so eval-mode paths are non-trivial.
template <typename T>
void randomize_running_stats(ParamStore<T>& store, uint64_t seed) {
  Pcg32 rng(seed, 9);
  for (auto& p : store.items()) {
    if (p->name.ends_with("running_mean"))
      for (auto& v : p->var->value.data) v = static_cast<T>(rng.uniform(-0.3, 0.3));
    if (p->name.ends_with("running_var"))
      for (auto& v : p->var->value.data) v = static_cast<T>(rng.uniform(0.5, 1.5));
  }
}

template <typename T>
void zero_params_matching(ParamStore<T>& store, const std::string& needle) {
  for (auto& p : store.items())
    if (p->name.find(needle) != std::string::npos) p->var->value.fill(T(0));
}

// FD over every trainable parameter of a block, eval-mode BN.
template <typename BuildLoss>
void check_block_grads(ParamStore<double>& store, BuildLoss loss, uint64_t seed,
                       int per_param = 2) {
  std::vector<Var<double>> leaves;
  for (auto* p : store.trainable()) leaves.push_back(p->var);
  auto res = check_gradients(loss, leaves, per_param, seed);
  CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at, " analytic=", res.worst_analytic,
                " numeric=", res.worst_numeric);
}

// Stack two {1,C,H,W} inputs into one {2,C,H,W} batch.
template <typename T>
Var<T> stack2(const Var<T>& a, const Var<T>& b) {
  auto d = dims4(a->value);
  Tensor<T> t({2, d.c, d.h, d.w});
  std::copy(a->value.data.begin(), a->value.data.end(), t.data.begin());
  std::copy(b->value.data.begin(), b->value.data.end(), t.data.begin() + a->value.numel());
  return make_leaf(std::move(t));
}

}  // namespace

TEST_CASE("down_stage halves spatial dims and validates parity") {
  ParamStore<float> s;
  DownStage<float> d(s, "d", 1, 64, Act::kPrelu);
  s.init_params(1);
  RunCtx<float> ctx{false};
  auto y = d.forward(input<float>({1, 1, 128, 128}, 2), ctx);
  CHECK(y->value.shape == std::vector<int>{1, 64, 64, 64});
  CHECK_THROWS_AS(d.forward(input<float>({1, 1, 129, 129}, 3), ctx), std::invalid_argument);
}

TEST_CASE("encoder chain reaches 256 x H/8 x W/8") {
  ParamStore<float> s;
  DownStage<float> d1(s, "d1", 1, 64, Act::kPrelu);
  DownStage<float> d2(s, "d2", 64, 128, Act::kPrelu);
  DownStage<float> d3(s, "d3", 128, 256, Act::kPrelu);
  s.init_params(4);
  RunCtx<float> ctx{false};
  auto y = d3.forward(d2.forward(d1.forward(input<float>({1, 1, 128, 128}, 5), ctx), ctx), ctx);
  CHECK(y->value.shape == std::vector<int>{1, 256, 16, 16});
}

TEST_CASE("residual block with zeroed convs is PReLU(x)") {
  ParamStore<float> s;
  ResidualBlock<float> r(s, "r", 8, Act::kPrelu);
  s.init_params(6);
  zero_params_matching(s, ".conv");
  RunCtx<float> ctx{false};
  auto x = input<float>({2, 8, 6, 6}, 7);
  auto y = r.forward(x, ctx);
  CHECK(y->value.shape == x->value.shape);
  for (int64_t i = 0; i < x->value.numel(); ++i) {
    const float xi = x->value.data[i];
    const float expect = xi >= 0 ? xi : 0.25f * xi;
    CHECK(y->value.data[i] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("residual block shape and gradient") {
  ParamStore<double> s;
  ResidualBlock<double> r(s, "r", 4, Act::kPrelu);
  s.init_params(8);
  randomize_running_stats(s, 81);
  auto x = input<double>({1, 4, 4, 4}, 9);
  RunCtx<double> ctx{false};
  CHECK(r.forward(x, ctx)->value.shape == x->value.shape);
  check_block_grads(s, [&] { return mean_all(square(r.forward(x, ctx))); }, 10);
}

TEST_CASE("residual gradient of mean(y) wrt x at zero-init F") {
  // Zero F weights, eval BN -> y = PReLU(x); for positive x the gradient of
  // mean(y) is uniformly 1/(C*H*W).
  ParamStore<double> s;
  ResidualBlock<double> r(s, "r", 4, Act::kPrelu);
  s.init_params(11);
  zero_params_matching(s, ".conv");
  auto x = input<double>({1, 4, 4, 4}, 12, 0.1, 1.0);  // strictly positive
  x->requires_grad = true;
  RunCtx<double> ctx{false};
  auto loss = [&] { return mean_all(r.forward(x, ctx)); };
  auto res = check_gradients(loss, {x}, 6, 13);
  CHECK(res.max_rel < 1e-3);
  const double expect = 1.0 / static_cast<double>(x->value.numel());
  for (int64_t i = 0; i < x->value.numel(); ++i)
    CHECK(x->grad.data[i] == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("msfe triples channels and respects dilated receptive fields") {
  BlockConfig cfg;
  ParamStore<float> s;
  Msfe<float> m(s, "m", 256, cfg);
  s.init_params(14);
  RunCtx<float> ctx{false};
  auto y = m.forward(input<float>({1, 256, 16, 16}, 15), ctx);
  CHECK(y->value.shape == std::vector<int>{1, 768, 16, 16});

  // Perturbation probe at small width: a single-pixel change may only move
  // outputs within the path's dilation radius (1, 2 or 3).
  ParamStore<float> s2;
  Msfe<float> m2(s2, "m", 4, cfg);
  s2.init_params(16);
  auto a = input<float>({1, 4, 15, 15}, 17);
  Tensor<float> bt = a->value;
  bt.data[2 * 15 * 15 + 7 * 15 + 7] += 0.5f;  // channel 2, center pixel
  auto b = make_leaf(std::move(bt));
  auto ya = m2.forward(a, ctx)->value;
  auto yb = m2.forward(b, ctx)->value;
  auto max_radius_of_change = [&](int c0, int c1) {
    int r = -1;
    for (int c = c0; c < c1; ++c)
      for (int y0 = 0; y0 < 15; ++y0)
        for (int x0 = 0; x0 < 15; ++x0) {
          const int64_t i = (static_cast<int64_t>(c) * 15 + y0) * 15 + x0;
          if (std::fabs(ya.data[i] - yb.data[i]) > 1e-7f)
            r = std::max(r, std::max(std::abs(y0 - 7), std::abs(x0 - 7)));
        }
    return r;
  };
  CHECK(max_radius_of_change(0, 4) <= 1);   // dilation-1 path
  CHECK(max_radius_of_change(4, 8) <= 2);   // dilation-2 path
  const int r3 = max_radius_of_change(8, 12);
  CHECK(r3 <= 3);  // dilation-3 path: at most a 7x7 patch
  CHECK(r3 >= 2);  // and it does reach beyond the 3x3 neighbourhood
}

TEST_CASE("msfe gradients") {
  BlockConfig cfg;
  ParamStore<double> s;
  Msfe<double> m(s, "m", 3, cfg);
  s.init_params(18);
  randomize_running_stats(s, 19);
  auto x = input<double>({1, 3, 8, 8}, 20);
  RunCtx<double> ctx{false};
  check_block_grads(s, [&] { return mean_all(square(m.forward(x, ctx))); }, 21);
}

TEST_CASE("msfs projects to k channels with and without the BN head") {
  ParamStore<float> s;
  Msfs<float> big(s, "t", 768, 256);
  Msfs<float> ori(s, "o", 768, 2);
  s.init_params(22);
  RunCtx<float> ctx{false};
  auto x = input<float>({1, 768, 16, 16}, 23);
  CHECK(big.forward(x, ctx)->value.shape == std::vector<int>{1, 256, 16, 16});
  CHECK(ori.forward(x, ctx)->value.shape == std::vector<int>{1, 2, 16, 16});
}

TEST_CASE("msfs saturated gate equals the plain projection") {
  ParamStore<float> s;
  Msfs<float> m(s, "m", 12, 2);
  s.init_params(24);
  // Push the gating sigmoid to 1.
  for (auto& p : s.items())
    if (p->name == "m.gate2.bias") p->var->value.fill(60.f);
  ParamStore<float> s2;
  Conv2d<float> proj(s2, "proj", 12, 2, 1, 1, 0, 1, true);
  s2.init_params(0);
  for (auto& p : s2.items()) {
    auto* src = s.find(p->name == "proj.weight" ? "m.proj.weight" : "m.proj.bias");
    REQUIRE(src);
    p->var->value = src->var->value;
  }
  auto x = input<float>({2, 12, 5, 5}, 25);
  RunCtx<float> ctx{false};
  auto a = m.forward(x, ctx)->value;
  auto b = proj.forward(x)->value;
  for (int64_t i = 0; i < a.numel(); ++i)
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-5));
}

TEST_CASE("msfs gradients") {
  ParamStore<double> s;
  Msfs<double> m(s, "m", 6, 2);
  Msfs<double> m2(s, "m2", 6, 4);
  s.init_params(26);
  randomize_running_stats(s, 27);
  auto x = input<double>({1, 6, 4, 4}, 28);
  RunCtx<double> ctx{false};
  check_block_grads(
      s,
      [&] {
        return mean_all(square(add(m.forward(x, ctx), slice_ch(m2.forward(x, ctx), 0, 2))));
      },
      29);
}

TEST_CASE("oe block emits doubled-angle planes inside (-1,1)") {
  BlockConfig cfg;
  ParamStore<float> s;
  OeBlock<float> oe(s, "oe", 16, cfg);
  s.init_params(30);
  RunCtx<float> ctx{false};
  auto y = oe.forward(input<float>({2, 16, 8, 8}, 31, -2.f, 2.f), ctx);
  CHECK(y->value.shape == std::vector<int>{2, 2, 8, 8});
  for (auto v : y->value.data) {
    CHECK(v > -1.f);
    CHECK(v < 1.f);
  }
  const int hw = 8 * 8;
  for (int i = 0; i < hw; ++i) {
    const double t =
        0.5 * std::atan2(static_cast<double>(y->value.data[i]), static_cast<double>(y->value.data[hw + i]));
    CHECK(t <= 1.5707964);
    CHECK(t >= -1.5707964);
  }
}

TEST_CASE("dbsa weights partition to one and fuse") {
  ParamStore<float> s;
  Dbsa<float> d(s, "d", 16);
  s.init_params(32);
  auto x1 = input<float>({2, 16, 8, 8}, 33);
  auto x2 = input<float>({2, 16, 8, 8}, 34);
  auto out = d.forward(x1, x2);
  CHECK(out.fused->value.shape == x1->value.shape);
  CHECK(out.a1->value.shape == std::vector<int>{2, 1, 8, 8});
  for (int64_t i = 0; i < out.a1->value.numel(); ++i)
    CHECK(out.a1->value.data[i] + out.a2->value.data[i] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(d.forward(x1, input<float>({2, 16, 4, 4}, 35)), std::invalid_argument);
}

TEST_CASE("dbsa with zero psi is the plain average") {
  ParamStore<float> s;
  Dbsa<float> d(s, "d", 8);
  s.init_params(36);
  zero_params_matching(s, "d.psi");
  auto x1 = input<float>({1, 8, 4, 4}, 37);
  auto x2 = input<float>({1, 8, 4, 4}, 38);
  auto out = d.forward(x1, x2);
  for (int64_t i = 0; i < out.a1->value.numel(); ++i)
    CHECK(out.a1->value.data[i] == doctest::Approx(0.5).epsilon(1e-7));
  for (int64_t i = 0; i < out.fused->value.numel(); ++i)
    CHECK(out.fused->value.data[i] ==
          doctest::Approx(0.5 * (x1->value.data[i] + x2->value.data[i])).epsilon(1e-6));
}

TEST_CASE("dbsa gradients") {
  ParamStore<double> s;
  Dbsa<double> d(s, "d", 4);
  s.init_params(39);
  auto x1 = input<double>({1, 4, 4, 4}, 40);
  auto x2 = input<double>({1, 4, 4, 4}, 41);
  check_block_grads(s, [&] { return mean_all(square(d.forward(x1, x2).fused)); }, 42);
}

TEST_CASE("tbsf shape, partition and divisibility") {
  BlockConfig cfg;
  ParamStore<float> s;
  TbsfBlock<float> t(s, "t", 256, false, cfg);
  s.init_params(43);
  RunCtx<float> ctx{false};
  auto out = t.forward(input<float>({1, 256, 16, 16}, 44), ctx);
  CHECK(out.fused->value.shape == std::vector<int>{1, 256, 16, 16});
  CHECK(out.w_high->value.shape == std::vector<int>{1, 1, 16, 16});
  CHECK_FALSE(out.orientation);
  for (int64_t i = 0; i < out.w_high->value.numel(); ++i) {
    const double sum =
        out.w_high->value.data[i] + out.w_low->value.data[i] + out.w_bg->value.data[i];
    CHECK(std::fabs(sum - 1.0) < 1e-5);
  }
  CHECK_THROWS_AS(t.forward(input<float>({1, 256, 18, 18}, 45), ctx), std::invalid_argument);
}

TEST_CASE("tbsf_o adds a pure orientation tap") {
  BlockConfig cfg;
  ParamStore<float> so;
  TbsfBlock<float> to(so, "t", 32, true, cfg);
  so.init_params(46);
  RunCtx<float> ctx{false};
  auto x = input<float>({1, 32, 8, 8}, 47);
  auto out = to.forward(x, ctx);
  REQUIRE(out.orientation);
  CHECK(out.orientation->value.shape == std::vector<int>{1, 2, 8, 8});
  for (auto v : out.orientation->value.data) {
    CHECK(v > -1.f);
    CHECK(v < 1.f);
  }

  // Same trunk weights without the OE head: fused path identical bit for bit.
  ParamStore<float> sp;
  TbsfBlock<float> tp(sp, "t", 32, false, cfg);
  sp.init_params(0);
  for (auto& p : sp.items()) {
    auto* src = so.find(p->name);
    REQUIRE(src);
    p->var->value = src->var->value;
  }
  auto out2 = tp.forward(x, ctx);
  for (int64_t i = 0; i < out.fused->value.numel(); ++i)
    CHECK(out.fused->value.data[i] == out2.fused->value.data[i]);
}

TEST_CASE("tbsf gradients flow to every parameter") {
  BlockConfig cfg;
  ParamStore<double> s;
  TbsfBlock<double> t(s, "t", 4, true, cfg);
  s.init_params(48);
  randomize_running_stats(s, 49);
  auto x = input<double>({1, 4, 8, 8}, 50);
  RunCtx<double> ctx{false};
  auto loss_fn = [&] {
    auto out = t.forward(x, ctx);
    return add(mean_all(square(out.fused)),
               add(mean_all(square(out.orientation)), mean_all(out.w_high)));
  };
  auto loss = loss_fn();
  backward(loss);
  int with_grad = 0, total = 0;
  for (auto* p : s.trainable()) {
    ++total;
    if (!p->var->grad.empty()) ++with_grad;
  }
  CHECK(with_grad == total);
  // FD over one sampled element of every parameter tensor.
  std::vector<Var<double>> leaves;
  for (auto* p : s.trainable()) leaves.push_back(p->var);
  auto res = check_gradients(loss_fn, leaves, 1, 51);
  CHECK_MESSAGE(res.max_rel < 1e-3, res.worst_at, " analytic=", res.worst_analytic,
                " numeric=", res.worst_numeric);
}

TEST_CASE("up_stage doubles spatial dims") {
  ParamStore<float> s;
  UpStage<float> u1(s, "u1", 256, 128), u2(s, "u2", 128, 64), u3(s, "u3", 64, 1);
  s.init_params(52);
  RunCtx<float> ctx{false};
  auto y1 = u1.forward(input<float>({1, 256, 16, 16}, 53), ctx);
  CHECK(y1->value.shape == std::vector<int>{1, 128, 32, 32});
  auto y3 = u3.forward(u2.forward(y1, ctx), ctx);
  CHECK(y3->value.shape == std::vector<int>{1, 1, 128, 128});
}

TEST_CASE("up_stage with zeroed final conv is constant") {
  ParamStore<float> s;
  UpStage<float> u(s, "u", 8, 4);
  s.init_params(54);
  zero_params_matching(s, "u.conv");
  RunCtx<float> ctx{false};
  auto y = u.forward(input<float>({1, 8, 4, 4}, 55), ctx);
  for (auto v : y->value.data) CHECK(v == 0.f);
}

TEST_CASE("up_stage gradients") {
  ParamStore<double> s;
  UpStage<double> u(s, "u", 4, 3);
  s.init_params(56);
  randomize_running_stats(s, 57);
  auto x = input<double>({1, 4, 3, 3}, 58);
  RunCtx<double> ctx{false};
  check_block_grads(s, [&] { return mean_all(square(u.forward(x, ctx))); }, 59);
}

TEST_CASE("mg maps 1xHxW to 1x(H/8)x(W/8) in (0,1)") {
  BlockConfig cfg;
  ParamStore<float> s;
  MgNet<float> mg(s, "mg", cfg);
  s.init_params(60);
  RunCtx<float> ctx{false};
  auto y = mg.forward(input<float>({1, 1, 128, 128}, 61, 0.f, 1.f), ctx);
  CHECK(y->value.shape == std::vector<int>{1, 1, 16, 16});
  for (auto v : y->value.data) {
    CHECK(v > 0.f);
    CHECK(v < 1.f);
  }
  CHECK_THROWS_AS(mg.forward(input<float>({1, 1, 100, 100}, 62), ctx), std::invalid_argument);
}

TEST_CASE("mg with zero head emits the 0.5 map") {
  BlockConfig cfg;
  ParamStore<float> s;
  MgNet<float> mg(s, "mg", cfg);
  s.init_params(63);
  zero_params_matching(s, "mg.head");
  RunCtx<float> ctx{false};
  auto y = mg.forward(input<float>({1, 1, 64, 64}, 64, 0.f, 1.f), ctx);
  for (auto v : y->value.data) CHECK(v == doctest::Approx(0.5f));
}

TEST_CASE("mg gradients (LeakyReLU variant)") {
  BlockConfig cfg;
  cfg.encoder_channels[0] = 2;
  cfg.encoder_channels[1] = 3;
  cfg.encoder_channels[2] = 4;
  ParamStore<double> s;
  MgNet<double> mg(s, "mg", cfg);
  s.init_params(65);
  randomize_running_stats(s, 66);
  auto x = input<double>({1, 1, 16, 16}, 67, 0.0, 1.0);
  RunCtx<double> ctx{false};
  check_block_grads(s, [&] { return mean_all(square(mg.forward(x, ctx))); }, 68);
}

TEST_CASE("blocks are batch independent in eval mode") {
  BlockConfig cfg;
  ParamStore<float> s;
  TbsfBlock<float> t(s, "t", 8, true, cfg);
  s.init_params(69);
  RunCtx<float> ctx{false};
  auto a = input<float>({1, 8, 8, 8}, 70);
  auto b = input<float>({1, 8, 8, 8}, 71);
  auto y_ab = t.forward(stack2(a, b), ctx).fused->value;
  auto y_ba = t.forward(stack2(b, a), ctx).fused->value;
  const int64_t half = y_ab.numel() / 2;
  for (int64_t i = 0; i < half; ++i) {
    CHECK(y_ab.data[i] == y_ba.data[half + i]);
    CHECK(y_ab.data[half + i] == y_ba.data[i]);
  }
}

TEST_CASE("shape contracts hold over random divisible sizes") {
  BlockConfig cfg;
  Pcg32 rng(72, 3);
  for (int trial = 0; trial < 8; ++trial) {
    const int h = 4 * (1 + static_cast<int>(rng.below(6)));
    const int w = 4 * (1 + static_cast<int>(rng.below(6)));
    ParamStore<float> s;
    TbsfBlock<float> t(s, "t", 8, false, cfg);
    s.init_params(73 + static_cast<uint64_t>(trial));
    RunCtx<float> ctx{false};
    auto out = t.forward(input<float>({1, 8, h, w}, 74 + static_cast<uint64_t>(trial)), ctx);
    CHECK(out.fused->value.shape == std::vector<int>{1, 8, h, w});
    CHECK(out.w_bg->value.shape == std::vector<int>{1, 1, h, w});
  }
}
