#include "synth/degrade.hpp"

#include <algorithm>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace mlfg::synth {

void DegradationConfig::validate() const {
  if (dryness_density < 0 || dryness_density > 1)
    throw ValidationError("degradation: dryness_density must lie in [0,1]");
  if (occlusion_count < 0) throw ValidationError("degradation: occlusion_count must be >= 0");
  if (occlusion_radius_lo > occlusion_radius_hi)
    throw ValidationError("degradation: occlusion radius range must be ordered low <= high");
  if (occlusion_count > 0 && occlusion_radius_lo <= 0)
    throw ValidationError("degradation: occlusion radius must be positive");
  if (background_noise_gain < 0 || background_noise_gain > 1)
    throw ValidationError("degradation: background_noise_gain must lie in [0,1]");
  if (!(0 <= contrast_lo && contrast_lo <= contrast_hi && contrast_hi <= 1))
    throw ValidationError("degradation: contrast range must satisfy 0 <= lo <= hi <= 1");
  if (blur_sigma_lo < 0 || blur_sigma_lo > blur_sigma_hi)
    throw ValidationError("degradation: blur sigma range must be ordered low <= high");
}

namespace {

void gaussian_blur(Image& img, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k(static_cast<size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<size_t>(i + r)] = std::exp(-i * i / (2 * sigma * sigma));
    sum += k[static_cast<size_t>(i + r)];
  }
  for (auto& v : k) v /= sum;
  auto reflect = [](int i, int n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
  };
  Image tmp(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<size_t>(i + r)] * img.at(y, reflect(x + i, img.w));
      tmp.at(y, x) = static_cast<float>(acc);
    }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<size_t>(i + r)] * tmp.at(reflect(y + i, img.h), x);
      img.at(y, x) = static_cast<float>(acc);
    }
}

}  // namespace

DegradeResult degrade(const Image& target, const BoolImage& foreground,
                      const DegradationConfig& cfg) {
  cfg.validate();
  if (foreground.h != target.h || foreground.w != target.w)
    throw ValidationError("degrade: foreground mask shape mismatch");
  const int H = target.h, W = target.w;
  DegradeResult res;
  res.degraded = target;
  res.quality.assign(static_cast<size_t>(H) * W, static_cast<uint8_t>(QualityLabel::kBackground));
  Image& img = res.degraded;

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (foreground.at(y, x))
        res.quality[static_cast<size_t>(y) * W + x] = static_cast<uint8_t>(QualityLabel::kHigh);

  // Dryness dotting: every ridge pixel owns one uniform draw, so raising the
  // density only ever removes more pixels (monotone per fixed seed).
  const int gh = (H + 7) / 8, gw = (W + 7) / 8;
  std::vector<int> cell_ridge(static_cast<size_t>(gh) * gw, 0);
  std::vector<int> cell_removed(static_cast<size_t>(gh) * gw, 0);
  {
    Pcg32 rng(child_seed(cfg.rng_seed, 1), 0x0dd1);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double u = rng.uniform();
        if (!foreground.at(y, x) || target.at(y, x) != 1.f) continue;
        const size_t cell = static_cast<size_t>(y / 8) * gw + x / 8;
        ++cell_ridge[cell];
        if (u < cfg.dryness_density) {
          img.at(y, x) = 0.f;
          ++cell_removed[cell];
        }
      }
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx) {
        const size_t cell = static_cast<size_t>(gy) * gw + gx;
        if (cell_ridge[cell] >= 4 &&
            cell_removed[cell] > 0.35 * cell_ridge[cell]) {
          for (int y = gy * 8; y < std::min(H, gy * 8 + 8); ++y)
            for (int x = gx * 8; x < std::min(W, gx * 8 + 8); ++x)
              if (foreground.at(y, x))
                res.quality[static_cast<size_t>(y) * W + x] =
                    static_cast<uint8_t>(QualityLabel::kLow);
        }
      }
  }

  // Occlusion blobs filled with flat background texture.
  {
    Pcg32 rng(child_seed(cfg.rng_seed, 2), 0x0cc1);
    struct Disc {
      double x, y, r;
    };
    std::vector<Disc> discs;
    for (int i = 0; i < cfg.occlusion_count; ++i) {
      const double r = rng.uniform(cfg.occlusion_radius_lo, cfg.occlusion_radius_hi);
      Disc best{0, 0, r};
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const double x = rng.uniform(0, W), y = rng.uniform(0, H);
        const int xi = static_cast<int>(x), yi = static_cast<int>(y);
        if (!foreground.in(yi, xi) || !foreground.at(yi, xi)) continue;
        // Prefer discs fully inside the foreground and clear of others.
        bool inside = true;
        for (auto [ddx, ddy] : {std::pair{r, 0.0}, {-r, 0.0}, {0.0, r}, {0.0, -r}}) {
          const int cx = static_cast<int>(x + ddx), cy = static_cast<int>(y + ddy);
          if (!foreground.in(cy, cx) || !foreground.at(cy, cx)) inside = false;
        }
        if (!inside && attempt < 150) continue;
        bool clear = true;
        for (auto& d : discs)
          if (std::hypot(d.x - x, d.y - y) < d.r + r + 4) clear = false;
        if (!clear && attempt < 150) continue;
        best = {x, y, r};
        placed = true;
      }
      if (!placed) continue;
      discs.push_back(best);
      const double base = rng.uniform(0.40, 0.60);
      const int x0 = std::max(0, static_cast<int>(best.x - best.r - 1));
      const int x1 = std::min(W - 1, static_cast<int>(best.x + best.r + 1));
      const int y0 = std::max(0, static_cast<int>(best.y - best.r - 1));
      const int y1 = std::min(H - 1, static_cast<int>(best.y + best.r + 1));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double d2 = (x - best.x) * (x - best.x) + (y - best.y) * (y - best.y);
          if (d2 > best.r * best.r) continue;
          img.at(y, x) = static_cast<float>(base);
          if (foreground.at(y, x))
            res.quality[static_cast<size_t>(y) * W + x] = static_cast<uint8_t>(QualityLabel::kLow);
        }
    }
  }

  // Oriented clutter outside the foreground.
  if (cfg.background_noise_gain > 0) {
    Pcg32 rng(child_seed(cfg.rng_seed, 3), 0x0bb1);
    const double theta = rng.uniform(0, kPi);
    const double phase = rng.uniform(0, 2 * kPi);
    const double freq = 1.0 / 9.0;
    const double cx = std::cos(theta), sx = std::sin(theta);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (foreground.at(y, x)) continue;
        const double carrier = std::sin(2 * kPi * freq * (x * cx + y * sx) + phase);
        img.at(y, x) = static_cast<float>(cfg.background_noise_gain * (0.5 + 0.5 * carrier));
      }
  }

  // Contrast compression into [lo, hi].
  if (cfg.contrast_lo != 0.0 || cfg.contrast_hi != 1.0) {
    const float lo = static_cast<float>(cfg.contrast_lo);
    const float span = static_cast<float>(cfg.contrast_hi - cfg.contrast_lo);
    for (auto& v : img.v) v = lo + span * v;
  }

  // Blur.
  {
    Pcg32 rng(child_seed(cfg.rng_seed, 4), 0x0aa1);
    const double sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
    if (sigma > 1e-6) gaussian_blur(img, sigma);
  }

  for (auto& v : img.v) v = std::clamp(v, 0.f, 1.f);
  return res;
}

}  // namespace mlfg::synth
