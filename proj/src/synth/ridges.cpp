#include "synth/ridges.hpp"

#include <algorithm>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace mlfg::synth {

namespace {

constexpr int kBins = 64;       // orientation quantization over [-pi/2, pi/2)
constexpr int kRadius = 6;      // kernel support: (2R+1)^2 taps
constexpr int kPasses = 4;
constexpr double kSigmaAlong = 3.0;
constexpr double kSigmaAcross = 2.0;

struct KernelBank {
  // kBins kernels of (2R+1)^2 taps, zero-mean.
  std::vector<float> taps;
  const float* at(int bin) const { return taps.data() + static_cast<size_t>(bin) * n_taps(); }
  static constexpr int n_taps() { return (2 * kRadius + 1) * (2 * kRadius + 1); }
};

KernelBank build_kernels(double frequency) {
  KernelBank bank;
  bank.taps.resize(static_cast<size_t>(kBins) * KernelBank::n_taps());
  for (int b = 0; b < kBins; ++b) {
    const double theta = -kPi / 2 + b * (kPi / kBins);
    double ct = std::cos(theta), st = std::sin(theta);
    // Snap near-zero direction components so axis-aligned kernels are exact
    // transposes of each other.
    if (std::fabs(ct) < 1e-12) ct = 0.0;
    if (std::fabs(st) < 1e-12) st = 0.0;
    if (std::fabs(std::fabs(ct) - 1.0) < 1e-12) ct = ct > 0 ? 1.0 : -1.0;
    if (std::fabs(std::fabs(st) - 1.0) < 1e-12) st = st > 0 ? 1.0 : -1.0;
    float* k = bank.taps.data() + static_cast<size_t>(b) * KernelBank::n_taps();
    double sum = 0.0;
    int idx = 0;
    for (int v = -kRadius; v <= kRadius; ++v) {
      for (int u = -kRadius; u <= kRadius; ++u, ++idx) {
        const double along = u * ct + v * st;     // along the ridge
        const double across = -u * st + v * ct;   // gradient axis
        const double g = std::exp(-along * along / (2 * kSigmaAlong * kSigmaAlong) -
                                  across * across / (2 * kSigmaAcross * kSigmaAcross));
        const double val = g * std::cos(2.0 * kPi * frequency * across);
        k[idx] = static_cast<float>(val);
        sum += val;
      }
    }
    // Remove the DC component so iteration amplifies the ridge frequency
    // instead of the local mean.
    const float mean = static_cast<float>(sum / KernelBank::n_taps());
    for (int i = 0; i < KernelBank::n_taps(); ++i) k[i] -= mean;
  }
  return bank;
}

inline int reflect(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

}  // namespace

Image render_ridges_from_noise(const OrientationField& field, double frequency,
                               const Image& noise) {
  if (frequency < 1.0 / 12 - 1e-12 || frequency > 1.0 / 6 + 1e-12)
    throw ValidationError("ridge frequency must lie in [1/12, 1/6], got " +
                          std::to_string(frequency));
  const int H = field.gh, W = field.gw;
  if (noise.h != H || noise.w != W)
    throw ValidationError("render_ridges: noise raster does not match the orientation field");

  // Per-pixel orientation bin.
  std::vector<int> bin(static_cast<size_t>(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double t = field.theta(y, x);  // [-pi/2, pi/2)
      int b = static_cast<int>(std::lround((t + kPi / 2) / (kPi / kBins))) % kBins;
      bin[static_cast<size_t>(y) * W + x] = b;
    }

  const KernelBank bank = build_kernels(frequency);
  Image img = noise;
  Image next(H, W);
  for (int pass = 0; pass < kPasses; ++pass) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const float* k = bank.at(bin[static_cast<size_t>(y) * W + x]);
        double acc = 0.0;
        int idx = 0;
        for (int v = -kRadius; v <= kRadius; ++v) {
          const int yy = reflect(y + v, H);
          const float* row = img.v.data() + static_cast<size_t>(yy) * W;
          for (int u = -kRadius; u <= kRadius; ++u, ++idx)
            acc += k[idx] * row[reflect(x + u, W)];
        }
        next.at(y, x) = static_cast<float>(acc);
      }
    }
    // Rescale by the peak magnitude. The kernels are zero-DC so no mean
    // subtraction is needed, and max() is an order statistic, which keeps
    // the whole pipeline exactly covariant under transposition.
    float peak = 0.f;
    for (float v : next.v) peak = std::max(peak, std::fabs(v));
    if (peak > 1e-30f)
      for (float& v : next.v) v /= peak;
    std::swap(img, next);
  }

  // Binarize at the median: strictly-above becomes ridge.
  std::vector<float> sorted = img.v;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const float median = sorted[sorted.size() / 2];
  Image out(H, W);
  for (int64_t i = 0; i < img.size(); ++i) out.v[i] = img.v[i] > median ? 1.f : 0.f;
  return out;
}

Image render_ridges(const OrientationField& field, double frequency, uint64_t seed) {
  Image noise(field.gh, field.gw);
  Pcg32 rng(child_seed(seed, 0xA11CE), 0x9d2c);
  for (auto& v : noise.v) v = static_cast<float>(rng.uniform());
  return render_ridges_from_noise(field, frequency, noise);
}

}  // namespace mlfg::synth
