#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace mlfg::synth {

// Single-channel raster, values in [0,1] unless stated otherwise.
struct Image {
  int h = 0, w = 0;
  std::vector<float> v;

  Image() = default;
  Image(int h_, int w_, float fill = 0.f) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

  float& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  float at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  int64_t size() const { return static_cast<int64_t>(h) * w; }
};

struct BoolImage {
  int h = 0, w = 0;
  std::vector<uint8_t> v;

  BoolImage() = default;
  BoolImage(int h_, int w_, uint8_t fill = 0) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

  uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  bool in(int y, int x) const { return y >= 0 && y < h && x >= 0 && x < w; }
};

// Zero-pole singularity layout: cores contribute +1/2 to the orientation
// winding, deltas -1/2.
struct SingularitySpec {
  std::vector<std::pair<double, double>> cores;   // (x, y) pixel coordinates
  std::vector<std::pair<double, double>> deltas;  // (x, y)
  double global_offset = 0.0;                     // radians
};

// Doubled-angle orientation raster with validity mask. For the training
// grid gh = H/8, gw = W/8 sampled at 8-px cell centers; the full-resolution
// variant has one cell per pixel.
struct OrientationField {
  int gh = 0, gw = 0;
  std::vector<float> s, c;      // sin 2theta, cos 2theta
  std::vector<uint8_t> mask;    // 1 on fingerprint foreground

  OrientationField() = default;
  OrientationField(int gh_, int gw_)
      : gh(gh_), gw(gw_), s(static_cast<size_t>(gh_) * gw_), c(static_cast<size_t>(gh_) * gw_),
        mask(static_cast<size_t>(gh_) * gw_, 1) {}

  int64_t cells() const { return static_cast<int64_t>(gh) * gw; }

  // theta in [-pi/2, pi/2): atan2 halving with the +pi/2 edge folded down.
  double theta(int gy, int gx) const {
    const size_t i = static_cast<size_t>(gy) * gw + gx;
    double t = 0.5 * std::atan2(static_cast<double>(s[i]), static_cast<double>(c[i]));
    if (t >= 1.5707963267948966) t -= 3.141592653589793;
    return t;
  }
};

enum class MinutiaKind : uint8_t { kEnding = 0, kBifurcation = 1 };

struct MinutiaPoint {
  float x = 0, y = 0;
  float angle = 0;  // radians in [0, 2pi)
  MinutiaKind kind = MinutiaKind::kEnding;
};

struct DegradationConfig {
  double dryness_density = 0.0;       // fraction of ridge pixels dotted away
  int occlusion_count = 0;
  double occlusion_radius_lo = 8.0;   // pixels
  double occlusion_radius_hi = 16.0;
  double background_noise_gain = 0.0;  // [0,1]
  double contrast_lo = 0.0;            // output range after compression
  double contrast_hi = 1.0;
  double blur_sigma_lo = 0.0;          // pixels
  double blur_sigma_hi = 0.0;
  uint64_t rng_seed = 0;

  void validate() const;
};

enum class QualityLabel : uint8_t { kBackground = 0, kHigh = 1, kLow = 2 };

struct TrainingSample {
  Image degraded;
  Image target;                  // binary: ridge 1, valley/background 0
  OrientationField orientation;  // 1/8 grid, mask = foreground cells
  Image minutiae_map;            // full resolution, [0,1]
  std::vector<MinutiaPoint> minutiae;
  BoolImage foreground;
  std::vector<uint8_t> quality;  // QualityLabel per pixel
  uint64_t seed = 0;
  SingularitySpec spec;
  double frequency = 1.0 / 9.0;
};

constexpr double kPi = 3.14159265358979323846;

}  // namespace mlfg::synth
