#include "synth/skeleton.hpp"

#include "core/errors.hpp"

namespace mlfg::synth {

namespace {

// 8-neighbour ring clockwise from north: p2..p9 in Zhang-Suen's notation.
constexpr int kRing[8][2] = {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}};

inline int ring_at(const BoolImage& img, int y, int x, int k) {
  const int yy = y + kRing[k][0], xx = x + kRing[k][1];
  return img.in(yy, xx) ? img.at(yy, xx) : 0;
}

}  // namespace

BoolImage skeletonize(const Image& binary) {
  for (float v : binary.v)
    if (v != 0.f && v != 1.f)
      throw ValidationError("skeletonize: input must be strictly binary (0/1)");

  BoolImage img(binary.h, binary.w);
  for (int64_t i = 0; i < binary.size(); ++i) img.v[i] = binary.v[i] != 0.f;

  std::vector<size_t> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int phase = 0; phase < 2; ++phase) {
      doomed.clear();
      for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
          if (!img.at(y, x)) continue;
          int n[8];
          int b = 0;
          for (int k = 0; k < 8; ++k) {
            n[k] = ring_at(img, y, x, k);
            b += n[k];
          }
          if (b < 2 || b > 6) continue;
          int a = 0;  // 0->1 transitions around the ring
          for (int k = 0; k < 8; ++k)
            if (n[k] == 0 && n[(k + 1) % 8] == 1) ++a;
          if (a != 1) continue;
          // n[0]=N, n[2]=E, n[4]=S, n[6]=W
          if (phase == 0) {
            if (n[0] * n[2] * n[4] != 0) continue;
            if (n[2] * n[4] * n[6] != 0) continue;
          } else {
            if (n[0] * n[2] * n[6] != 0) continue;
            if (n[0] * n[4] * n[6] != 0) continue;
          }
          doomed.push_back(static_cast<size_t>(y) * img.w + x);
        }
      }
      if (!doomed.empty()) changed = true;
      for (size_t i : doomed) img.v[i] = 0;
    }
  }
  return img;
}

int crossing_number(const BoolImage& skel, int y, int x) {
  int cn = 0;
  for (int k = 0; k < 8; ++k)
    cn += std::abs(ring_at(skel, y, x, k) - ring_at(skel, y, x, (k + 1) % 8));
  return cn / 2;
}

std::vector<MinutiaPoint> extract_minutiae(const BoolImage& skel, const OrientationField& field,
                                           int border_px) {
  std::vector<MinutiaPoint> out;
  const int H = skel.h, W = skel.w;
  const int cell_h = field.gh > 0 ? std::max(1, H / field.gh) : 8;
  const int cell_w = field.gw > 0 ? std::max(1, W / field.gw) : 8;

  auto foreground_px = [&](int y, int x) {
    const int gy = std::min(y / cell_h, field.gh - 1);
    const int gx = std::min(x / cell_w, field.gw - 1);
    return field.mask[static_cast<size_t>(gy) * field.gw + gx] != 0;
  };

  auto near_border = [&](int y, int x) {
    if (y < border_px || x < border_px || y >= H - border_px || x >= W - border_px) return true;
    for (int dy = -border_px; dy <= border_px; ++dy)
      for (int dx = -border_px; dx <= border_px; ++dx)
        if (!foreground_px(y + dy, x + dx)) return true;
    return false;
  };

  auto pick_angle = [&](double theta, double depart) {
    // Choose theta or theta+pi, whichever is closer to the departure
    // direction, and wrap into [0, 2pi).
    double best = theta;
    if (std::cos(theta - depart) < 0) best = theta + kPi;
    best = std::fmod(best, 2 * kPi);
    if (best < 0) best += 2 * kPi;
    return best;
  };

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!skel.at(y, x)) continue;
      const int cn = crossing_number(skel, y, x);
      if (cn != 1 && cn != 3) continue;
      if (near_border(y, x)) continue;

      const int gy = std::min(y / cell_h, field.gh - 1);
      const int gx = std::min(x / cell_w, field.gw - 1);
      const double theta = field.theta(gy, gx);

      double dx = 0, dy = 0;
      int nbr = 0;
      for (int k = 0; k < 8; ++k)
        if (ring_at(skel, y, x, k)) {
          dx += kRing[k][1];
          dy += kRing[k][0];
          ++nbr;
        }
      MinutiaPoint m;
      m.x = static_cast<float>(x);
      m.y = static_cast<float>(y);
      if (cn == 1) {
        m.kind = MinutiaKind::kEnding;
        // Ridge departs from the tip towards its single neighbour.
        m.angle = static_cast<float>(pick_angle(theta, std::atan2(dy, dx)));
      } else {
        m.kind = MinutiaKind::kBifurcation;
        // The single-ridge side points away from the branch average.
        const double depart = (dx == 0 && dy == 0) ? theta : std::atan2(-dy, -dx);
        m.angle = static_cast<float>(pick_angle(theta, depart));
      }
      (void)nbr;
      out.push_back(m);
    }
  }
  return out;
}

namespace {

Image rasterize_at(const std::vector<MinutiaPoint>& minutiae, int h, int w, double step,
                   double origin, double r_m) {
  if (r_m <= 0) throw ValidationError("rasterize_minutiae: r_m must be positive");
  Image out(h, w, 0.f);
  const double sigma = r_m / 2.0;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double px = origin + x * step, py = origin + y * step;
      double best = 0.0;
      for (const auto& m : minutiae) {
        const double d2 = (px - m.x) * (px - m.x) + (py - m.y) * (py - m.y);
        best = std::max(best, std::exp(-d2 * inv));
      }
      out.at(y, x) = static_cast<float>(std::min(1.0, best));
    }
  return out;
}

}  // namespace

Image rasterize_minutiae(const std::vector<MinutiaPoint>& minutiae, int height, int width,
                         double r_m) {
  return rasterize_at(minutiae, height, width, 1.0, 0.0, r_m);
}

Image rasterize_minutiae_grid(const std::vector<MinutiaPoint>& minutiae, int gh, int gw,
                              double r_m) {
  return rasterize_at(minutiae, gh, gw, 8.0, 3.5, r_m);
}

}  // namespace mlfg::synth
