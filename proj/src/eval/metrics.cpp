#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"

namespace mlfg::eval {

using synth::Image;
using synth::OrientationField;

std::optional<double> ori_rmse_deg(const OrientationField& pred, const OrientationField& gt) {
  if (pred.gh != gt.gh || pred.gw != gt.gw)
    throw ValidationError("ori_rmse: grid shape mismatch");
  double acc = 0.0;
  int64_t n = 0;
  for (int64_t i = 0; i < gt.cells(); ++i) {
    if (!gt.mask[static_cast<size_t>(i)]) continue;
    const double sp = pred.s[static_cast<size_t>(i)], cp = pred.c[static_cast<size_t>(i)];
    const double sg = gt.s[static_cast<size_t>(i)], cg = gt.c[static_cast<size_t>(i)];
    // Doubled-angle difference via the angle-sum identities.
    const double sd = sp * cg - cp * sg;
    const double cd = cp * cg + sp * sg;
    const double d = 0.5 * std::atan2(sd, cd);  // (-pi/2, pi/2]
    acc += d * d;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(acc / static_cast<double>(n)) * 180.0 / synth::kPi;
}

std::optional<double> roc_auc(const std::vector<float>& pred, const std::vector<float>& gt,
                              float threshold) {
  if (pred.size() != gt.size()) throw ValidationError("roc_auc: size mismatch");
  const size_t n = pred.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return pred[a] < pred[b]; });
  int64_t npos = 0;
  for (float g : gt) npos += g > threshold ? 1 : 0;
  const int64_t nneg = static_cast<int64_t>(n) - npos;
  if (npos == 0 || nneg == 0) return std::nullopt;

  // Mann-Whitney with midranks for ties.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && pred[order[j + 1]] == pred[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (gt[order[k]] > threshold) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(npos) * (npos + 1) / 2.0;
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

double l1_error(const Image& a, const Image& b) {
  if (a.h != b.h || a.w != b.w) throw ValidationError("l1_error: shape mismatch");
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i)
    acc += std::fabs(static_cast<double>(a.v[static_cast<size_t>(i)]) - b.v[static_cast<size_t>(i)]);
  return acc / static_cast<double>(a.size());
}

double psnr_db(const Image& a, const Image& b) {
  if (a.h != b.h || a.w != b.w) throw ValidationError("psnr: shape mismatch");
  double mse = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.v[static_cast<size_t>(i)]) - b.v[static_cast<size_t>(i)];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 1e-20) return 200.0;
  return 10.0 * std::log10(1.0 / mse);
}

OrientationField orientation_from_image(const Image& img) {
  const int H = img.h, W = img.w;
  const int gh = H / 8, gw = W / 8;
  OrientationField f(gh, gw);

  // Central-difference gradients.
  std::vector<float> gx(static_cast<size_t>(H) * W, 0.f), gy(static_cast<size_t>(H) * W, 0.f);
  for (int y = 1; y + 1 < H; ++y)
    for (int x = 1; x + 1 < W; ++x) {
      gx[static_cast<size_t>(y) * W + x] = 0.5f * (img.at(y, x + 1) - img.at(y, x - 1));
      gy[static_cast<size_t>(y) * W + x] = 0.5f * (img.at(y + 1, x) - img.at(y - 1, x));
    }

  for (int cy = 0; cy < gh; ++cy)
    for (int cx = 0; cx < gw; ++cx) {
      // 16x16 window centered on the 8x8 cell.
      double jxx = 0, jyy = 0, jxy = 0;
      const int y0 = std::max(0, cy * 8 - 4), y1 = std::min(H, cy * 8 + 12);
      const int x0 = std::max(0, cx * 8 - 4), x1 = std::min(W, cx * 8 + 12);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const double dx = gx[static_cast<size_t>(y) * W + x];
          const double dy = gy[static_cast<size_t>(y) * W + x];
          jxx += dx * dx;
          jyy += dy * dy;
          jxy += dx * dy;
        }
      const double a = jxx - jyy, b = 2.0 * jxy;
      const double mag = std::hypot(a, b);
      const size_t i = static_cast<size_t>(cy) * gw + cx;
      if (mag < 1e-9 || jxx + jyy < 1e-9) {
        f.s[i] = 0.f;
        f.c[i] = 1.f;
        f.mask[i] = 0;
        continue;
      }
      // Ridge orientation is perpendicular to the dominant gradient:
      // 2*theta = atan2(b, a) + pi.
      f.s[i] = static_cast<float>(-b / mag);
      f.c[i] = static_cast<float>(-a / mag);
      f.mask[i] = 1;
    }
  return f;
}

}  // namespace mlfg::eval
