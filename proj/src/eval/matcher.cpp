#include "eval/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "core/errors.hpp"

namespace mlfg::eval {

using synth::MinutiaPoint;

namespace {

inline double wrap_pi(double a) {
  while (a > synth::kPi) a -= 2 * synth::kPi;
  while (a < -synth::kPi) a += 2 * synth::kPi;
  return a;
}

struct Aligned {
  double x, y, angle;
};

}  // namespace

double match_score(const std::vector<MinutiaPoint>& probe,
                   const std::vector<MinutiaPoint>& gallery, const MatchParams& prm) {
  if (probe.empty() || gallery.empty()) return 0.0;
  const double ang_gate = prm.pair_angle_deg * synth::kPi / 180.0;

  double best_votes = -1;
  double best_rot = 0, best_tx = 0, best_ty = 0;

  const int n_rot =
      static_cast<int>(std::lround((prm.rot_hi_deg - prm.rot_lo_deg) / prm.rot_step_deg)) + 1;
  for (int ri = 0; ri < n_rot; ++ri) {
    const double rot = (prm.rot_lo_deg + ri * prm.rot_step_deg) * synth::kPi / 180.0;
    const double cr = std::cos(rot), sr = std::sin(rot);
    // Translation voting over angle-compatible pairs, 8-px bins. The map is
    // ordered, so ties resolve to the smallest bin deterministically.
    std::map<std::pair<int, int>, std::pair<int, std::pair<double, double>>> bins;
    for (const auto& p : probe) {
      const double px = cr * p.x - sr * p.y;
      const double py = sr * p.x + cr * p.y;
      const double pa = p.angle + rot;
      for (const auto& g : gallery) {
        if (std::fabs(wrap_pi(pa - g.angle)) > ang_gate) continue;
        const double tx = g.x - px, ty = g.y - py;
        const std::pair<int, int> key{static_cast<int>(std::floor(tx / prm.trans_bin_px)),
                                      static_cast<int>(std::floor(ty / prm.trans_bin_px))};
        auto& slot = bins[key];
        slot.first += 1;
        slot.second.first += tx;
        slot.second.second += ty;
      }
    }
    for (const auto& [key, slot] : bins) {
      if (slot.first > best_votes) {
        best_votes = slot.first;
        best_rot = rot;
        best_tx = slot.second.first / slot.first;  // mean translation in the bin
        best_ty = slot.second.second / slot.first;
      }
    }
  }
  if (best_votes <= 0) return 0.0;

  // Greedy one-to-one pairing under the winning alignment.
  const double cr = std::cos(best_rot), sr = std::sin(best_rot);
  std::vector<Aligned> ap(probe.size());
  for (size_t i = 0; i < probe.size(); ++i)
    ap[i] = {cr * probe[i].x - sr * probe[i].y + best_tx,
             sr * probe[i].x + cr * probe[i].y + best_ty, probe[i].angle + best_rot};

  struct Cand {
    double dist;
    int pi, gi;
  };
  std::vector<Cand> cands;
  for (size_t i = 0; i < ap.size(); ++i)
    for (size_t j = 0; j < gallery.size(); ++j) {
      const double d = std::hypot(ap[i].x - gallery[j].x, ap[i].y - gallery[j].y);
      if (d > prm.pair_dist_px) continue;
      if (std::fabs(wrap_pi(ap[i].angle - gallery[j].angle)) > ang_gate) continue;
      cands.push_back({d, static_cast<int>(i), static_cast<int>(j)});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.pi != b.pi) return a.pi < b.pi;
    return a.gi < b.gi;
  });
  std::vector<char> used_p(probe.size(), 0), used_g(gallery.size(), 0);
  int pairs = 0;
  for (const auto& c : cands) {
    if (used_p[static_cast<size_t>(c.pi)] || used_g[static_cast<size_t>(c.gi)]) continue;
    used_p[static_cast<size_t>(c.pi)] = used_g[static_cast<size_t>(c.gi)] = 1;
    ++pairs;
  }
  return static_cast<double>(pairs) /
         static_cast<double>(std::min(probe.size(), gallery.size()));
}

std::vector<std::pair<int, double>> rank_n(const std::vector<std::vector<double>>& scores,
                                           const std::vector<int>& true_ids,
                                           const std::vector<int>& ks) {
  if (scores.size() != true_ids.size())
    throw ValidationError("rank_n: one true mate per probe is required");
  const int P = static_cast<int>(scores.size());
  std::vector<int> rank(static_cast<size_t>(P));
  for (int i = 0; i < P; ++i) {
    const auto& row = scores[static_cast<size_t>(i)];
    const int mate = true_ids[static_cast<size_t>(i)];
    if (mate < 0 || mate >= static_cast<int>(row.size()))
      throw ValidationError("rank_n: probe " + std::to_string(i) + " has no mate in the gallery");
    const double ms = row[static_cast<size_t>(mate)];
    // Ties count against the probe.
    int better = 0;
    for (int j = 0; j < static_cast<int>(row.size()); ++j)
      if (j != mate && row[static_cast<size_t>(j)] >= ms) ++better;
    rank[static_cast<size_t>(i)] = better + 1;
  }
  std::vector<std::pair<int, double>> table;
  for (int k : ks) {
    int hit = 0;
    for (int r : rank)
      if (r <= k) ++hit;
    table.emplace_back(k, static_cast<double>(hit) / static_cast<double>(P));
  }
  return table;
}

}  // namespace mlfg::eval
