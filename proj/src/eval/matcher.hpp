#pragma once

#include <vector>

#include "synth/types.hpp"

namespace mlfg::eval {

struct MatchParams {
  double rot_lo_deg = -30, rot_hi_deg = 30, rot_step_deg = 3;
  double trans_bin_px = 8;
  double pair_dist_px = 12;
  double pair_angle_deg = 20;
};

// Alignment-search minutiae matcher: coarse rotation grid + translation
// voting from all angle-compatible pairs, then greedy one-to-one pairing
// under the best alignment. Score = paired / min(|probe|, |gallery|).
double match_score(const std::vector<synth::MinutiaPoint>& probe,
                   const std::vector<synth::MinutiaPoint>& gallery,
                   const MatchParams& params = {});

// Rank table from a probe x gallery score matrix. true_ids[i] is the gallery
// column holding probe i's mate; ties are broken against the probe.
std::vector<std::pair<int, double>> rank_n(const std::vector<std::vector<double>>& scores,
                                           const std::vector<int>& true_ids,
                                           const std::vector<int>& ks);

}  // namespace mlfg::eval
