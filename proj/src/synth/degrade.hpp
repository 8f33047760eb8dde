#pragma once

#include <utility>

#include "synth/types.hpp"

namespace mlfg::synth {

struct DegradeResult {
  Image degraded;
  std::vector<uint8_t> quality;  // QualityLabel per pixel
};

// Applies, in order: dryness dotting, occlusion blobs, oriented background
// clutter outside the foreground, contrast compression, Gaussian blur.
// quality marks occluded or heavily dotted foreground as low, remaining
// foreground high, everything else background. Deterministic per
// config.rng_seed.
DegradeResult degrade(const Image& target, const BoolImage& foreground,
                      const DegradationConfig& config);

}  // namespace mlfg::synth
