#pragma once

#include "synth/types.hpp"

namespace mlfg::synth {

// Renders a binary ridge image by iteratively filtering seeded noise with
// Gabor-like kernels aligned to the local orientation, then thresholding at
// the median. `field` must be full-resolution (one cell per pixel).
// frequency is in ridges/pixel and must lie in [1/12, 1/6].
Image render_ridges(const OrientationField& field, double frequency, uint64_t seed);

// Same pipeline with caller-provided initial noise (values in [0,1)); used
// by the seeded overload and by symmetry tests.
Image render_ridges_from_noise(const OrientationField& field, double frequency,
                               const Image& noise);

}  // namespace mlfg::synth
