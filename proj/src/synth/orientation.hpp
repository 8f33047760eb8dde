#pragma once

#include "synth/types.hpp"

namespace mlfg::synth {

// Orientation angle of the zero-pole model at pixel position (x, y):
//   theta = offset + 1/2 sum_cores arg(z - z_core) - 1/2 sum_deltas arg(z - z_delta)
double model_theta(const SingularitySpec& spec, double x, double y);

// 1/8-resolution field sampled at 8-px cell centers (8i+3.5, 8j+3.5).
// Mask is all-true; callers intersect with the foreground afterwards.
// height/width must be divisible by 32 and singularities inside bounds.
OrientationField gen_orientation(const SingularitySpec& spec, int height, int width);

// One cell per pixel; same preconditions.
OrientationField gen_orientation_fullres(const SingularitySpec& spec, int height, int width);

void validate_spec(const SingularitySpec& spec, int height, int width);

}  // namespace mlfg::synth
