#pragma once

#include "synth/types.hpp"

namespace mlfg::synth {

// Morphological thinning (Zhang-Suen) of a strictly binary image (values
// exactly 0 or 1) down to a 1-px-wide 8-connected skeleton. Runs to
// convergence, so thinning a skeleton returns it unchanged.
BoolImage skeletonize(const Image& binary);

// Crossing number at (y, x): half the sum of absolute differences around
// the 8-neighbour ring. 1 marks a ridge ending, 3 a bifurcation.
int crossing_number(const BoolImage& skel, int y, int x);

// Scans a 1-px skeleton for CN==1 / CN==3 pixels. Angles come from the
// orientation grid, disambiguated by the ridge departure direction.
// Minutiae within `border_px` of the image edge or of a non-foreground
// grid cell are discarded.
std::vector<MinutiaPoint> extract_minutiae(const BoolImage& skel, const OrientationField& field,
                                           int border_px = 8);

// raster(p) = max_m exp(-|p - m|^2 / (2 (r_m/2)^2)), in [0,1].
Image rasterize_minutiae(const std::vector<MinutiaPoint>& minutiae, int height, int width,
                         double r_m = 8.0);

// Same map evaluated at the 1/8-grid cell centers (distances in pixels).
Image rasterize_minutiae_grid(const std::vector<MinutiaPoint>& minutiae, int gh, int gw,
                              double r_m = 8.0);

}  // namespace mlfg::synth
