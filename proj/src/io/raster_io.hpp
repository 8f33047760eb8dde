#pragma once

#include <string>
#include <vector>

namespace mlfg::io {

// Planar float32 raster container:
//   ORIF1 <h> <w> <declared_planes>\n
// followed by row-major little-endian float32 planes. Orientation files
// declare 2 planes (sin, cos) but carry a third mask plane after them;
// readers recover the actual plane count from the file size.
struct PlanarF32 {
  int h = 0, w = 0;
  int declared_planes = 0;
  std::vector<std::vector<float>> planes;
};

void write_planar_f32(const std::string& path, const std::vector<const float*>& planes, int h,
                      int w, int declared_planes);

PlanarF32 read_planar_f32(const std::string& path);

}  // namespace mlfg::io
