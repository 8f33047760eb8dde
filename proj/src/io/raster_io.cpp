#include "io/raster_io.hpp"

#include <bit>
#include <cstring>
#include <ostream>
#include <sstream>

#include "core/errors.hpp"
#include "io/fsutil.hpp"

static_assert(std::endian::native == std::endian::little, "raster planes are little-endian");

namespace mlfg::io {

void write_planar_f32(const std::string& path, const std::vector<const float*>& planes, int h,
                      int w, int declared_planes) {
  if (h <= 0 || w <= 0 || planes.empty()) throw ValidationError("write_planar_f32: empty raster");
  write_file_atomic(path, [&](std::ostream& os) {
    os << "ORIF1 " << h << " " << w << " " << declared_planes << "\n";
    for (const float* p : planes)
      os.write(reinterpret_cast<const char*>(p),
               static_cast<std::streamsize>(sizeof(float) * h * w));
  });
}

PlanarF32 read_planar_f32(const std::string& path) {
  auto bytes = read_file_bytes(path);
  size_t nl = 0;
  while (nl < bytes.size() && bytes[nl] != '\n') ++nl;
  if (nl >= bytes.size()) throw ValidationError("raster header missing newline: " + path);
  std::istringstream hs(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(nl)));
  std::string magic;
  PlanarF32 out;
  hs >> magic >> out.h >> out.w >> out.declared_planes;
  if (!hs || magic != "ORIF1" || out.h <= 0 || out.w <= 0)
    throw ValidationError("bad raster header in " + path);
  const size_t body = bytes.size() - nl - 1;
  const size_t plane_bytes = sizeof(float) * static_cast<size_t>(out.h) * out.w;
  if (plane_bytes == 0 || body % plane_bytes != 0)
    throw ValidationError("raster body size is not a whole number of planes: " + path);
  const size_t n_planes = body / plane_bytes;
  const unsigned char* src = bytes.data() + nl + 1;
  for (size_t p = 0; p < n_planes; ++p) {
    std::vector<float> plane(static_cast<size_t>(out.h) * out.w);
    std::memcpy(plane.data(), src + p * plane_bytes, plane_bytes);
    out.planes.push_back(std::move(plane));
  }
  return out;
}

}  // namespace mlfg::io
