#include "synth/orientation.hpp"

#include "core/errors.hpp"

namespace mlfg::synth {

void validate_spec(const SingularitySpec& spec, int height, int width) {
  if (spec.cores.size() > 2) throw ValidationError("singularity spec: more than 2 cores");
  if (spec.deltas.size() > 2) throw ValidationError("singularity spec: more than 2 deltas");
  auto inside = [&](const std::pair<double, double>& p) {
    return p.first >= 0 && p.first < width && p.second >= 0 && p.second < height;
  };
  for (auto& c : spec.cores)
    if (!inside(c))
      throw ValidationError("singularity core outside image bounds: (" +
                            std::to_string(c.first) + "," + std::to_string(c.second) + ")");
  for (auto& d : spec.deltas)
    if (!inside(d))
      throw ValidationError("singularity delta outside image bounds: (" +
                            std::to_string(d.first) + "," + std::to_string(d.second) + ")");
}

double model_theta(const SingularitySpec& spec, double x, double y) {
  double t = spec.global_offset;
  for (auto& c : spec.cores) t += 0.5 * std::atan2(y - c.second, x - c.first);
  for (auto& d : spec.deltas) t -= 0.5 * std::atan2(y - d.second, x - d.first);
  return t;
}

namespace {

OrientationField sample_field(const SingularitySpec& spec, int gh, int gw, double step,
                              double origin) {
  OrientationField f(gh, gw);
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      const double t = model_theta(spec, origin + gx * step, origin + gy * step);
      const size_t i = static_cast<size_t>(gy) * gw + gx;
      f.s[i] = static_cast<float>(std::sin(2.0 * t));
      f.c[i] = static_cast<float>(std::cos(2.0 * t));
    }
  return f;
}

void check_dims(int height, int width) {
  if (height <= 0 || width <= 0 || height % 32 != 0 || width % 32 != 0)
    throw ValidationError("orientation field dims must be positive multiples of 32, got " +
                          std::to_string(height) + "x" + std::to_string(width));
}

}  // namespace

OrientationField gen_orientation(const SingularitySpec& spec, int height, int width) {
  check_dims(height, width);
  validate_spec(spec, height, width);
  return sample_field(spec, height / 8, width / 8, 8.0, 3.5);
}

OrientationField gen_orientation_fullres(const SingularitySpec& spec, int height, int width) {
  check_dims(height, width);
  validate_spec(spec, height, width);
  return sample_field(spec, height, width, 1.0, 0.0);
}

}  // namespace mlfg::synth
