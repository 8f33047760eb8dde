#include "synth/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "core/errors.hpp"
#include "core/rng.hpp"
#include "io/fsutil.hpp"
#include "io/png_io.hpp"
#include "io/raster_io.hpp"
#include "synth/degrade.hpp"
#include "synth/orientation.hpp"
#include "synth/ridges.hpp"
#include "synth/skeleton.hpp"

namespace fs = std::filesystem;

namespace mlfg::synth {

namespace {

BoolImage ellipse_foreground(int size, Pcg32& rng) {
  const double cx = size / 2.0 + rng.uniform(-size / 16.0, size / 16.0);
  const double cy = size / 2.0 + rng.uniform(-size / 16.0, size / 16.0);
  const double ax = rng.uniform(0.36, 0.46) * size;
  const double ay = rng.uniform(0.40, 0.48) * size;
  BoolImage fg(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = (x - cx) / ax, v = (y - cy) / ay;
      fg.at(y, x) = (u * u + v * v <= 1.0) ? 1 : 0;
    }
  return fg;
}

SingularitySpec random_spec(int size, Pcg32& rng) {
  SingularitySpec spec;
  spec.global_offset = rng.uniform(-kPi / 4, kPi / 4);
  auto core_at = [&](double fx, double fy) {
    spec.cores.emplace_back(fx * size, fy * size);
  };
  auto delta_at = [&](double fx, double fy) {
    spec.deltas.emplace_back(fx * size, fy * size);
  };
  switch (rng.below(4)) {
    case 0:  // plain arch: no singularities
      break;
    case 1:  // loop
      core_at(rng.uniform(0.40, 0.60), rng.uniform(0.35, 0.55));
      delta_at(rng.uniform(0.30, 0.70), rng.uniform(0.65, 0.82));
      break;
    case 2:  // whorl
      core_at(rng.uniform(0.38, 0.52), rng.uniform(0.35, 0.50));
      core_at(rng.uniform(0.48, 0.62), rng.uniform(0.42, 0.58));
      delta_at(rng.uniform(0.22, 0.40), rng.uniform(0.68, 0.84));
      delta_at(rng.uniform(0.60, 0.78), rng.uniform(0.68, 0.84));
      break;
    default:  // tented arch
      core_at(rng.uniform(0.42, 0.58), rng.uniform(0.42, 0.58));
      delta_at(rng.uniform(0.42, 0.58), rng.uniform(0.70, 0.84));
      break;
  }
  return spec;
}

std::string sample_prefix(const std::string& dir, int index) {
  return (fs::path(dir) / std::to_string(index)).string();
}

}  // namespace

TrainingSample generate_sample(int size, const DegradationConfig& degradation,
                               uint64_t sample_seed) {
  if (size % 32 != 0 || size <= 0)
    throw ValidationError("sample size must be a positive multiple of 32");
  TrainingSample s;
  s.seed = sample_seed;

  Pcg32 rng(child_seed(sample_seed, 0), 0xfeed);
  s.foreground = ellipse_foreground(size, rng);
  s.spec = random_spec(size, rng);
  s.frequency = rng.uniform(1.0 / 11.0, 1.0 / 7.5);

  const OrientationField full = gen_orientation_fullres(s.spec, size, size);
  s.orientation = gen_orientation(s.spec, size, size);
  // Grid mask = foreground at cell centers.
  for (int gy = 0; gy < s.orientation.gh; ++gy)
    for (int gx = 0; gx < s.orientation.gw; ++gx)
      s.orientation.mask[static_cast<size_t>(gy) * s.orientation.gw + gx] =
          s.foreground.at(gy * 8 + 4, gx * 8 + 4);

  s.target = render_ridges(full, s.frequency, child_seed(sample_seed, 1));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (!s.foreground.at(y, x)) s.target.at(y, x) = 0.f;

  const BoolImage skel = skeletonize(s.target);
  s.minutiae = extract_minutiae(skel, s.orientation);
  s.minutiae_map = rasterize_minutiae(s.minutiae, size, size, 8.0);

  DegradationConfig cfg = degradation;
  cfg.rng_seed = child_seed(sample_seed, 2);
  auto deg = degrade(s.target, s.foreground, cfg);
  s.degraded = std::move(deg.degraded);
  s.quality = std::move(deg.quality);
  return s;
}

namespace {

void write_sample_files(const std::string& dir, int index, const TrainingSample& s) {
  const std::string p = sample_prefix(dir, index);
  io::write_gray_png(p + "_degraded.png", s.degraded);
  io::write_gray_png(p + "_target.png", s.target);

  std::vector<float> maskf(s.orientation.mask.size());
  for (size_t i = 0; i < maskf.size(); ++i) maskf[i] = s.orientation.mask[i] ? 1.f : 0.f;
  io::write_planar_f32(p + "_orient.f32",
                       {s.orientation.s.data(), s.orientation.c.data(), maskf.data()},
                       s.orientation.gh, s.orientation.gw, 2);
  io::write_planar_f32(p + "_minumap.f32", {s.minutiae_map.v.data()}, s.minutiae_map.h,
                       s.minutiae_map.w, 1);

  io::write_file_atomic(p + "_minutiae.csv", [&](std::ostream& os) {
    os << "x,y,angle_rad,kind\n";
    char buf[128];
    for (const auto& m : s.minutiae) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%.6f,%s\n", m.x, m.y, m.angle,
                    m.kind == MinutiaKind::kEnding ? "ending" : "bifurcation");
      os << buf;
    }
  });
}

}  // namespace

std::string make_dataset(int n, int size, const DegradationConfig& degradation, uint64_t seed,
                         const std::string& out_dir) {
  if (n < 0) throw ValidationError("make_dataset: n must be >= 0");
  if (size % 32 != 0 || size <= 0)
    throw ValidationError("make_dataset: size must be a positive multiple of 32");
  degradation.validate();
  io::ensure_dir(out_dir);

  std::vector<TrainingSample> samples(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i)
    samples[static_cast<size_t>(i)] = generate_sample(size, degradation, child_seed(seed, static_cast<uint64_t>(i)));

  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["n"] = n;
  manifest["size"] = size;
  nlohmann::json deg;
  deg["dryness_density"] = degradation.dryness_density;
  deg["occlusion_count"] = degradation.occlusion_count;
  deg["occlusion_radius_lo"] = degradation.occlusion_radius_lo;
  deg["occlusion_radius_hi"] = degradation.occlusion_radius_hi;
  deg["background_noise_gain"] = degradation.background_noise_gain;
  deg["contrast_lo"] = degradation.contrast_lo;
  deg["contrast_hi"] = degradation.contrast_hi;
  deg["blur_sigma_lo"] = degradation.blur_sigma_lo;
  deg["blur_sigma_hi"] = degradation.blur_sigma_hi;
  manifest["degradation"] = deg;

  nlohmann::json list = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<size_t>(i)];
    write_sample_files(out_dir, i, s);
    nlohmann::json e;
    e["index"] = i;
    e["seed"] = s.seed;
    e["frequency"] = s.frequency;
    e["offset"] = s.spec.global_offset;
    nlohmann::json cores = nlohmann::json::array(), deltas = nlohmann::json::array();
    for (auto& c : s.spec.cores) cores.push_back({c.first, c.second});
    for (auto& d : s.spec.deltas) deltas.push_back({d.first, d.second});
    e["cores"] = cores;
    e["deltas"] = deltas;
    e["minutiae"] = s.minutiae.size();
    list.push_back(e);
  }
  manifest["samples"] = list;

  const std::string mpath = (fs::path(out_dir) / "manifest.json").string();
  io::write_file_atomic(mpath, [&](std::ostream& os) { os << manifest.dump(2) << "\n"; });
  return mpath;
}

LoadedSample load_sample(const std::string& dir, int index) {
  const std::string p = sample_prefix(dir, index);
  LoadedSample s;
  if (!io::file_exists(p + "_degraded.png"))
    throw IoError("dataset sample missing: " + p + "_degraded.png");
  s.degraded = io::read_gray_png(p + "_degraded.png");
  s.target = io::read_gray_png(p + "_target.png");

  auto orient = io::read_planar_f32(p + "_orient.f32");
  if (orient.planes.size() != 3)
    throw ValidationError("orientation raster must carry s, c and mask planes: " + p);
  s.field = OrientationField(orient.h, orient.w);
  s.field.s = orient.planes[0];
  s.field.c = orient.planes[1];
  for (size_t i = 0; i < s.field.mask.size(); ++i)
    s.field.mask[i] = orient.planes[2][i] != 0.f;

  std::ifstream csv(p + "_minutiae.csv");
  if (!csv) throw IoError("dataset sample missing: " + p + "_minutiae.csv");
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    MinutiaPoint m;
    char comma;
    std::string kind;
    ls >> m.x >> comma >> m.y >> comma >> m.angle >> comma;
    std::getline(ls, kind);
    if (!ls && kind.empty()) throw ValidationError("bad minutiae row: " + line);
    m.kind = kind == "bifurcation" ? MinutiaKind::kBifurcation : MinutiaKind::kEnding;
    s.minutiae.push_back(m);
  }
  s.minumap_grid = rasterize_minutiae_grid(s.minutiae, s.field.gh, s.field.gw, 8.0);
  return s;
}

Dataset load_dataset(const std::string& dir) {
  const std::string mpath = (fs::path(dir) / "manifest.json").string();
  if (!io::file_exists(mpath)) throw IoError("dataset manifest missing: " + mpath);
  nlohmann::json manifest;
  try {
    std::ifstream is(mpath);
    is >> manifest;
  } catch (const std::exception& e) {
    throw ValidationError("bad dataset manifest: " + std::string(e.what()));
  }
  Dataset ds;
  ds.size_px = manifest.at("size").get<int>();
  const int n = manifest.at("n").get<int>();
  for (int i = 0; i < n; ++i) ds.samples.push_back(load_sample(dir, i));
  if (ds.samples.empty()) throw ValidationError("dataset is empty: " + dir);
  return ds;
}

DegradationConfig degradation_from_config(const io::Config& cfg) {
  DegradationConfig d;
  d.dryness_density = cfg.get_num("degrade.dryness_density", d.dryness_density);
  d.occlusion_count = static_cast<int>(cfg.get_int("degrade.occlusion_count", d.occlusion_count));
  d.occlusion_radius_lo = cfg.get_num("degrade.occlusion_radius_lo", d.occlusion_radius_lo);
  d.occlusion_radius_hi = cfg.get_num("degrade.occlusion_radius_hi", d.occlusion_radius_hi);
  d.background_noise_gain = cfg.get_num("degrade.background_noise_gain", d.background_noise_gain);
  d.contrast_lo = cfg.get_num("degrade.contrast_lo", d.contrast_lo);
  d.contrast_hi = cfg.get_num("degrade.contrast_hi", d.contrast_hi);
  d.blur_sigma_lo = cfg.get_num("degrade.blur_sigma_lo", d.blur_sigma_lo);
  d.blur_sigma_hi = cfg.get_num("degrade.blur_sigma_hi", d.blur_sigma_hi);
  d.validate();
  return d;
}

std::vector<std::string> degradation_config_keys() {
  return {"degrade.dryness_density",      "degrade.occlusion_count",
          "degrade.occlusion_radius_lo",  "degrade.occlusion_radius_hi",
          "degrade.background_noise_gain", "degrade.contrast_lo",
          "degrade.contrast_hi",          "degrade.blur_sigma_lo",
          "degrade.blur_sigma_hi"};
}

}  // namespace mlfg::synth
