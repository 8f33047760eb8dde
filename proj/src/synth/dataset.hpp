#pragma once

#include <string>

#include "io/config.hpp"
#include "synth/types.hpp"

namespace mlfg::synth {

// Full synthesis of one labeled sample: zero-pole orientation field,
// rendered binary ridges inside an elliptical foreground, skeleton-derived
// minutiae with region map, and the degraded counterpart.
TrainingSample generate_sample(int size, const DegradationConfig& degradation,
                               uint64_t sample_seed);

// Writes n samples plus manifest.json. Per-index files:
//   <i>_degraded.png, <i>_target.png, <i>_orient.f32, <i>_minumap.f32,
//   <i>_minutiae.csv
// Returns the manifest path. Fully reproducible from the arguments.
std::string make_dataset(int n, int size, const DegradationConfig& degradation, uint64_t seed,
                         const std::string& out_dir);

// What the trainer/evaluator loads back from disk.
struct LoadedSample {
  Image degraded;
  Image target;
  OrientationField field;  // with foreground mask
  Image minumap_grid;      // rasterized from the csv at 1/8 grid
  std::vector<MinutiaPoint> minutiae;
};

struct Dataset {
  int size_px = 0;
  std::vector<LoadedSample> samples;
};

LoadedSample load_sample(const std::string& dir, int index);
Dataset load_dataset(const std::string& dir);

// degrade.* config keys <-> DegradationConfig.
DegradationConfig degradation_from_config(const io::Config& cfg);
std::vector<std::string> degradation_config_keys();

}  // namespace mlfg::synth
