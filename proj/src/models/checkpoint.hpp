#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "models/model.hpp"

namespace mlfg::models {

// Single-file parameter archive, version "MLFG-CKPT-1":
//   MLFG-CKPT-1\n
//   <json header length in bytes>\n
//   <json header>
//   <float32 little-endian blob>
// The header records variant, build seed, step, model config and one entry
// per named raster (offset counted in floats). Optimizer state rides along
// under "opt." keys so interrupted training can resume bit-exactly.

struct ArchiveEntry {
  std::string name;
  std::vector<int> shape;
  int64_t offset = 0;
};

struct Archive {
  std::string variant;
  uint64_t seed = 0;
  int64_t step = 0;
  ModelConfig config;
  std::vector<ArchiveEntry> entries;
  std::map<std::string, int> index;  // name -> entries position
  std::vector<float> blob;

  const ArchiveEntry* find(const std::string& name) const {
    auto it = index.find(name);
    return it == index.end() ? nullptr : &entries[static_cast<size_t>(it->second)];
  }
  std::vector<float> raster(const ArchiveEntry& e) const;
};

using ExtraRasters = std::vector<std::pair<std::string, std::vector<float>>>;

template <typename T>
void save_checkpoint(const std::string& path, const nn::ParamStore<T>& store, Variant variant,
                     uint64_t seed, int64_t step, const ModelConfig& config,
                     const ExtraRasters& extra = {});

Archive read_archive(const std::string& path);

// Copies every store entry from the archive; throws ValidationError naming
// the first missing key or shape mismatch. Extra archive keys are ignored.
template <typename T>
void load_into_store(const Archive& a, nn::ParamStore<T>& store);

// Convenience loaders that rebuild the model from the archived config.
template <typename T>
std::unique_ptr<Enhancer<T>> load_enhancer(const std::string& path);

template <typename T>
std::unique_ptr<MgModel<T>> load_mg(const std::string& path);

template <typename T>
void save_enhancer(const std::string& path, const Enhancer<T>& model, int64_t step = 0,
                   const ExtraRasters& extra = {});

template <typename T>
void save_mg(const std::string& path, const MgModel<T>& model, int64_t step = 0,
             const ExtraRasters& extra = {});

}  // namespace mlfg::models
