#pragma once

#include <memory>
#include <optional>
#include <string>

#include "nn/blocks.hpp"

namespace mlfg::models {

enum class Variant { kTbsfNet, kMlfgNet, kMg };

std::string variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::kMlfgNet;
  nn::BlockConfig block;
  int msff_count = 1;
  int tbsf_count = 1;
};

template <typename T>
struct EnhanceOutput {
  Var<T> enhanced;                    // {N,1,H,W} in [0,1]
  Var<T> w_high, w_low, w_bg;         // {N,1,H/8,W/8}
  Var<T> ori_msff;                    // {N,2,H/8,W/8}, mlfgnet only
  Var<T> ori_tbsf;                    // {N,2,H/8,W/8}, mlfgnet only
};

// TBSFNet / MLFGNet: down x3 -> TBSF(_O) -> MSFF(_O) -> up x3 -> Tanh ->
// (x+1)/2.
template <typename T>
class Enhancer {
 public:
  Enhancer(const ModelConfig& cfg, uint64_t seed);

  EnhanceOutput<T> forward(const Var<T>& image, bool training) const;

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  uint64_t seed() const { return seed_; }
  nn::ParamStore<T>& store() { return store_; }
  const nn::ParamStore<T>& store() const { return store_; }

 private:
  ModelConfig cfg_;
  uint64_t seed_;
  nn::ParamStore<T> store_;
  std::unique_ptr<nn::DownStage<T>> enc1_, enc2_, enc3_;
  std::vector<std::unique_ptr<nn::TbsfBlock<T>>> tbsf_;
  struct Msff {
    std::unique_ptr<nn::Msfe<T>> msfe;
    std::unique_ptr<nn::Msfs<T>> trunk;
    std::unique_ptr<nn::Msfs<T>> ori;  // 2-channel head, mlfgnet only
  };
  std::vector<Msff> msff_;
  std::unique_ptr<nn::UpStage<T>> dec1_, dec2_, dec3_;
};

// Standalone minutiae-guidance network (trained separately, used frozen).
template <typename T>
class MgModel {
 public:
  MgModel(const nn::BlockConfig& cfg, uint64_t seed);

  Var<T> forward(const Var<T>& image, bool training) const;

  uint64_t seed() const { return seed_; }
  const nn::BlockConfig& block_config() const { return cfg_; }
  nn::ParamStore<T>& store() { return store_; }
  const nn::ParamStore<T>& store() const { return store_; }

  void freeze() { store_.set_trainable_grad(false); }
  bool frozen() const { return store_.all_frozen(); }

 private:
  uint64_t seed_;
  nn::BlockConfig cfg_;
  nn::ParamStore<T> store_;
  std::unique_ptr<nn::MgNet<T>> net_;
};

}  // namespace mlfg::models
