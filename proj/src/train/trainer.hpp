#pragma once

#include <string>

#include "io/config.hpp"
#include "losses/losses.hpp"
#include "models/checkpoint.hpp"

namespace mlfg::train {

struct TrainConfig {
  std::string phase = "main";  // "mg" | "main"
  std::string dataset_dir;
  int batch_size = 8;
  int64_t steps = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9, beta2 = 0.999;
  uint64_t seed = 0;
  uint64_t model_seed = 0;          // build seed; defaults to `seed`
  int64_t checkpoint_every = 0;     // 0 = final checkpoint only
  std::string mg_checkpoint;        // required for main-phase mlfgnet
  losses::LossWeights<float> weights;
  int patch_size = 128;
  std::string variant = "mlfgnet";  // main phase
  std::string out = "model.ckpt";
  std::string log_path;             // defaults to out + ".log.csv"
  std::string resume;               // checkpoint to continue from
  bool save_optimizer = true;
  bool flip_augment = true;

  static TrainConfig from_config(const io::Config& cfg);
  static std::vector<std::string> known_keys();
  void validate() const;
};

// MG pretraining on (clean target -> minutiae region grid) pairs.
std::string train_mg(const TrainConfig& cfg);

// Main enhancement training; mlfgnet loads and freezes the MG checkpoint.
std::string train_main(const TrainConfig& cfg);

// Dispatch on cfg.phase.
std::string train(const TrainConfig& cfg);

}  // namespace mlfg::train
