#include "train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "core/errors.hpp"
#include "io/fsutil.hpp"
#include "train/adam.hpp"
#include "train/sampler.hpp"

namespace mlfg::train {

using models::Archive;
using models::Variant;

TrainConfig TrainConfig::from_config(const io::Config& cfg) {
  cfg.require_known(known_keys());
  TrainConfig t;
  t.phase = cfg.get_str("trainer.phase", t.phase);
  t.dataset_dir = cfg.get_str("trainer.dataset_dir", t.dataset_dir);
  t.batch_size = static_cast<int>(cfg.get_int("trainer.batch_size", t.batch_size));
  t.steps = cfg.get_int("trainer.steps", t.steps);
  t.learning_rate = cfg.get_num("trainer.learning_rate", t.learning_rate);
  t.beta1 = cfg.get_num("trainer.beta1", t.beta1);
  t.beta2 = cfg.get_num("trainer.beta2", t.beta2);
  t.seed = static_cast<uint64_t>(cfg.get_int("trainer.seed", 0));
  t.model_seed = static_cast<uint64_t>(cfg.get_int("trainer.model_seed",
                                                   static_cast<int64_t>(t.seed)));
  t.checkpoint_every = cfg.get_int("trainer.checkpoint_every", t.checkpoint_every);
  t.mg_checkpoint = cfg.get_str("trainer.mg_checkpoint", t.mg_checkpoint);
  t.patch_size = static_cast<int>(cfg.get_int("trainer.patch_size", t.patch_size));
  t.variant = cfg.get_str("model.variant", t.variant);
  t.out = cfg.get_str("trainer.out", t.out);
  t.log_path = cfg.get_str("trainer.log", t.log_path);
  t.resume = cfg.get_str("trainer.resume", t.resume);
  t.save_optimizer = cfg.get_bool("trainer.save_optimizer", t.save_optimizer);
  t.flip_augment = cfg.get_bool("trainer.flip_augment", t.flip_augment);
  t.weights.lambda_rec = static_cast<float>(cfg.get_num("loss.lambda_rec", t.weights.lambda_rec));
  t.weights.lambda_ori = static_cast<float>(cfg.get_num("loss.lambda_ori", t.weights.lambda_ori));
  t.weights.lambda_mg = static_cast<float>(cfg.get_num("loss.lambda_mg", t.weights.lambda_mg));
  t.weights.w_m = static_cast<float>(cfg.get_num("loss.w_m", t.weights.w_m));
  return t;
}

std::vector<std::string> TrainConfig::known_keys() {
  return {"trainer.phase",        "trainer.dataset_dir",    "trainer.batch_size",
          "trainer.steps",        "trainer.learning_rate",  "trainer.beta1",
          "trainer.beta2",        "trainer.seed",           "trainer.model_seed",
          "trainer.checkpoint_every", "trainer.mg_checkpoint", "trainer.patch_size",
          "model.variant",        "trainer.out",            "trainer.log",
          "trainer.resume",       "trainer.save_optimizer", "trainer.flip_augment",
          "loss.lambda_rec",      "loss.lambda_ori",        "loss.lambda_mg",
          "loss.w_m"};
}

void TrainConfig::validate() const {
  if (phase != "mg" && phase != "main")
    throw ValidationError("trainer.phase must be 'mg' or 'main', got '" + phase + "'");
  if (dataset_dir.empty()) throw ValidationError("trainer.dataset_dir is required");
  if (batch_size <= 0) throw ValidationError("trainer.batch_size must be positive");
  if (steps < 0) throw ValidationError("trainer.steps must be >= 0");
  if (patch_size % 32 != 0 || patch_size <= 0)
    throw ValidationError("trainer.patch_size must be a positive multiple of 32");
  if (phase == "main" && variant != "tbsfnet" && variant != "mlfgnet")
    throw ValidationError("model.variant must be tbsfnet or mlfgnet, got '" + variant + "'");
  if (phase == "main" && variant == "mlfgnet" && mg_checkpoint.empty())
    throw ValidationError("main phase with mlfgnet requires trainer.mg_checkpoint");
  if (weights.lambda_rec < 0 || weights.lambda_ori < 0 || weights.lambda_mg < 0 ||
      weights.w_m < 1)
    throw ValidationError("loss weights must be >= 0 and w_m >= 1");
}

namespace {

struct CsvLog {
  std::ofstream os;
  explicit CsvLog(const std::string& path) : os(path, std::ios::trunc) {
    if (!os) throw IoError("cannot open training log: " + path);
    os << "step,total,rec,ori_msff,ori_tbsf,mg,gnorm,seconds\n";
  }
  void row(int64_t step, double total, double rec, double o1, double o2, double mg, double gnorm,
           double seconds) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f\n",
                  static_cast<long long>(step), total, rec, o1, o2, mg, gnorm, seconds);
    os << buf;
    os.flush();
  }
};

template <typename T>
double grad_norm(const std::vector<nn::Parameter<T>*>& params) {
  double acc = 0.0;
  for (auto* p : params) {
    if (p->var->grad.empty()) continue;
    for (auto g : p->var->grad.data) acc += static_cast<double>(g) * g;
  }
  return std::sqrt(acc);
}

// Optimizer state <-> checkpoint extras.
template <typename T>
models::ExtraRasters adam_extras(Adam<T>& opt) {
  models::ExtraRasters extra;
  for (size_t i = 0; i < opt.slots(); ++i) {
    const auto* p = opt.param(i);
    auto to_f32 = [](const Tensor<T>& t) {
      return std::vector<float>(t.data.begin(), t.data.end());
    };
    extra.emplace_back("opt.adam.m." + p->name, to_f32(opt.m_slot(i)));
    extra.emplace_back("opt.adam.v." + p->name, to_f32(opt.v_slot(i)));
  }
  extra.emplace_back("opt.t", std::vector<float>{static_cast<float>(opt.t())});
  return extra;
}

template <typename T>
void restore_adam(const Archive& a, Adam<T>& opt) {
  const auto* t_entry = a.find("opt.t");
  if (!t_entry) return;  // checkpoint without optimizer state: fresh moments
  opt.set_t(static_cast<int64_t>(a.raster(*t_entry)[0]));
  for (size_t i = 0; i < opt.slots(); ++i) {
    const auto* p = opt.param(i);
    const auto* me = a.find("opt.adam.m." + p->name);
    const auto* ve = a.find("opt.adam.v." + p->name);
    if (!me || !ve)
      throw ValidationError("resume checkpoint is missing optimizer state for " + p->name);
    const auto mv = a.raster(*me);
    const auto vv = a.raster(*ve);
    std::copy(mv.begin(), mv.end(), opt.m_slot(i).data.begin());
    std::copy(vv.begin(), vv.end(), opt.v_slot(i).data.begin());
  }
}

std::string checkpoint_name(const std::string& out, int64_t step) {
  const auto dot = out.rfind('.');
  const std::string stem = dot == std::string::npos ? out : out.substr(0, dot);
  const std::string ext = dot == std::string::npos ? "" : out.substr(dot);
  return stem + "_step" + std::to_string(step) + ext;
}

}  // namespace

std::string train_mg(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.phase = "mg";
  c.validate();
  auto ds = synth::load_dataset(c.dataset_dir);

  models::MgModel<float> model(nn::BlockConfig{}, c.model_seed);
  int64_t start_step = 0;
  Adam<float> opt(model.store().trainable(), static_cast<float>(c.learning_rate),
                  static_cast<float>(c.beta1), static_cast<float>(c.beta2));
  if (!c.resume.empty()) {
    Archive a = models::read_archive(c.resume);
    if (a.variant != "mg") throw ValidationError("resume checkpoint is not an mg network");
    models::load_into_store(a, model.store());
    restore_adam(a, opt);
    start_step = a.step;
  }

  CsvLog log(c.log_path.empty() ? c.out + ".log.csv" : c.log_path);
  for (int64_t step = start_step + 1; step <= c.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    Batch b = sample_batch(ds, c.seed, step, c.batch_size, c.patch_size, c.flip_augment);
    auto pred = model.forward(make_leaf(std::move(b.target)), /*training=*/true);
    auto loss = losses::mg_pretrain_loss(pred, b.minumap);
    backward(loss);
    const double gn = grad_norm(model.store().trainable());
    opt.step();
    model.store().zero_grads();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.row(step, loss->value.data[0], 0, 0, 0, loss->value.data[0], gn, secs);
    if (c.checkpoint_every > 0 && step % c.checkpoint_every == 0 && step != c.steps)
      models::save_mg(checkpoint_name(c.out, step), model, step,
                      c.save_optimizer ? adam_extras(opt) : models::ExtraRasters{});
  }
  models::save_mg(c.out, model, c.steps,
                  c.save_optimizer ? adam_extras(opt) : models::ExtraRasters{});
  return c.out;
}

std::string train_main(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.phase = "main";
  c.validate();
  auto ds = synth::load_dataset(c.dataset_dir);

  const Variant variant = *models::variant_from_name(c.variant);
  models::ModelConfig mc;
  mc.variant = variant;
  std::unique_ptr<models::Enhancer<float>> model;
  std::unique_ptr<models::MgModel<float>> mg;

  int64_t start_step = 0;
  Archive resume_archive;
  const bool resuming = !c.resume.empty();
  if (resuming) {
    resume_archive = models::read_archive(c.resume);
    if (resume_archive.variant != c.variant)
      throw ValidationError("resume checkpoint variant '" + resume_archive.variant +
                            "' does not match model.variant '" + c.variant + "'");
    mc = resume_archive.config;
    model = std::make_unique<models::Enhancer<float>>(mc, resume_archive.seed);
    models::load_into_store(resume_archive, model->store());
    start_step = resume_archive.step;
  } else {
    model = std::make_unique<models::Enhancer<float>>(mc, c.model_seed);
  }

  if (variant == Variant::kMlfgNet) {
    mg = models::load_mg<float>(c.mg_checkpoint);
    mg->freeze();
  }

  Adam<float> opt(model->store().trainable(), static_cast<float>(c.learning_rate),
                  static_cast<float>(c.beta1), static_cast<float>(c.beta2));
  if (resuming) restore_adam(resume_archive, opt);

  CsvLog log(c.log_path.empty() ? c.out + ".log.csv" : c.log_path);
  for (int64_t step = start_step + 1; step <= c.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    Batch b = sample_batch(ds, c.seed, step, c.batch_size, c.patch_size, c.flip_augment);
    auto out = model->forward(make_leaf(std::move(b.degraded)), /*training=*/true);
    losses::BatchTargets<float> tgt;
    tgt.target = std::move(b.target);
    tgt.ori_sc = std::move(b.ori_sc);
    tgt.ori_mask = std::move(b.ori_mask);
    tgt.minumap_grid = std::move(b.minumap);
    auto bd = losses::total_loss(out, tgt, variant, mg.get(), c.weights);
    backward(bd.total);
    const double gn = grad_norm(model->store().trainable());
    opt.step();
    model->store().zero_grads();
    if (mg) mg->store().zero_grads();  // frozen: must stay all-zero anyway
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.row(step, bd.total->value.data[0], bd.rec, bd.ori_msff, bd.ori_tbsf, bd.mg, gn, secs);
    if (c.checkpoint_every > 0 && step % c.checkpoint_every == 0 && step != c.steps)
      models::save_enhancer(checkpoint_name(c.out, step), *model, step,
                            c.save_optimizer ? adam_extras(opt) : models::ExtraRasters{});
  }
  models::save_enhancer(c.out, *model, c.steps,
                        c.save_optimizer ? adam_extras(opt) : models::ExtraRasters{});
  return c.out;
}

std::string train(const TrainConfig& cfg) {
  if (cfg.phase == "mg") return train_mg(cfg);
  if (cfg.phase == "main") return train_main(cfg);
  throw ValidationError("trainer.phase must be 'mg' or 'main', got '" + cfg.phase + "'");
}

}  // namespace mlfg::train
