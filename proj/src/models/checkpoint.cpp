#include "models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "core/errors.hpp"
#include "io/fsutil.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32");

namespace mlfg::models {

namespace {

constexpr const char* kMagic = "MLFG-CKPT-1";

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["base_channels"] = c.block.base_channels;
  j["encoder_channels"] = {c.block.encoder_channels[0], c.block.encoder_channels[1],
                           c.block.encoder_channels[2]};
  j["negative_slope"] = c.block.negative_slope;
  j["dilations"] = {c.block.dilations[0], c.block.dilations[1], c.block.dilations[2]};
  j["msff_count"] = c.msff_count;
  j["tbsf_count"] = c.tbsf_count;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j, Variant v) {
  ModelConfig c;
  c.variant = v;
  c.block.base_channels = j.at("base_channels").get<int>();
  for (int i = 0; i < 3; ++i) {
    c.block.encoder_channels[i] = j.at("encoder_channels").at(i).get<int>();
    c.block.dilations[i] = j.at("dilations").at(i).get<int>();
  }
  c.block.negative_slope = j.at("negative_slope").get<double>();
  c.msff_count = j.at("msff_count").get<int>();
  c.tbsf_count = j.at("tbsf_count").get<int>();
  return c;
}

}  // namespace

std::vector<float> Archive::raster(const ArchiveEntry& e) const {
  int64_t n = 1;
  for (int d : e.shape) n *= d;
  return std::vector<float>(blob.begin() + e.offset, blob.begin() + e.offset + n);
}

template <typename T>
void save_checkpoint(const std::string& path, const nn::ParamStore<T>& store, Variant variant,
                     uint64_t seed, int64_t step, const ModelConfig& config,
                     const ExtraRasters& extra) {
  nlohmann::json entries = nlohmann::json::array();
  int64_t offset = 0;
  std::vector<const nn::Parameter<T>*> params;
  for (auto& p : store.items()) params.push_back(p.get());

  for (auto* p : params) {
    nlohmann::json e;
    e["name"] = p->name;
    e["shape"] = p->var->value.shape;
    e["offset"] = offset;
    entries.push_back(e);
    offset += p->var->value.numel();
  }
  for (auto& [name, data] : extra) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = {static_cast<int>(data.size())};
    e["offset"] = offset;
    entries.push_back(e);
    offset += static_cast<int64_t>(data.size());
  }

  nlohmann::json header;
  header["format"] = kMagic;
  header["variant"] = variant_name(variant);
  header["seed"] = seed;
  header["step"] = step;
  header["config"] = config_to_json(config);
  header["entries"] = entries;
  header["blob_floats"] = offset;
  const std::string hs = header.dump();

  io::write_file_atomic(path, [&](std::ostream& os) {
    os << kMagic << "\n" << hs.size() << "\n" << hs;
    for (auto* p : params) {
      if constexpr (std::is_same_v<T, float>) {
        os.write(reinterpret_cast<const char*>(p->var->value.ptr()),
                 static_cast<std::streamsize>(sizeof(float) * p->var->value.numel()));
      } else {
        std::vector<float> tmp(p->var->value.data.begin(), p->var->value.data.end());
        os.write(reinterpret_cast<const char*>(tmp.data()),
                 static_cast<std::streamsize>(sizeof(float) * tmp.size()));
      }
    }
    for (auto& [name, data] : extra)
      os.write(reinterpret_cast<const char*>(data.data()),
               static_cast<std::streamsize>(sizeof(float) * data.size()));
  });
}

Archive read_archive(const std::string& path) {
  auto bytes = io::read_file_bytes(path);
  const std::string magic_line = std::string(kMagic) + "\n";
  if (bytes.size() < magic_line.size() ||
      std::memcmp(bytes.data(), magic_line.data(), magic_line.size()) != 0)
    throw ValidationError("not a " + std::string(kMagic) + " archive: " + path);
  size_t pos = magic_line.size();
  size_t nl = pos;
  while (nl < bytes.size() && bytes[nl] != '\n') ++nl;
  if (nl >= bytes.size()) throw ValidationError("truncated archive header: " + path);
  const size_t hlen = std::stoul(std::string(bytes.begin() + pos, bytes.begin() + nl));
  pos = nl + 1;
  if (pos + hlen > bytes.size()) throw ValidationError("truncated archive header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + pos, bytes.begin() + pos + hlen);
  } catch (const std::exception& e) {
    throw ValidationError("bad archive header in " + path + ": " + e.what());
  }
  pos += hlen;

  Archive a;
  if (header.at("format").get<std::string>() != kMagic)
    throw ValidationError("archive format version mismatch in " + path);
  a.variant = header.at("variant").get<std::string>();
  a.seed = header.at("seed").get<uint64_t>();
  a.step = header.at("step").get<int64_t>();
  auto v = variant_from_name(a.variant);
  if (!v) throw ValidationError("unknown variant '" + a.variant + "' in " + path);
  a.config = config_from_json(header.at("config"), *v);

  const int64_t blob_floats = header.at("blob_floats").get<int64_t>();
  if (pos + static_cast<size_t>(blob_floats) * sizeof(float) != bytes.size())
    throw ValidationError("truncated or oversized archive blob: " + path + " (expected " +
                          std::to_string(blob_floats) + " floats)");
  a.blob.resize(static_cast<size_t>(blob_floats));
  std::memcpy(a.blob.data(), bytes.data() + pos, static_cast<size_t>(blob_floats) * sizeof(float));

  for (auto& e : header.at("entries")) {
    ArchiveEntry ae;
    ae.name = e.at("name").get<std::string>();
    ae.shape = e.at("shape").get<std::vector<int>>();
    ae.offset = e.at("offset").get<int64_t>();
    int64_t n = 1;
    for (int d : ae.shape) n *= d;
    if (ae.offset < 0 || ae.offset + n > blob_floats)
      throw ValidationError("archive entry out of range: " + ae.name);
    a.index[ae.name] = static_cast<int>(a.entries.size());
    a.entries.push_back(std::move(ae));
  }
  return a;
}

template <typename T>
void load_into_store(const Archive& a, nn::ParamStore<T>& store) {
  for (auto& p : store.items()) {
    const ArchiveEntry* e = a.find(p->name);
    if (!e) throw ValidationError("checkpoint missing key: " + p->name);
    if (e->shape != p->var->value.shape)
      throw ValidationError("checkpoint shape mismatch for " + p->name + ": archive " +
                            shape_str(e->shape) + " vs model " + shape_str(p->var->value.shape));
    const float* src = a.blob.data() + e->offset;
    for (int64_t i = 0; i < p->var->value.numel(); ++i)
      p->var->value.data[static_cast<size_t>(i)] = static_cast<T>(src[i]);
  }
}

template <typename T>
std::unique_ptr<Enhancer<T>> load_enhancer(const std::string& path) {
  Archive a = read_archive(path);
  auto v = variant_from_name(a.variant);
  if (*v == Variant::kMg)
    throw ValidationError("checkpoint variant 'mg' is not an enhancer: " + path);
  auto model = std::make_unique<Enhancer<T>>(a.config, a.seed);
  load_into_store(a, model->store());
  return model;
}

template <typename T>
std::unique_ptr<MgModel<T>> load_mg(const std::string& path) {
  Archive a = read_archive(path);
  if (a.variant != "mg")
    throw ValidationError("checkpoint variant '" + a.variant + "' is not an mg network: " + path);
  auto model = std::make_unique<MgModel<T>>(a.config.block, a.seed);
  load_into_store(a, model->store());
  return model;
}

template <typename T>
void save_enhancer(const std::string& path, const Enhancer<T>& model, int64_t step,
                   const ExtraRasters& extra) {
  save_checkpoint(path, model.store(), model.variant(), model.seed(), step, model.config(), extra);
}

template <typename T>
void save_mg(const std::string& path, const MgModel<T>& model, int64_t step,
             const ExtraRasters& extra) {
  ModelConfig cfg;
  cfg.variant = Variant::kMg;
  cfg.block = model.block_config();
  save_checkpoint(path, model.store(), Variant::kMg, model.seed(), step, cfg, extra);
}

#define MLFG_INSTANTIATE_CKPT(T)                                                              \
  template void save_checkpoint<T>(const std::string&, const nn::ParamStore<T>&, Variant,    \
                                   uint64_t, int64_t, const ModelConfig&, const ExtraRasters&); \
  template void load_into_store<T>(const Archive&, nn::ParamStore<T>&);                       \
  template std::unique_ptr<Enhancer<T>> load_enhancer<T>(const std::string&);                 \
  template std::unique_ptr<MgModel<T>> load_mg<T>(const std::string&);                        \
  template void save_enhancer<T>(const std::string&, const Enhancer<T>&, int64_t,             \
                                 const ExtraRasters&);                                        \
  template void save_mg<T>(const std::string&, const MgModel<T>&, int64_t, const ExtraRasters&);

MLFG_INSTANTIATE_CKPT(float)
MLFG_INSTANTIATE_CKPT(double)

}  // namespace mlfg::models
