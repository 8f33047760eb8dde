#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mlfg::io {

// Flat `key = value` config: one pair per line, '#' starts a comment,
// dotted keys namespace the sections (trainer.batch_size, degrade.blur_lo).
// Consumers declare the keys they understand; anything else is a hard error.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);

  // "key=value" override, applied after the file parse.
  void apply_override(const std::string& kv);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_num(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws ValidationError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace mlfg::io
