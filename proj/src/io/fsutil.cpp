#include "io/fsutil.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "core/errors.hpp"

namespace fs = std::filesystem;

namespace mlfg::io {

void write_file_atomic(const std::string& path, const std::function<void(std::ostream&)>& writer) {
  fs::path target(path);
  fs::path dir = target.parent_path();
  if (dir.empty()) dir = ".";
  const std::string tmp =
      (dir / (target.filename().string() + ".tmp." + std::to_string(::getpid()))).string();
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + tmp);
    try {
      writer(os);
    } catch (...) {
      os.close();
      std::remove(tmp.c_str());
      throw;
    }
    os.flush();
    if (!os) {
      os.close();
      std::remove(tmp.c_str());
      throw IoError("write failed: " + tmp);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("rename failed: " + tmp + " -> " + path + " (" + ec.message() + ")");
  }
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  is.seekg(0, std::ios::end);
  const std::streamoff len = is.tellg();
  is.seekg(0, std::ios::beg);
  std::vector<unsigned char> buf(static_cast<size_t>(len));
  if (len > 0) is.read(reinterpret_cast<char*>(buf.data()), len);
  if (!is) throw IoError("read failed: " + path);
  return buf;
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory: " + path + " (" + ec.message() + ")");
}

}  // namespace mlfg::io
