#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mlfg::io {

// Writes via a temp file in the same directory plus an atomic rename, so a
// crash mid-write never leaves a partial file at `path`. The writer callback
// receives a binary ostream; any exception it throws removes the temp file
// and is rethrown.
void write_file_atomic(const std::string& path, const std::function<void(std::ostream&)>& writer);

std::vector<unsigned char> read_file_bytes(const std::string& path);

bool file_exists(const std::string& path);

void ensure_dir(const std::string& path);  // mkdir -p

}  // namespace mlfg::io
