#pragma once

#include <stdexcept>
#include <string>

namespace mlfg {

// Error taxonomy mirrored by the C API status codes: validation errors map
// to MLFG_ERR_VALIDATION / exit 1, I/O errors to MLFG_ERR_IO / exit 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// Violated internal precondition (e.g. guidance loss on an unfrozen MG).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace mlfg
