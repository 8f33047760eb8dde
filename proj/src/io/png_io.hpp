#pragma once

#include <string>

#include "synth/types.hpp"

namespace mlfg::io {

// 8-bit grayscale PNG. Values quantize as round(255*v) with round-half-up;
// reads map back to v/255. Writes are atomic (temp file + rename).
void write_gray_png(const std::string& path, const synth::Image& img);
synth::Image read_gray_png(const std::string& path);

// 8-bit RGB, one [0,1] raster per channel.
void write_rgb_png(const std::string& path, const synth::Image& r, const synth::Image& g,
                   const synth::Image& b);

}  // namespace mlfg::io
