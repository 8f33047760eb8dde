#include "io/png_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <ostream>
#include <vector>

#include "core/errors.hpp"
#include "io/fsutil.hpp"

namespace mlfg::io {

namespace {

void png_ostream_write(png_structp png, png_bytep data, png_size_t len) {
  auto* os = static_cast<std::ostream*>(png_get_io_ptr(png));
  os->write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void png_ostream_flush(png_structp png) {
  static_cast<std::ostream*>(png_get_io_ptr(png))->flush();
}

}  // namespace

void write_gray_png(const std::string& path, const synth::Image& img) {
  if (img.h <= 0 || img.w <= 0) throw ValidationError("write_gray_png: empty image");
  std::vector<unsigned char> bytes(static_cast<size_t>(img.h) * img.w);
  for (int64_t i = 0; i < img.size(); ++i) {
    const float v = std::min(1.f, std::max(0.f, img.v[static_cast<size_t>(i)]));
    bytes[static_cast<size_t>(i)] = static_cast<unsigned char>(std::floor(v * 255.f + 0.5f));
  }

  write_file_atomic(path, [&](std::ostream& os) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw IoError("libpng: create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw IoError("libpng: write failed for " + path);
    }
    png_set_write_fn(png, &os, png_ostream_write, png_ostream_flush);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(img.h));
    for (int y = 0; y < img.h; ++y) rows[static_cast<size_t>(y)] = bytes.data() + static_cast<size_t>(y) * img.w;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  });
}

void write_rgb_png(const std::string& path, const synth::Image& r, const synth::Image& g,
                   const synth::Image& b) {
  if (r.h != g.h || r.h != b.h || r.w != g.w || r.w != b.w)
    throw ValidationError("write_rgb_png: channel shape mismatch");
  const int h = r.h, w = r.w;
  std::vector<unsigned char> bytes(static_cast<size_t>(h) * w * 3);
  auto q = [](float v) {
    v = std::min(1.f, std::max(0.f, v));
    return static_cast<unsigned char>(std::floor(v * 255.f + 0.5f));
  };
  for (int64_t i = 0; i < r.size(); ++i) {
    bytes[static_cast<size_t>(i) * 3 + 0] = q(r.v[static_cast<size_t>(i)]);
    bytes[static_cast<size_t>(i) * 3 + 1] = q(g.v[static_cast<size_t>(i)]);
    bytes[static_cast<size_t>(i) * 3 + 2] = q(b.v[static_cast<size_t>(i)]);
  }
  write_file_atomic(path, [&](std::ostream& os) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw IoError("libpng: create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw IoError("libpng: write failed for " + path);
    }
    png_set_write_fn(png, &os, png_ostream_write, png_ostream_flush);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
      rows[static_cast<size_t>(y)] = bytes.data() + static_cast<size_t>(y) * w * 3;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  });
}

synth::Image read_gray_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    std::fclose(fp);
    throw IoError("libpng: init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("not a readable PNG: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  // Normalize whatever comes in to 8-bit gray.
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  const int h = static_cast<int>(png_get_image_height(png, info));
  const int w = static_cast<int>(png_get_image_width(png, info));
  std::vector<unsigned char> bytes(static_cast<size_t>(h) * w);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = bytes.data() + static_cast<size_t>(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  synth::Image img(h, w);
  for (int64_t i = 0; i < img.size(); ++i) img.v[static_cast<size_t>(i)] = bytes[static_cast<size_t>(i)] / 255.f;
  return img;
}

}  // namespace mlfg::io
