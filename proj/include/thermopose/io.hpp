#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include <json.hpp>

#include "thermopose/common.hpp"

namespace thermopose {

struct Png16 {
  int h = 0;
  int w = 0;
  std::vector<uint16_t> v;  // row-major
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

/// Reads a 16-bit grayscale PNG. 8-bit files are widened to 16-bit.
inline Png16 read_png16_gray(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open PNG: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("malformed PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  const int color = png_get_color_type(png, info);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_bit_depth(png, info) < 16) png_set_expand_16(png);
  png_set_swap(png);  // PNG stores 16-bit big-endian
  png_read_update_info(png, info);

  Png16 out;
  out.h = int(png_get_image_height(png, info));
  out.w = int(png_get_image_width(png, info));
  out.v.resize(size_t(out.h) * out.w);
  std::vector<png_bytep> rows(out.h);
  for (int y = 0; y < out.h; ++y)
    rows[y] = reinterpret_cast<png_bytep>(out.v.data() + size_t(y) * out.w);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

inline void write_png16_gray(const std::string& path, const uint16_t* data, int h, int w) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write PNG: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = reinterpret_cast<png_bytep>(const_cast<uint16_t*>(data + size_t(y) * w));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// 8-bit RGB writer for overlays and plots. `rgb` is h*w*3 bytes.
inline void write_png8_rgb(const std::string& path, const uint8_t* rgb, int h, int w) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write PNG: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(rgb + size_t(y) * w * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline uint16_t intensity_to_u16(float v) {
  return uint16_t(std::lround(clamp(v, 0.f, 1.f) * 65535.0));
}

inline float u16_to_intensity(uint16_t v) { return float(v) / 65535.f; }

inline void write_frame_png(const std::string& path, const Image2D& img) {
  std::vector<uint16_t> raw(img.v.size());
  for (size_t i = 0; i < img.v.size(); ++i) raw[i] = intensity_to_u16(img.v[i]);
  write_png16_gray(path, raw.data(), img.h, img.w);
}

inline Image2D read_frame_png(const std::string& path) {
  Png16 p = read_png16_gray(path);
  Image2D img(p.h, p.w);
  for (size_t i = 0; i < p.v.size(); ++i) img.v[i] = u16_to_intensity(p.v[i]);
  return img;
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const nlohmann::json& j, int indent = 2) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  out << j.dump(indent) << "\n";
}

inline void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace thermopose
