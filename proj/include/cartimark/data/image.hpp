/*
 *  Copyright 2026 The Cartimark Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cartimark/core/error.hpp"

namespace cartimark {

/// Decoded raster with samples scaled to [0, 1], interleaved by channel.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<float> pixels;

  float at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  /// Luminance in [0, 1] (identity for grayscale).
  float gray(int x, int y) const {
    if (channels == 1) return at(x, y);
    return 0.299f * at(x, y, 0) + 0.587f * at(x, y, 1) + 0.114f * at(x, y, 2);
  }
};

struct PngHeader {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
};

namespace png_detail {

struct File {
  std::FILE* fp = nullptr;
  ~File() {
    if (fp) std::fclose(fp);
  }
};

[[noreturn]] inline void on_error(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

inline void on_warning(png_structp, png_const_charp) {}

}  // namespace png_detail

/// Reads a PNG, expanding palettes and dropping alpha. Output channels are 1
/// (gray) or 3 (RGB); bit depth is 8 or 16.
inline Image read_png(const std::filesystem::path& path) {
  png_detail::File file{std::fopen(path.c_str(), "rb")};
  if (!file.fp) throw Error("unreadable_image", "cannot open " + path.string());

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message,
                                           png_detail::on_error, png_detail::on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("unreadable_image", "libpng initialisation failed");
  }

  Image image;
  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("unreadable_image", path.string() + ": " + message);
  }

  png_init_io(png, file.fp);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  image.bit_depth = depth;

  const std::size_t stride = png_get_rowbytes(png, info);
  raw.resize(stride * static_cast<std::size_t>(image.height));
  rows.resize(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = static_cast<std::size_t>(image.width) * image.height * image.channels;
  image.pixels.resize(count);
  if (depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
      image.pixels[i] = static_cast<float>(v) / 65535.0f;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) image.pixels[i] = static_cast<float>(raw[i]) / 255.0f;
  }
  if (image.channels != 1 && image.channels != 3) {
    throw Error("unreadable_image", path.string() + ": unsupported channel count");
  }
  return image;
}

/// Reads only the header; throws "unreadable_image" when the file is not a PNG.
inline PngHeader read_png_header(const std::filesystem::path& path) {
  png_detail::File file{std::fopen(path.c_str(), "rb")};
  if (!file.fp) throw Error("unreadable_image", "cannot open " + path.string());
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message,
                                           png_detail::on_error, png_detail::on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("unreadable_image", "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("unreadable_image", path.string() + ": " + message);
  }
  png_init_io(png, file.fp);
  png_read_info(png, info);
  PngHeader header;
  header.width = static_cast<int>(png_get_image_width(png, info));
  header.height = static_cast<int>(png_get_image_height(png, info));
  const auto color = png_get_color_type(png, info);
  header.channels = (color & PNG_COLOR_MASK_COLOR) ? 3 : 1;
  header.bit_depth = png_get_bit_depth(png, info) == 16 ? 16 : 8;
  png_destroy_read_struct(&png, &info, nullptr);
  return header;
}

/// Encodes 1- or 3-channel images at 8 or 16 bits. No time or text chunks are
/// written, so identical pixels give identical bytes.
inline void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw Error("io_error", "PNG writer supports 1 or 3 channels");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".partial";
  {
    png_detail::File file{std::fopen(tmp.c_str(), "wb")};
    if (!file.fp) throw Error("io_error", "cannot write " + tmp.string());
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message,
                                              png_detail::on_error, png_detail::on_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      png_destroy_write_struct(&png, &info);
      throw Error("io_error", "libpng initialisation failed");
    }
    const int depth = image.bit_depth == 16 ? 16 : 8;
    const std::size_t per_row = static_cast<std::size_t>(image.width) * image.channels;
    std::vector<png_byte> row(per_row * (depth / 8));
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw Error("io_error", tmp.string() + ": " + message);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), depth,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
      const float* src = image.pixels.data() + per_row * y;
      for (std::size_t i = 0; i < per_row; ++i) {
        const float v = src[i] < 0.0f ? 0.0f : (src[i] > 1.0f ? 1.0f : src[i]);
        if (depth == 16) {
          const auto q = static_cast<std::uint16_t>(v * 65535.0f + 0.5f);
          row[2 * i] = static_cast<png_byte>(q >> 8);
          row[2 * i + 1] = static_cast<png_byte>(q & 0xFF);
        } else {
          row[i] = static_cast<png_byte>(v * 255.0f + 0.5f);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cartimark
