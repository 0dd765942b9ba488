// Copyright 2026 The OddForge Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <cstdint>
#include <string>
#include <vector>

#include "oddforge/error.hpp"
#include "oddforge/fsutil.hpp"
#include "oddforge/image.hpp"

namespace oddforge {

namespace detail {

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

inline std::vector<std::uint8_t> read_png_pixels(const std::string& path, png_uint_32 want_format,
                                                 const char* want_desc, int& width, int& height) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str()))
    throw DataError(path + ": unreadable PNG (" + png.image.message + ")");
  png_uint_32 file_format = png.image.format;
  if ((file_format & ~PNG_FORMAT_FLAG_COLORMAP) != want_format) {
    throw DataError(path + ": expected " + want_desc + " PNG");
  }
  png.image.format = want_format;
  width = static_cast<int>(png.image.width);
  height = static_cast<int>(png.image.height);
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, buf.data(), 0, nullptr))
    throw DataError(path + ": corrupt PNG (" + png.image.message + ")");
  return buf;
}

inline std::string encode_png(const std::uint8_t* pixels, int width, int height,
                              png_uint_32 format) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, pixels, 0, nullptr))
    throw StoreError(std::string("png encode: ") + png.image.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, pixels, 0, nullptr))
    throw StoreError(std::string("png encode: ") + png.image.message);
  out.resize(size);
  return out;
}

}  // namespace detail

/// Loads an 8-bit RGB PNG; samples are mapped to [0,1] by v/255.
inline SceneImage read_png_rgb(const std::string& path) {
  int w = 0, h = 0;
  auto buf = detail::read_png_pixels(path, PNG_FORMAT_RGB, "8-bit RGB", w, h);
  SceneImage img(w, h);
  for (std::size_t i = 0; i < buf.size(); ++i)
    img.at(i / 3, static_cast<int>(i % 3)) = buf[i] / 255.0;
  return img;
}

/// Loads an 8-bit single-channel PNG as raw label values.
inline SemanticMask read_png_mask(const std::string& path) {
  int w = 0, h = 0;
  auto buf = detail::read_png_pixels(path, PNG_FORMAT_GRAY, "8-bit grayscale", w, h);
  return SemanticMask(w, h, std::move(buf));
}

/// Loads an 8-bit RGB PNG without conversion.
inline std::vector<std::uint8_t> read_png_rgb8(const std::string& path, int& width, int& height) {
  return detail::read_png_pixels(path, PNG_FORMAT_RGB, "8-bit RGB", width, height);
}

inline std::vector<std::uint8_t> to_rgb8(const SceneImage& image) {
  std::vector<std::uint8_t> px(image.samples().size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = quantize_sample(image.samples()[i]);
  return px;
}

inline std::string encode_png_rgb8(const std::vector<std::uint8_t>& rgb, int width, int height) {
  return detail::encode_png(rgb.data(), width, height, PNG_FORMAT_RGB);
}

inline std::string encode_png_rgb(const SceneImage& image) {
  return encode_png_rgb8(to_rgb8(image), image.width(), image.height());
}

inline std::string encode_png_mask(const SemanticMask& mask) {
  return detail::encode_png(mask.labels().data(), mask.width(), mask.height(), PNG_FORMAT_GRAY);
}

inline void write_png_rgb(const std::string& path, const SceneImage& image) {
  write_file_atomic(path, encode_png_rgb(image));
}

inline void write_png_mask(const std::string& path, const SemanticMask& mask) {
  write_file_atomic(path, encode_png_mask(mask));
}

}  // namespace oddforge
