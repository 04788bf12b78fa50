// Copyright 2026 The tvseg Authors
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

// 8-bit PNG (via libpng's simplified API) and binary PGM/PPM reading and
// writing. Nothing else is needed by the manifests.

#include <png.h>

#include <cstdint>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tvseg/error.hpp"
#include "tvseg/image.hpp"

namespace tvseg {

struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

namespace detail {

inline std::string lower_ext(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

inline RawImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path.string());
  const auto magic = pnm_token(in);
  if (magic != "P5" && magic != "P6") throw DecodeError(path.string() + ": not a binary PGM/PPM");
  RawImage img;
  try {
    img.width = std::stoi(pnm_token(in));
    img.height = std::stoi(pnm_token(in));
    const int maxval = std::stoi(pnm_token(in));
    if (maxval != 255) throw DecodeError(path.string() + ": only 8-bit PNM is supported");
  } catch (const std::logic_error&) {
    throw DecodeError(path.string() + ": malformed PNM header");
  }
  if (img.width <= 0 || img.height <= 0) throw DecodeError(path.string() + ": bad dimensions");
  img.channels = magic == "P5" ? 1 : 3;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw DecodeError(path.string() + ": truncated pixel data");
  }
  return img;
}

inline RawImage read_png(const std::filesystem::path& path, bool force_gray) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw DecodeError(path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0 && !force_gray;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  RawImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError(path.string() + ": " + msg);
  }
  return out;
}

inline RawImage to_gray(RawImage img) {
  if (img.channels == 1) return img;
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const auto* p = &img.pixels[i * 3];
    gray[i] = static_cast<std::uint8_t>((299u * p[0] + 587u * p[1] + 114u * p[2] + 500u) / 1000u);
  }
  img.pixels = std::move(gray);
  img.channels = 1;
  return img;
}

}  // namespace detail

// Reads a PNG or binary PGM/PPM file as gray or RGB 8-bit pixels.
inline RawImage read_raw_image(const std::filesystem::path& path, bool force_gray = false) {
  const auto ext = detail::lower_ext(path);
  RawImage img = (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
                     ? detail::read_pnm(path)
                     : detail::read_png(path, force_gray);
  return force_gray ? detail::to_gray(std::move(img)) : img;
}

inline ImagePayload read_image(const std::filesystem::path& path, std::string source_id = {}) {
  auto raw = read_raw_image(path);
  return ImagePayload(raw.width, raw.height, raw.channels, std::move(raw.pixels),
                      std::move(source_id));
}

// Mask files are read as gray and binarized at >= 128.
inline BinaryMask read_mask(const std::filesystem::path& path) {
  auto raw = read_raw_image(path, /*force_gray=*/true);
  for (auto& p : raw.pixels) p = p >= 128 ? 1 : 0;
  return BinaryMask(raw.width, raw.height, std::move(raw.pixels));
}

inline void write_image(const std::filesystem::path& path, int width, int height, int channels,
                        const std::vector<std::uint8_t>& pixels) {
  const auto ext = detail::lower_ext(path);
  if (ext == ".pgm" || ext == ".ppm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << (channels == 1 ? "P5" : "P6") << '\n' << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw Error("cannot write " + path.string());
    return;
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error("cannot write " + path.string() + ": " + image.message);
  }
}

inline void write_image(const std::filesystem::path& path, const ImagePayload& img) {
  write_image(path, img.width(), img.height(), img.channels(), img.pixels());
}

// Foreground is written as 255, background as 0.
inline void write_mask(const std::filesystem::path& path, const BinaryMask& m) {
  std::vector<std::uint8_t> px(m.bits().begin(), m.bits().end());
  for (auto& p : px) p = p ? 255 : 0;
  write_image(path, m.width(), m.height(), 1, px);
}

}  // namespace tvseg
