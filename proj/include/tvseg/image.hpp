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

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tvseg/error.hpp"
#include "tvseg/geom.hpp"

namespace tvseg {

// An 8-bit image as it travels to a backend. The pipeline moves pixels; it
// never computes features from them.
class ImagePayload {
 public:
  ImagePayload(int width, int height, int channels, std::vector<std::uint8_t> pixels,
               std::string source_id = {})
      : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)),
        source_id_(std::move(source_id)) {
    if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw InvalidArgument("image must have 1 or 3 channels");
    const auto expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                          static_cast<std::size_t>(channels);
    if (pixels_.size() != expected) {
      throw ShapeError("image has " + std::to_string(pixels_.size()) + " bytes, expected " +
                       std::to_string(expected));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
  const std::string& source_id() const noexcept { return source_id_; }

  // Luma for RGB (integer BT.601 weights), the raw byte for grayscale.
  std::uint8_t intensity(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * channels_;
    if (channels_ == 1) return pixels_[i];
    return static_cast<std::uint8_t>(
        (299u * pixels_[i] + 587u * pixels_[i + 1] + 114u * pixels_[i + 2] + 500u) / 1000u);
  }

  bool matches(const BinaryMask& m) const noexcept {
    return m.width() == width_ && m.height() == height_;
  }

  friend bool operator==(const ImagePayload&, const ImagePayload&) = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<std::uint8_t> pixels_;
  std::string source_id_;
};

// Foreground wherever intensity >= threshold.
inline BinaryMask threshold_mask(const ImagePayload& img, int threshold) {
  BinaryMask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (img.intensity(x, y) >= threshold) m.set(x, y);
    }
  }
  return m;
}

}  // namespace tvseg
