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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "oddforge/error.hpp"
#include "oddforge/registry.hpp"

namespace oddforge {

/// Row-major grid of category ids (or the registry's ignore id).
class SemanticMask {
 public:
  SemanticMask() = default;
  SemanticMask(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw DataError("mask: dimensions must be at least 1x1");
    labels_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  SemanticMask(int width, int height, std::vector<std::uint8_t> labels)
      : width_(width), height_(height), labels_(std::move(labels)) {
    if (width < 1 || height < 1)
      throw DataError("mask: dimensions must be at least 1x1");
    if (labels_.size() != static_cast<std::size_t>(width) * height)
      throw DataError("mask: label count does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  std::uint8_t operator()(int x, int y) const { return labels_[index(x, y)]; }
  std::uint8_t& operator()(int x, int y) { return labels_[index(x, y)]; }
  std::uint8_t operator[](std::size_t i) const { return labels_[i]; }
  std::uint8_t& operator[](std::size_t i) { return labels_[i]; }

  const std::vector<std::uint8_t>& labels() const { return labels_; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  /// Throws naming the first offending pixel when a label is unregistered.
  void validate(const CategoryRegistry& registry, const std::string& origin = "mask") const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!registry.is_valid_label(labels_[i])) {
        throw DataError(origin + ": unregistered label " + std::to_string(labels_[i]) +
                        " at pixel (" + std::to_string(i % width_) + "," +
                        std::to_string(i / width_) + ")");
      }
    }
  }

  friend bool operator==(const SemanticMask&, const SemanticMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> labels_;
};

/// Interleaved RGB image with samples in [0,1].
class SceneImage {
 public:
  static constexpr int kChannels = 3;

  SceneImage() = default;
  SceneImage(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw DataError("image: dimensions must be at least 1x1");
    samples_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double at(std::size_t pixel, int channel) const { return samples_[pixel * kChannels + channel]; }
  double& at(std::size_t pixel, int channel) { return samples_[pixel * kChannels + channel]; }
  double operator()(int x, int y, int c) const {
    return at(static_cast<std::size_t>(y) * width_ + x, c);
  }
  double& operator()(int x, int y, int c) {
    return at(static_cast<std::size_t>(y) * width_ + x, c);
  }

  const std::vector<double>& samples() const { return samples_; }

  void validate(const std::string& origin = "image") const {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      double v = samples_[i];
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw DataError(origin + ": sample out of [0,1] at pixel " +
                        std::to_string(i / kChannels));
    }
  }

  friend bool operator==(const SceneImage&, const SceneImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> samples_;
};

/// Clamp to [0,1], scale to 255 and round half away from zero.
inline std::uint8_t quantize_sample(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace oddforge
