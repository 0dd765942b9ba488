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

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "oddforge/error.hpp"
#include "oddforge/image.hpp"
#include "oddforge/kmeans.hpp"
#include "oddforge/scene.hpp"
#include "oddforge/style.hpp"

namespace oddforge {

struct RenderParams {
  std::uint64_t noise_seed = 0;
};

/// Unit-variance uniform noise on [-sqrt(3), sqrt(3)) derived from a chain of
/// SplitMix64 mixes over (seed, region_id, x, y, channel). Integer-only up to
/// the final scaling, so identical on every IEEE-754 platform.
inline double render_noise(std::uint64_t seed, int region_id, int x, int y, int channel) {
  using kmeans::splitmix64;
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(region_id)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(channel));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0,1)
  constexpr double kSqrt3 = 1.7320508075688772;
  return (2.0 * u - 1.0) * kSqrt3;
}

/// Synthesizes an image whose region layout is exactly `mask`'s: each pixel
/// of region r gets clamp(mean_c + std_c * noise). Ignore pixels are black.
inline SceneImage render(const SemanticMask& mask, const std::vector<InstanceRegion>& regions,
                         const StyleAssignment& styles, const RenderParams& params) {
  SceneImage out(mask.width(), mask.height(), 0.0);
  const std::size_t n = mask.size();
  for (const auto& r : regions) {
    auto it = styles.find(r.region_id);
    if (it == styles.end())
      throw DataError("render: no style for region " + std::to_string(r.region_id));
    const StyleVector& s = it->second;
    if (s.dim() != kStyleDim)
      throw DataError("render: style for region " + std::to_string(r.region_id) + " has dimension " +
                      std::to_string(s.dim()) + ", expected " + std::to_string(kStyleDim));
    for (auto p : r.pixels) {
      if (p >= n) throw DataError("render: region " + std::to_string(r.region_id) +
                                  " exceeds the mask dimensions");
      if (mask[p] != r.category_id)
        throw DataError("render: region " + std::to_string(r.region_id) +
                        " does not match the mask");
      int x = static_cast<int>(p % mask.width()), y = static_cast<int>(p / mask.width());
      for (int c = 0; c < 3; ++c) {
        double v = s.mean(c);
        if (s.stddev(c) != 0.0) v += s.stddev(c) * render_noise(params.noise_seed, r.region_id, x, y, c);
        out.at(p, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

inline SceneImage render(const Scene& scene, const StyleAssignment& styles,
                         const RenderParams& params) {
  return render(scene.mask, scene.regions, styles, params);
}

/// Interpolation weights i/(steps-1), i = 0..steps-1.
inline std::vector<double> transition_lambdas(int steps) {
  if (steps < 2) throw DataError("transition: steps must be at least 2");
  std::vector<double> out(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) out[i] = static_cast<double>(i) / (steps - 1);
  out.back() = 1.0;
  return out;
}

inline std::vector<SceneImage> render_transition(const Scene& scene, const StyleAssignment& a,
                                                 const StyleAssignment& b, int steps,
                                                 const RenderParams& params) {
  std::vector<SceneImage> frames;
  for (double lambda : transition_lambdas(steps))
    frames.push_back(render(scene, interpolate_assignment(a, b, lambda), params));
  return frames;
}

}  // namespace oddforge
