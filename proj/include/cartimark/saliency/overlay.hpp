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

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>

#include "cartimark/core/error.hpp"
#include "cartimark/data/image.hpp"
#include "cartimark/saliency/saliency.hpp"
#include "cartimark/vision/preprocess.hpp"

namespace cartimark {

using Rgb = std::array<double, 3>;

/// Colormap lookup for v in [0, 1]: 0 is blue, 1 is red.
inline Rgb colormap(const std::string& name, double v) {
  v = std::clamp(v, 0.0, 1.0);
  const auto c = [](double x) { return std::clamp(x, 0.0, 1.0); };
  if (name == "jet") return {c(1.5 - std::abs(4 * v - 3)), c(1.5 - std::abs(4 * v - 2)), c(1.5 - std::abs(4 * v - 1))};
  if (name == "bluered") return {v, 0.0, 1.0 - v};
  throw Error("unknown_colormap", "unknown colormap '" + name + "'");
}

/// Samples the map (defined on the letterboxed model input) at every pixel
/// of the original image by bilinear interpolation.
inline double sample_map(const SaliencyMap& map, const Letterbox& lb, int x, int y) {
  double px = lb.offset_x + (x + 0.5) * lb.scale - 0.5;
  double py = lb.offset_y + (y + 0.5) * lb.scale - 0.5;
  px = std::clamp(px, 0.0, static_cast<double>(map.width - 1));
  py = std::clamp(py, 0.0, static_cast<double>(map.height - 1));
  const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
  const int x1 = std::min(x0 + 1, map.width - 1), y1 = std::min(y0 + 1, map.height - 1);
  const double fx = px - x0, fy = py - y0;
  return (map.at(y0, x0) * (1 - fx) + map.at(y0, x1) * fx) * (1 - fy) +
         (map.at(y1, x0) * (1 - fx) + map.at(y1, x1) * fx) * fy;
}

/// Blends the colormapped saliency over the grayscale base image.
inline Image blend_overlay(const Image& base, const SaliencyMap& map, const std::string& colormap_name, double alpha = 0.5) {
  if (map.width <= 0 || map.height <= 0) throw Error("invalid_geometry", "empty saliency map");
  colormap(colormap_name, 0.0);
  const Letterbox lb = letterbox(base.width, base.height, map.width);
  Image out;
  out.width = base.width;
  out.height = base.height;
  out.channels = 3;
  out.bit_depth = 8;
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int y = 0; y < base.height; ++y) {
    for (int x = 0; x < base.width; ++x) {
      const double g = base.gray(x, y);
      const Rgb color = colormap(colormap_name, sample_map(map, lb, x, y));
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>((1 - alpha) * g + alpha * color[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

inline void render_overlay(const ImageRef& image, const SaliencyMap& map, const std::string& colormap_name,
                           const std::filesystem::path& out_path, double alpha = 0.5) {
  write_png(out_path, blend_overlay(read_png(image.uri), map, colormap_name, alpha));
}

}  // namespace cartimark
