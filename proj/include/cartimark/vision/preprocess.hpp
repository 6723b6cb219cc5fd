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
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/data/image.hpp"
#include "cartimark/vision/tensor.hpp"

namespace cartimark {

/// Aspect-preserving fit of a width x height image into a square canvas.
struct Letterbox {
  double scale = 1;
  int content_width = 0;
  int content_height = 0;
  int offset_x = 0;
  int offset_y = 0;
  int size = 0;
};

inline Letterbox letterbox(int width, int height, int size) {
  if (width <= 0 || height <= 0 || size <= 0) throw Error("invalid_geometry", "image and canvas must be non-empty");
  Letterbox lb;
  lb.size = size;
  lb.scale = static_cast<double>(size) / std::max(width, height);
  lb.content_width = std::clamp(static_cast<int>(std::lround(width * lb.scale)), 1, size);
  lb.content_height = std::clamp(static_cast<int>(std::lround(height * lb.scale)), 1, size);
  lb.offset_x = (size - lb.content_width) / 2;
  lb.offset_y = (size - lb.content_height) / 2;
  return lb;
}

/// Input convention recorded with each model: letterbox to input_size, gray
/// replicated to `channels`, intensities mapped from [0, 1] to [-1, 1].
struct Preprocessing {
  int input_size = 32;
  int channels = 1;
  std::string resize = "letterbox-bilinear";
  std::string normalization = "symmetric";  // x * 2 - 1
  double pad_value = -1.0;
};

inline nlohmann::json to_json(const Preprocessing& p) {
  return {{"input_size", p.input_size},
          {"channels", p.channels},
          {"resize", p.resize},
          {"normalization", p.normalization},
          {"pad_value", p.pad_value}};
}

inline Preprocessing preprocessing_from_json(const nlohmann::json& j) {
  Preprocessing p;
  p.input_size = j.at("input_size").get<int>();
  p.channels = j.at("channels").get<int>();
  p.resize = j.value("resize", p.resize);
  p.normalization = j.value("normalization", p.normalization);
  p.pad_value = j.value("pad_value", p.pad_value);
  return p;
}

namespace preprocess_detail {

inline double sample_bilinear(const Image& image, double sx, double sy) {
  sx = std::clamp(sx, 0.0, static_cast<double>(image.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(image.height - 1));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = sx - x0, fy = sy - y0;
  const double top = image.gray(x0, y0) * (1 - fx) + image.gray(x1, y0) * fx;
  const double bottom = image.gray(x0, y1) * (1 - fx) + image.gray(x1, y1) * fx;
  return top * (1 - fy) + bottom * fy;
}

}  // namespace preprocess_detail

inline Tensor preprocess(const Image& image, const Preprocessing& p) {
  if (image.width <= 0 || image.height <= 0) throw Error("invalid_geometry", "empty image");
  const Letterbox lb = letterbox(image.width, image.height, p.input_size);
  Tensor t(p.channels, p.input_size, p.input_size, p.pad_value);
  for (int y = 0; y < lb.content_height; ++y) {
    for (int x = 0; x < lb.content_width; ++x) {
      const double sx = (x + 0.5) / lb.scale - 0.5;
      const double sy = (y + 0.5) / lb.scale - 0.5;
      const double v = preprocess_detail::sample_bilinear(image, sx, sy) * 2.0 - 1.0;
      for (int c = 0; c < p.channels; ++c) t.at(c, y + lb.offset_y, x + lb.offset_x) = v;
    }
  }
  return t;
}

}  // namespace cartimark
