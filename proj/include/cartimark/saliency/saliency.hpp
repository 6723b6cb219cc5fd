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
#include <concepts>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/data/types.hpp"
#include "cartimark/fusion/fusion.hpp"
#include "cartimark/vision/model.hpp"
#include "cartimark/vision/tensor.hpp"

namespace cartimark {

using ViewInputs = std::map<View, Tensor>;

struct ScoreGradient {
  double score = 0;
  std::map<View, Tensor> gradients;  // d(score)/d(preprocessed input), per view
};

/// Anything that yields a defect score and its input gradient per view.
template <typename M>
concept GradientScorer = requires(const M& m, const ViewInputs& inputs) {
  { m.views() } -> std::convertible_to<std::vector<View>>;
  { m.score_with_gradient(inputs) } -> std::same_as<ScoreGradient>;
};

struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major, in [0, 1]
  View view = View::sagittal;
  std::string model_id;
  std::string patient_id;

  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr const char* kSaliencyMethod = "input-gradient";

/// Single-view classifier: score = sigmoid output.
class SingleViewScorer {
 public:
  explicit SingleViewScorer(const ModelArtifact& artifact) : artifact_(artifact) {
    if (!artifact.net->backbone().differentiable()) {
      throw Error("not_differentiable", "backbone '" + artifact.backbone.name + "' does not expose input gradients");
    }
  }

  std::vector<View> views() const { return {artifact_.view}; }

  ScoreGradient score_with_gradient(const ViewInputs& inputs) const {
    auto [score, grad] = artifact_.net->score_with_gradient(inputs.at(artifact_.view));
    ScoreGradient out;
    out.score = score;
    out.gradients.emplace(artifact_.view, std::move(grad));
    return out;
  }

 private:
  const ModelArtifact& artifact_;
};

/// Fused model: score = SVM margin composed with both backbones.
class FusionScorer {
 public:
  explicit FusionScorer(const FusionModel& model) : model_(model) {
    for (View v : kViews) {
      if (!model.model(v).net->backbone().differentiable()) {
        throw Error("not_differentiable", "backbone '" + model.model(v).backbone.name + "' does not expose input gradients");
      }
    }
  }

  std::vector<View> views() const { return {View::sagittal, View::coronal}; }

  ScoreGradient score_with_gradient(const ViewInputs& inputs) const {
    const auto coeff = svm_input_gradient(model_.svm);
    ScoreGradient out;
    std::vector<double> x;
    if (model_.mode == FusionMode::feature) {
      std::size_t offset = 0;
      for (View v : kViews) {
        const auto& net = *model_.model(v).net;
        const std::size_t d = net.feature_dim();
        std::vector<double> df(coeff.begin() + static_cast<std::ptrdiff_t>(offset),
                               coeff.begin() + static_cast<std::ptrdiff_t>(offset + d));
        auto [f, grad] = net.features_with_gradient(inputs.at(v), df);
        x.insert(x.end(), f.begin(), f.end());
        out.gradients.emplace(v, std::move(grad));
        offset += d;
      }
    } else {
      std::size_t k = 0;
      for (View v : kViews) {
        auto [s, grad] = model_.model(v).net->score_with_gradient(inputs.at(v));
        for (auto& g : grad.values) g *= coeff[k];
        x.push_back(s);
        out.gradients.emplace(v, std::move(grad));
        ++k;
      }
    }
    out.score = svm_decision(model_.svm, x);
    return out;
  }

 private:
  const FusionModel& model_;
};

/// Channel-max of |gradient|, min-max normalized per map. An identically zero
/// gradient gives an all-zero map; a constant non-zero one gives all ones.
inline SaliencyMap saliency_from_gradient(const Tensor& gradient, View view, std::string model_id, std::string patient_id) {
  SaliencyMap map;
  map.height = gradient.height;
  map.width = gradient.width;
  map.view = view;
  map.model_id = std::move(model_id);
  map.patient_id = std::move(patient_id);
  map.values.assign(static_cast<std::size_t>(map.height) * map.width, 0.0);
  for (int y = 0; y < gradient.height; ++y) {
    for (int x = 0; x < gradient.width; ++x) {
      double m = 0;
      for (int c = 0; c < gradient.channels; ++c) m = std::max(m, std::abs(gradient.at(c, y, x)));
      map.values[static_cast<std::size_t>(y) * map.width + x] = m;
    }
  }
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  const double min = *lo, max = *hi;
  if (max == 0) return map;
  for (auto& v : map.values) v = max > min ? (v - min) / (max - min) : 1.0;
  return map;
}

template <GradientScorer M>
std::map<View, SaliencyMap> compute_saliency(const M& model, const ViewInputs& inputs, const std::string& model_id,
                                             const std::string& patient_id) {
  for (View v : model.views()) {
    if (!inputs.contains(v)) throw Error("missing_view", "saliency needs a " + std::string(to_string(v)) + " input");
  }
  const ScoreGradient sg = model.score_with_gradient(inputs);
  std::map<View, SaliencyMap> out;
  for (const auto& [view, grad] : sg.gradients) out.emplace(view, saliency_from_gradient(grad, view, model_id, patient_id));
  return out;
}

inline std::map<View, SaliencyMap> compute_saliency(const ModelArtifact& artifact, const StudyRecord& record) {
  ViewInputs inputs;
  inputs.emplace(artifact.view, load_input(record.image(artifact.view), artifact.preprocessing));
  return compute_saliency(SingleViewScorer(artifact), inputs, artifact.model_id, record.patient_id);
}

inline std::map<View, SaliencyMap> compute_saliency(const FusionModel& model, const StudyRecord& record) {
  ViewInputs inputs;
  for (View v : kViews) inputs.emplace(v, load_input(record.image(v), model.model(v).preprocessing));
  return compute_saliency(FusionScorer(model), inputs, model.model_id, record.patient_id);
}

/// Raw map file: 16-byte header of two little-endian uint64 (H, W), then H*W
/// little-endian float64 values in row-major order.
inline void save_saliency_map(const SaliencyMap& map, const std::filesystem::path& path) {
  std::string bytes;
  const auto put = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put(static_cast<std::uint64_t>(map.height));
  put(static_cast<std::uint64_t>(map.width));
  for (double d : map.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put(bits);
  }
  io::write_file_atomic(path, bytes);
}

inline SaliencyMap load_saliency_map(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  std::size_t pos = 0;
  const auto get = [&]() {
    if (pos + 8 > bytes.size()) throw Error("malformed_map", "truncated saliency map " + path.string());
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  };
  SaliencyMap map;
  map.height = static_cast<int>(get());
  map.width = static_cast<int>(get());
  if (bytes.size() != 16 + 8 * static_cast<std::size_t>(map.height) * static_cast<std::size_t>(map.width)) {
    throw Error("malformed_map", "size mismatch in " + path.string());
  }
  map.values.resize(static_cast<std::size_t>(map.height) * map.width);
  for (auto& d : map.values) {
    const std::uint64_t bits = get();
    std::memcpy(&d, &bits, sizeof d);
  }
  return map;
}

}  // namespace cartimark
