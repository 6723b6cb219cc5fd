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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/vision/backbone.hpp"
#include "cartimark/vision/tensor.hpp"

namespace cartimark {

/// Backbone followed by a logistic head on standardized pooled features:
/// score = sigmoid(w . (f - mean) / scale + b).
class ClassifierNet {
 public:
  explicit ClassifierNet(std::unique_ptr<Backbone> backbone) : backbone_(std::move(backbone)) {
    const auto d = static_cast<std::size_t>(backbone_->spec().feature_dim);
    feature_mean.assign(d, 0.0);
    feature_scale.assign(d, 1.0);
    head_weights.assign(d, 0.0);
  }

  ClassifierNet(const ClassifierNet& other)
      : feature_mean(other.feature_mean),
        feature_scale(other.feature_scale),
        head_weights(other.head_weights),
        head_bias(other.head_bias),
        backbone_(other.backbone_->clone()) {}

  ClassifierNet& operator=(const ClassifierNet& other) {
    if (this != &other) *this = ClassifierNet(other);
    return *this;
  }
  ClassifierNet(ClassifierNet&&) noexcept = default;
  ClassifierNet& operator=(ClassifierNet&&) noexcept = default;

  Backbone& backbone() { return *backbone_; }
  const Backbone& backbone() const { return *backbone_; }
  std::size_t feature_dim() const { return head_weights.size(); }

  std::vector<double> features(const Tensor& input) const { return backbone_->forward(input, nullptr); }

  double logit_from_features(std::span<const double> f) const {
    double z = head_bias;
    for (std::size_t k = 0; k < f.size(); ++k) z += head_weights[k] * (f[k] - feature_mean[k]) / feature_scale[k];
    return z;
  }

  double score(const Tensor& input) const { return backbone_detail::sigmoid(logit_from_features(features(input))); }

  /// Score together with d(score)/d(input).
  std::pair<double, Tensor> score_with_gradient(const Tensor& input) const {
    BackboneTrace trace;
    const auto f = backbone_->forward(input, &trace);
    const double s = backbone_detail::sigmoid(logit_from_features(f));
    std::vector<double> df(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) df[k] = s * (1.0 - s) * head_weights[k] / feature_scale[k];
    return {s, backbone_->backward(trace, df, nullptr, backbone_->depth(), true)};
  }

  /// d(objective)/d(input) for an objective that is linear in the features
  /// with coefficients `d_features`.
  std::pair<std::vector<double>, Tensor> features_with_gradient(const Tensor& input,
                                                                std::span<const double> d_features) const {
    BackboneTrace trace;
    auto f = backbone_->forward(input, &trace);
    return {std::move(f), backbone_->backward(trace, d_features, nullptr, backbone_->depth(), true)};
  }

  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<double> head_weights;
  double head_bias = 0;

 private:
  std::unique_ptr<Backbone> backbone_;
};

namespace weights_detail {

inline constexpr char kMagic[8] = {'C', 'M', 'K', 'W', '0', '0', '0', '1'};

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_doubles(std::string& out, std::span<const double> values) {
  put_u64(out, values.size());
  for (double d : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
  }
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  std::uint64_t u64() {
    if (pos + 8 > bytes.size()) throw Error("malformed_weights", "truncated weights file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }

  std::vector<double> doubles() {
    const auto n = u64();
    if (n > (bytes.size() - pos) / 8) throw Error("malformed_weights", "truncated weights file");
    std::vector<double> out(n);
    for (auto& d : out) {
      const std::uint64_t bits = u64();
      std::memcpy(&d, &bits, sizeof d);
    }
    return out;
  }
};

}  // namespace weights_detail

/// Binary weights: magic, backbone layers, then head vectors; all values as
/// little-endian IEEE-754 bit patterns so a reload is bitwise exact.
inline std::string serialize_weights(const ClassifierNet& net) {
  using namespace weights_detail;
  std::string out(kMagic, sizeof kMagic);
  const auto& layers = net.backbone().parameters();
  put_u64(out, layers.size());
  for (const auto& layer : layers) put_doubles(out, layer);
  put_doubles(out, net.feature_mean);
  put_doubles(out, net.feature_scale);
  put_doubles(out, net.head_weights);
  put_doubles(out, std::vector<double>{net.head_bias});
  return out;
}

inline void deserialize_weights(const std::string& bytes, ClassifierNet& net) {
  using namespace weights_detail;
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error("malformed_weights", "not a weights file");
  }
  Reader r{bytes, sizeof kMagic};
  auto& layers = net.backbone().parameters();
  if (r.u64() != layers.size()) throw Error("malformed_weights", "layer count mismatch");
  for (auto& layer : layers) {
    auto values = r.doubles();
    if (values.size() != layer.size()) throw Error("malformed_weights", "layer size mismatch");
    layer = std::move(values);
  }
  net.feature_mean = r.doubles();
  net.feature_scale = r.doubles();
  net.head_weights = r.doubles();
  const auto bias = r.doubles();
  const std::size_t d = net.backbone().spec().feature_dim;
  if (net.feature_mean.size() != d || net.feature_scale.size() != d || net.head_weights.size() != d ||
      bias.size() != 1) {
    throw Error("malformed_weights", "head size mismatch");
  }
  net.head_bias = bias[0];
}

}  // namespace cartimark
