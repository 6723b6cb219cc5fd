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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/random.hpp"
#include "cartimark/vision/tensor.hpp"

namespace cartimark {

struct BackboneSpec {
  std::string name;
  int input_size = 0;
  int feature_dim = 0;
  bool pretrained = true;
  int channels = 1;  // input channels the network expects
};

inline nlohmann::json to_json(const BackboneSpec& s) {
  return {{"name", s.name},
          {"input_size", s.input_size},
          {"feature_dim", s.feature_dim},
          {"pretrained", s.pretrained},
          {"channels", s.channels}};
}

inline BackboneSpec backbone_spec_from_json(const nlohmann::json& j) {
  return {j.at("name").get<std::string>(), j.at("input_size").get<int>(), j.at("feature_dim").get<int>(),
          j.value("pretrained", true), j.value("channels", 1)};
}

/// Intermediate tensors kept by a forward pass for the backward pass.
struct BackboneTrace {
  std::vector<Tensor> tensors;
};

/// One flat parameter vector per parameterised layer, input side first.
using LayerParameters = std::vector<std::vector<double>>;

/// Feature extractor with global-pooled output. Implementations must be
/// stateless across calls so a loaded network is safe to share between
/// threads.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual const BackboneSpec& spec() const = 0;
  virtual bool differentiable() const { return true; }

  /// Global-pooled features; fills `trace` when non-null.
  virtual std::vector<double> forward(const Tensor& input, BackboneTrace* trace) const = 0;

  /// Back-propagates d(objective)/d(features). Gradients of layers with index
  /// >= first_trainable are accumulated into `grads` when it is non-null.
  /// Returns d(objective)/d(input) when want_input is set (else an empty tensor).
  virtual Tensor backward(const BackboneTrace& trace, std::span<const double> d_features, LayerParameters* grads,
                          int first_trainable, bool want_input) const = 0;

  virtual LayerParameters& parameters() = 0;
  virtual const LayerParameters& parameters() const = 0;
  virtual std::unique_ptr<Backbone> clone() const = 0;

  int depth() const { return static_cast<int>(parameters().size()); }
};

namespace backbone_detail {

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// 3x3 convolution with edge-replicated borders. Parameter layout: weights [out][in][3][3]
/// followed by biases [out].
struct Conv3x3 {
  int in = 0;
  int out = 0;

  std::size_t parameter_count() const { return static_cast<std::size_t>(out) * in * 9 + out; }
  std::size_t w(int o, int i, int ky, int kx) const { return ((static_cast<std::size_t>(o) * in + i) * 3 + ky) * 3 + kx; }
  std::size_t b(int o) const { return static_cast<std::size_t>(out) * in * 9 + o; }

  Tensor forward(const Tensor& x, const std::vector<double>& p) const {
    Tensor y(out, x.height, x.width);
    for (int o = 0; o < out; ++o) {
      for (int r = 0; r < x.height; ++r) {
        for (int c = 0; c < x.width; ++c) {
          double s = p[b(o)];
          for (int i = 0; i < in; ++i) {
            for (int ky = 0; ky < 3; ++ky) {
              const int rr = std::clamp(r + ky - 1, 0, x.height - 1);
              for (int kx = 0; kx < 3; ++kx) {
                const int cc = std::clamp(c + kx - 1, 0, x.width - 1);
                s += p[w(o, i, ky, kx)] * x.at(i, rr, cc);
              }
            }
          }
          y.at(o, r, c) = s;
        }
      }
    }
    return y;
  }

  /// Returns d/dx; accumulates parameter gradients into `dp` when non-null.
  Tensor backward(const Tensor& x, const Tensor& dy, const std::vector<double>& p, std::vector<double>* dp,
                  bool want_input) const {
    Tensor dx;
    if (want_input) dx = Tensor(in, x.height, x.width);
    for (int o = 0; o < out; ++o) {
      for (int r = 0; r < x.height; ++r) {
        for (int c = 0; c < x.width; ++c) {
          const double g = dy.at(o, r, c);
          if (g == 0) continue;
          if (dp) (*dp)[b(o)] += g;
          for (int i = 0; i < in; ++i) {
            for (int ky = 0; ky < 3; ++ky) {
              const int rr = std::clamp(r + ky - 1, 0, x.height - 1);
              for (int kx = 0; kx < 3; ++kx) {
                const int cc = std::clamp(c + kx - 1, 0, x.width - 1);
                if (dp) (*dp)[w(o, i, ky, kx)] += g * x.at(i, rr, cc);
                if (want_input) dx.at(i, rr, cc) += g * p[w(o, i, ky, kx)];
              }
            }
          }
        }
      }
    }
    return dx;
  }
};

inline Tensor softplus(const Tensor& z) {
  Tensor a = z;
  for (auto& v : a.values) v = softplus(v);
  return a;
}

inline Tensor avg_pool2(const Tensor& x) {
  Tensor y(x.channels, x.height / 2, x.width / 2);
  for (int c = 0; c < y.channels; ++c) {
    for (int r = 0; r < y.height; ++r) {
      for (int k = 0; k < y.width; ++k) {
        y.at(c, r, k) = 0.25 * (x.at(c, 2 * r, 2 * k) + x.at(c, 2 * r + 1, 2 * k) + x.at(c, 2 * r, 2 * k + 1) +
                                x.at(c, 2 * r + 1, 2 * k + 1));
      }
    }
  }
  return y;
}

inline Tensor avg_pool2_backward(const Tensor& dy, int height, int width) {
  Tensor dx(dy.channels, height, width);
  for (int c = 0; c < dy.channels; ++c) {
    for (int r = 0; r < dy.height; ++r) {
      for (int k = 0; k < dy.width; ++k) {
        const double g = 0.25 * dy.at(c, r, k);
        dx.at(c, 2 * r, 2 * k) = dx.at(c, 2 * r + 1, 2 * k) = dx.at(c, 2 * r, 2 * k + 1) = dx.at(c, 2 * r + 1, 2 * k + 1) = g;
      }
    }
  }
  return dx;
}

}  // namespace backbone_detail

/// Small deterministic network for desk-scale runs:
/// conv3x3(1->8) -> softplus -> avgpool2 -> conv3x3(8->16) -> softplus -> GAP.
/// The first layer is a fixed bank of oriented edge, Laplacian and box
/// filters; the second mixes them with a seeded perturbation. Every operation
/// is smooth, so input gradients are exact and finite differences agree.
class TinyBackbone final : public Backbone {
 public:
  static constexpr int kInputSize = 64;
  static constexpr int kHidden = 8;
  static constexpr int kFeatures = 16;

  TinyBackbone() {
    spec_ = {"tiny-test", kInputSize, kFeatures, true, 1};
    params_.resize(2);
    params_[0].assign(conv1_.parameter_count(), 0.0);
    params_[1].assign(conv2_.parameter_count(), 0.0);
    init_pretrained();
  }

  const BackboneSpec& spec() const override { return spec_; }
  LayerParameters& parameters() override { return params_; }
  const LayerParameters& parameters() const override { return params_; }
  std::unique_ptr<Backbone> clone() const override { return std::make_unique<TinyBackbone>(*this); }

  std::vector<double> forward(const Tensor& input, BackboneTrace* trace) const override {
    using namespace backbone_detail;
    if (input.channels != 1 || input.height != kInputSize || input.width != kInputSize) {
      throw Error("shape_mismatch", "tiny-test expects a 1x64x64 input");
    }
    Tensor z1 = conv1_.forward(input, params_[0]);
    Tensor a1 = softplus(z1);
    Tensor p1 = avg_pool2(a1);
    Tensor z2 = conv2_.forward(p1, params_[1]);
    Tensor a2 = softplus(z2);
    std::vector<double> features(kFeatures, 0.0);
    const double area = static_cast<double>(a2.height) * a2.width;
    for (int c = 0; c < kFeatures; ++c) {
      double s = 0;
      for (int r = 0; r < a2.height; ++r) {
        for (int k = 0; k < a2.width; ++k) s += a2.at(c, r, k);
      }
      features[static_cast<std::size_t>(c)] = s / area;
    }
    if (trace) trace->tensors = {input, std::move(z1), std::move(p1), std::move(z2)};
    return features;
  }

  Tensor backward(const BackboneTrace& trace, std::span<const double> d_features, LayerParameters* grads,
                  int first_trainable, bool want_input) const override {
    using namespace backbone_detail;
    const Tensor& input = trace.tensors.at(0);
    const Tensor& z1 = trace.tensors.at(1);
    const Tensor& p1 = trace.tensors.at(2);
    const Tensor& z2 = trace.tensors.at(3);

    Tensor dz2(z2.channels, z2.height, z2.width);
    const double area = static_cast<double>(z2.height) * z2.width;
    for (int c = 0; c < z2.channels; ++c) {
      for (int r = 0; r < z2.height; ++r) {
        for (int k = 0; k < z2.width; ++k) {
          dz2.at(c, r, k) = d_features[static_cast<std::size_t>(c)] / area * sigmoid(z2.at(c, r, k));
        }
      }
    }
    const bool train2 = grads && first_trainable <= 1;
    const bool train1 = grads && first_trainable <= 0;
    if (!want_input && !train1 && !train2) return {};
    const bool need_p1 = want_input || train1;
    Tensor dp1 = conv2_.backward(p1, dz2, params_[1], train2 ? &(*grads)[1] : nullptr, need_p1);
    if (!need_p1) return {};
    Tensor dz1 = avg_pool2_backward(dp1, z1.height, z1.width);
    for (std::size_t i = 0; i < dz1.values.size(); ++i) dz1.values[i] *= sigmoid(z1.values[i]);
    return conv1_.backward(input, dz1, params_[0], train1 ? &(*grads)[0] : nullptr, want_input);
  }

 private:
  void init_pretrained() {
    static constexpr double kBank[kHidden][3][3] = {
        {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}},    {{1, 0, -1}, {2, 0, -2}, {1, 0, -1}},
        {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}},    {{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}},
        {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}},      {{0, -1, 0}, {-1, 4, -1}, {0, -1, 0}},
        {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}},       {{-1, -1, -1}, {-1, -1, -1}, {-1, -1, -1}},
    };
    auto& p1 = params_[0];
    for (int o = 0; o < kHidden; ++o) {
      const double gain = o >= 6 ? 1.0 / 9.0 : 1.0;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) p1[conv1_.w(o, 0, ky, kx)] = kBank[o][ky][kx] * gain;
      }
      p1[conv1_.b(o)] = o >= 6 ? 0.0 : -2.0;
    }
    Rng rng(0x7E57BB0E);
    auto& p2 = params_[1];
    for (int o = 0; o < kFeatures; ++o) {
      for (int i = 0; i < kHidden; ++i) {
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) p2[conv2_.w(o, i, ky, kx)] = 0.01 * rng.normal();
        }
      }
      p2[conv2_.w(o, o % kHidden, 1, 1)] += 1.0;
      if (o >= kHidden) p2[conv2_.w(o, (o + 3) % kHidden, 1, 1)] += 0.5;
      p2[conv2_.b(o)] = -0.5;
    }
  }

  BackboneSpec spec_;
  backbone_detail::Conv3x3 conv1_{1, kHidden};
  backbone_detail::Conv3x3 conv2_{kHidden, kFeatures};
  LayerParameters params_;
};

using BackboneFactory = std::function<std::unique_ptr<Backbone>()>;

namespace backbone_detail {

struct Registry {
  std::mutex mutex;
  std::map<std::string, BackboneFactory> factories{{"tiny-test", [] { return std::make_unique<TinyBackbone>(); }}};
};

inline Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace backbone_detail

/// Makes a provider available under `name` (e.g. a binding to an external
/// framework that ships pretrained Xception weights).
inline void register_backbone(const std::string& name, BackboneFactory factory) {
  auto& r = backbone_detail::registry();
  std::lock_guard lock(r.mutex);
  r.factories[name] = std::move(factory);
}

inline std::unique_ptr<Backbone> make_backbone(const std::string& name) {
  auto& r = backbone_detail::registry();
  std::lock_guard lock(r.mutex);
  const auto it = r.factories.find(name);
  if (it == r.factories.end()) {
    throw Error("backbone_unavailable", "no provider registered for backbone '" + name + "'");
  }
  return it->second();
}

/// Standard geometry of the ImageNet Xception network; no provider for it
/// ships with this library.
inline BackboneSpec xception_spec() { return {"xception", 299, 2048, true, 3}; }

}  // namespace cartimark
