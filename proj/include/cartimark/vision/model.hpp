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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/core/random.hpp"
#include "cartimark/data/image.hpp"
#include "cartimark/data/prediction.hpp"
#include "cartimark/data/split.hpp"
#include "cartimark/data/types.hpp"
#include "cartimark/diagnostics/confusion.hpp"
#include "cartimark/diagnostics/roc.hpp"
#include "cartimark/vision/backbone.hpp"
#include "cartimark/vision/classifier.hpp"
#include "cartimark/vision/preprocess.hpp"

namespace cartimark {

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 10;
  int batch_size = 8;
  double frozen_fraction = 1.0;
  bool augment = false;
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

inline void check_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0)) throw Error("invalid_config", "learning_rate must be positive");
  if (c.epochs < 0) throw Error("invalid_config", "epochs must be non-negative");
  if (c.batch_size < 1) throw Error("invalid_config", "batch_size must be at least 1");
  if (!(c.frozen_fraction >= 0 && c.frozen_fraction <= 1)) throw Error("invalid_config", "frozen_fraction must lie in [0, 1]");
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs}, {"batch_size", c.batch_size},
          {"frozen_fraction", c.frozen_fraction}, {"augment", c.augment}, {"seed", c.seed},
          {"threshold", c.threshold}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  base.learning_rate = j.value("learning_rate", base.learning_rate);
  base.epochs = j.value("epochs", base.epochs);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.frozen_fraction = j.value("frozen_fraction", base.frozen_fraction);
  base.augment = j.value("augment", base.augment);
  base.seed = j.value("seed", base.seed);
  base.threshold = j.value("threshold", base.threshold);
  return base;
}

struct EpochLog {
  int epoch = 0;
  double loss = 0;
  double validation_accuracy = 0;
};

/// A trained single-view classifier. The network is immutable once built and
/// may be shared by concurrent predictions.
struct ModelArtifact {
  std::string model_id;
  View view = View::sagittal;
  BackboneSpec backbone;
  TrainConfig config;
  Preprocessing preprocessing;
  std::filesystem::path weights_uri;
  std::filesystem::path metadata_uri;
  DiagnosticRow validation_metrics;
  Metric validation_auc;
  std::vector<EpochLog> training_log;
  std::shared_ptr<const ClassifierNet> net;
};

/// Called with the patient id of every sample that contributes to a
/// gradient update.
using GradientSampleObserver = std::function<void(const std::string& patient_id)>;

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // save weights + metadata here when set
  GradientSampleObserver observer;
};

inline Preprocessing preprocessing_for(const BackboneSpec& spec) {
  Preprocessing p;
  p.input_size = spec.input_size;
  p.channels = spec.channels;
  return p;
}

inline Tensor load_input(const ImageRef& ref, const Preprocessing& p) { return preprocess(read_png(ref.uri), p); }

inline double predict_single_view(const ModelArtifact& artifact, const Tensor& input) {
  return artifact.net->score(input);
}

inline double predict_single_view(const ModelArtifact& artifact, const ImageRef& image) {
  return predict_single_view(artifact, load_input(image, artifact.preprocessing));
}

inline std::vector<double> extract_features(const ModelArtifact& artifact, const ImageRef& image) {
  return artifact.net->features(load_input(image, artifact.preprocessing));
}

namespace model_detail {

struct Sample {
  std::string patient_id;
  Tensor input;
  double target = 0;  // 1 for defect
};

inline std::vector<Sample> load_subset(const Manifest& manifest, const SplitAssignment& split, Subset subset, View view,
                                       const Preprocessing& p) {
  std::vector<Sample> out;
  for (const auto& id : split.patients(subset)) {
    const StudyRecord* record = manifest.find(id);
    if (!record) throw Error("split_mismatch", "split references unknown patient " + id);
    out.push_back({id, load_input(record->image(view), p), record->label == Label::defect ? 1.0 : 0.0});
  }
  return out;
}

inline Tensor flip_horizontal(const Tensor& t) {
  Tensor out = t;
  for (int c = 0; c < t.channels; ++c) {
    for (int y = 0; y < t.height; ++y) {
      for (int x = 0; x < t.width; ++x) out.at(c, y, x) = t.at(c, y, t.width - 1 - x);
    }
  }
  return out;
}

struct Adam {
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::vector<double>> m, v;
  long step = 0;

  Adam(double learning_rate, const std::vector<std::size_t>& sizes) : lr(learning_rate) {
    for (auto n : sizes) {
      m.emplace_back(n, 0.0);
      v.emplace_back(n, 0.0);
    }
  }

  void begin_step() { ++step; }

  void update(std::size_t slot, std::vector<double>& params, const std::vector<double>& grad) {
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m[slot][k] = beta1 * m[slot][k] + (1 - beta1) * grad[k];
      v[slot][k] = beta2 * v[slot][k] + (1 - beta2) * grad[k] * grad[k];
      params[k] -= lr * (m[slot][k] / c1) / (std::sqrt(v[slot][k] / c2) + eps);
    }
  }
};

inline double bce(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

inline std::string make_model_id(View view, const BackboneSpec& backbone, const TrainConfig& config,
                                 const SplitAssignment& split) {
  const nlohmann::json key = {{"view", std::string(to_string(view))}, {"backbone", to_json(backbone)},
                              {"config", to_json(config)}, {"split_seed", split.seed},
                              {"n", split.assignment.size()}};
  return std::string(to_string(view)) + "-" + backbone.name + "-" + io::hex64(io::fnv1a(key.dump())).substr(0, 8);
}

}  // namespace model_detail

/// Scores `samples` and derives the diagnostic row (and AUC when both
/// classes are present).
inline std::pair<DiagnosticRow, Metric> score_subset(const ClassifierNet& net, const std::vector<model_detail::Sample>& samples,
                                                     double threshold, const std::string& rater_id) {
  if (samples.empty()) return {DiagnosticRow{rater_id}, std::nullopt};
  std::vector<double> scores;
  std::vector<Label> calls, truth;
  for (const auto& s : samples) {
    const double score = net.score(s.input);
    scores.push_back(score);
    calls.push_back(score >= threshold ? Label::defect : Label::no_defect);
    truth.push_back(s.target > 0.5 ? Label::defect : Label::no_defect);
  }
  const auto cm = confusion(calls, truth);
  Metric auc;
  if (cm.positives() > 0 && cm.negatives() > 0) auc = roc_curve(scores, truth).auc;
  return {diagnostic_metrics(cm, rater_id), auc};
}

inline nlohmann::json artifact_metadata(const ModelArtifact& a) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : a.training_log) {
    log.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"validation_accuracy", e.validation_accuracy}});
  }
  return {{"kind", "single_view"},
          {"model_id", a.model_id},
          {"view", std::string(to_string(a.view))},
          {"backbone", to_json(a.backbone)},
          {"config", to_json(a.config)},
          {"preprocessing", to_json(a.preprocessing)},
          {"weights_uri", a.weights_uri.filename().string()},
          {"metrics", {{"validation", to_json(a.validation_metrics)}, {"validation_auc", metric_json(a.validation_auc)}}},
          {"training_log", log}};
}

/// Writes <dir>/<model_id>.weights and the sidecar <dir>/<model_id>.json.
inline void save_artifact(ModelArtifact& artifact, const std::filesystem::path& dir) {
  artifact.weights_uri = dir / (artifact.model_id + ".weights");
  artifact.metadata_uri = dir / (artifact.model_id + ".json");
  io::write_file_atomic(artifact.weights_uri, serialize_weights(*artifact.net));
  io::write_json(artifact.metadata_uri, artifact_metadata(artifact));
}

inline ModelArtifact load_artifact(const std::filesystem::path& metadata_path) {
  const auto meta = io::read_json(metadata_path);
  if (meta.value("kind", std::string()) != "single_view") {
    throw Error("not_a_single_view_model", metadata_path.string() + " is not a single-view model");
  }
  ModelArtifact a;
  try {
    a.model_id = meta.at("model_id").get<std::string>();
    a.view = parse_view(meta.at("view").get<std::string>());
    a.backbone = backbone_spec_from_json(meta.at("backbone"));
    a.config = train_config_from_json(meta.at("config"));
    a.preprocessing = preprocessing_from_json(meta.at("preprocessing"));
    a.metadata_uri = metadata_path;
    a.weights_uri = io::resolve(metadata_path.parent_path(), meta.at("weights_uri").get<std::string>());
    const auto& metrics = meta.at("metrics");
    a.validation_metrics = row_from_json(metrics.at("validation"));
    a.validation_auc = metric_from_json(metrics.at("validation_auc"));
    for (const auto& e : meta.at("training_log")) {
      a.training_log.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(), e.at("validation_accuracy").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_model", metadata_path.string() + ": " + e.what());
  }
  auto net = std::make_shared<ClassifierNet>(make_backbone(a.backbone.name));
  deserialize_weights(io::read_file(a.weights_uri), *net);
  a.net = std::move(net);
  return a;
}

/// Transfer learning on one view: the pretrained backbone's first
/// floor(frozen_fraction * depth) layers stay fixed, the rest and the head
/// are trained with Adam on binary cross-entropy over the {train} subset.
inline ModelArtifact train_single_view(const Manifest& manifest, const SplitAssignment& split, View view,
                                       const TrainConfig& config, const BackboneSpec& backbone,
                                       const TrainOptions& options = {}) {
  using namespace model_detail;
  check_train_config(config);
  check_split_matches(manifest, split);
  auto net = std::make_unique<ClassifierNet>(make_backbone(backbone.name));
  const BackboneSpec spec = net->backbone().spec();
  const Preprocessing prep = preprocessing_for(spec);

  const auto train = load_subset(manifest, split, Subset::train, view, prep);
  const auto validation = load_subset(manifest, split, Subset::validation, view, prep);
  const auto positives = std::count_if(train.begin(), train.end(), [](const Sample& s) { return s.target > 0.5; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(train.size())) {
    throw Error("single_class_training_set", "training subset must contain both classes");
  }

  const int depth = net->backbone().depth();
  const int frozen = std::clamp(static_cast<int>(std::floor(config.frozen_fraction * depth + 1e-9)), 0, depth);
  const bool backbone_frozen = frozen >= depth;
  const std::size_t d = net->feature_dim();

  // Features of the pretrained backbone: fixed for a frozen backbone, and the
  // source of the head's standardization either way.
  std::vector<std::vector<double>> cached(train.size()), cached_flipped;
  for (std::size_t i = 0; i < train.size(); ++i) cached[i] = net->features(train[i].input);
  if (backbone_frozen && config.augment) {
    cached_flipped.resize(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) cached_flipped[i] = net->features(flip_horizontal(train[i].input));
  }
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0, var = 0;
    for (const auto& f : cached) mean += f[k];
    mean /= static_cast<double>(cached.size());
    for (const auto& f : cached) var += (f[k] - mean) * (f[k] - mean);
    var /= static_cast<double>(cached.size());
    net->feature_mean[k] = mean;
    net->feature_scale[k] = std::sqrt(var) > 1e-9 ? std::sqrt(var) : 1.0;
  }

  std::vector<std::size_t> slot_sizes = {d, 1};
  auto& layers = net->backbone().parameters();
  for (int l = frozen; l < depth; ++l) slot_sizes.push_back(layers[static_cast<std::size_t>(l)].size());
  Adam adam(config.learning_rate, slot_sizes);

  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochLog> log;
  const std::string model_id = make_model_id(view, spec, config, split);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<double> grad_w(d, 0.0), grad_b(1, 0.0);
      LayerParameters grad_layers(layers.size());
      for (int l = frozen; l < depth; ++l) grad_layers[static_cast<std::size_t>(l)].assign(layers[static_cast<std::size_t>(l)].size(), 0.0);

      for (std::size_t pos = start; pos < end; ++pos) {
        const Sample& sample = train[order[pos]];
        if (options.observer) options.observer(sample.patient_id);
        const bool flip = config.augment && rng.uniform() < 0.5;
        std::vector<double> f;
        BackboneTrace trace;
        if (backbone_frozen) {
          f = flip ? cached_flipped[order[pos]] : cached[order[pos]];
        } else {
          f = net->backbone().forward(flip ? flip_horizontal(sample.input) : sample.input, &trace);
        }
        const double z = net->logit_from_features(f);
        epoch_loss += bce(z, sample.target);
        const double dz = backbone_detail::sigmoid(z) - sample.target;
        for (std::size_t k = 0; k < d; ++k) grad_w[k] += dz * (f[k] - net->feature_mean[k]) / net->feature_scale[k];
        grad_b[0] += dz;
        if (!backbone_frozen) {
          std::vector<double> df(d);
          for (std::size_t k = 0; k < d; ++k) df[k] = dz * net->head_weights[k] / net->feature_scale[k];
          net->backbone().backward(trace, df, &grad_layers, frozen, false);
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : grad_w) g *= inv;
      grad_b[0] *= inv;
      adam.begin_step();
      adam.update(0, net->head_weights, grad_w);
      std::vector<double> bias{net->head_bias};
      adam.update(1, bias, grad_b);
      net->head_bias = bias[0];
      for (int l = frozen; l < depth; ++l) {
        auto& g = grad_layers[static_cast<std::size_t>(l)];
        for (auto& v : g) v *= inv;
        adam.update(static_cast<std::size_t>(2 + l - frozen), layers[static_cast<std::size_t>(l)], g);
      }
    }
    const auto [row, auc] = score_subset(*net, validation, config.threshold, model_id);
    log.push_back({epoch, epoch_loss / static_cast<double>(train.size()), validation.empty() ? 0.0 : row.accuracy});
  }

  ModelArtifact artifact;
  artifact.model_id = model_id;
  artifact.view = view;
  artifact.backbone = spec;
  artifact.config = config;
  artifact.preprocessing = prep;
  artifact.training_log = std::move(log);
  std::tie(artifact.validation_metrics, artifact.validation_auc) = score_subset(*net, validation, config.threshold, model_id);
  artifact.net = std::shared_ptr<const ClassifierNet>(std::move(net));
  if (options.out_dir) save_artifact(artifact, *options.out_dir);
  return artifact;
}

/// Batch inference over one subset, one record per patient in canonical order.
inline std::vector<PredictionRecord> predict_subset(const ModelArtifact& artifact, const Manifest& manifest,
                                                    const SplitAssignment& split, Subset subset) {
  std::vector<PredictionRecord> out;
  for (const auto& id : split.patients(subset)) {
    const StudyRecord* record = manifest.find(id);
    if (!record) throw Error("split_mismatch", "split references unknown patient " + id);
    const double score = predict_single_view(artifact, record->image(artifact.view));
    out.push_back(model_prediction(id, artifact.model_id, score, artifact.config.threshold));
  }
  return out;
}

}  // namespace cartimark
