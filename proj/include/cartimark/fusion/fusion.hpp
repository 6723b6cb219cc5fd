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

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/data/prediction.hpp"
#include "cartimark/data/split.hpp"
#include "cartimark/data/types.hpp"
#include "cartimark/diagnostics/confusion.hpp"
#include "cartimark/svm/svm.hpp"
#include "cartimark/vision/model.hpp"

namespace cartimark {

/// Late fusion of a sagittal and a coronal classifier: per-view
/// representations (pooled features or scores) are concatenated and scored by
/// a linear SVM. The fused score is the raw signed margin.
struct FusionModel {
  std::string model_id;
  std::shared_ptr<const ModelArtifact> sagittal;
  std::shared_ptr<const ModelArtifact> coronal;
  SvmModel svm;
  FusionMode mode = FusionMode::feature;
  double threshold = 0.0;
  std::vector<std::pair<double, double>> c_selection;  // (C, validation accuracy)

  const ModelArtifact& model(View v) const { return v == View::sagittal ? *sagittal : *coronal; }

  std::size_t input_dimension() const {
    return mode == FusionMode::score ? 2 : sagittal->backbone.feature_dim + coronal->backbone.feature_dim;
  }
};

struct FusionPrediction {
  double score = 0;
  Label call = Label::no_defect;
};

struct FusionOptions {
  std::vector<double> c_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
};

/// Fused input for one patient from preprocessed per-view tensors.
inline std::vector<double> fused_input(const ModelArtifact& sagittal, const ModelArtifact& coronal, FusionMode mode,
                                       const Tensor& sagittal_input, const Tensor& coronal_input) {
  if (mode == FusionMode::score) {
    return {sagittal.net->score(sagittal_input), coronal.net->score(coronal_input)};
  }
  auto x = sagittal.net->features(sagittal_input);
  const auto c = coronal.net->features(coronal_input);
  x.insert(x.end(), c.begin(), c.end());
  return x;
}

namespace fusion_detail {

inline void check_views(const ModelArtifact& sagittal, const ModelArtifact& coronal) {
  if (sagittal.view != View::sagittal || coronal.view != View::coronal) {
    throw Error("view_mismatch", "fusion needs a sagittal and a coronal model");
  }
}

struct Fused {
  std::vector<std::vector<double>> X;
  std::vector<int> y;
};

inline Fused build(const ModelArtifact& sagittal, const ModelArtifact& coronal, FusionMode mode,
                   const Manifest& manifest, const SplitAssignment& split, Subset subset) {
  Fused out;
  for (const auto& id : split.patients(subset)) {
    const StudyRecord* r = manifest.find(id);
    if (!r) throw Error("split_mismatch", "split references unknown patient " + id);
    out.X.push_back(fused_input(sagittal, coronal, mode, load_input(r->image(View::sagittal), sagittal.preprocessing),
                                load_input(r->image(View::coronal), coronal.preprocessing)));
    out.y.push_back(r->label == Label::defect ? 1 : -1);
  }
  return out;
}

inline std::string make_id(const ModelArtifact& sagittal, const ModelArtifact& coronal, const SvmConfig& config) {
  const nlohmann::json key = {{"sagittal", sagittal.model_id}, {"coronal", coronal.model_id}, {"svm", to_json(config)}};
  return "fusion-" + io::hex64(io::fnv1a(key.dump())).substr(0, 8);
}

}  // namespace fusion_detail

/// Trains the SVM on the {train} subset for each C in the grid and keeps the
/// C with the best validation accuracy (first in grid order on ties).
inline FusionModel train_fusion(std::shared_ptr<const ModelArtifact> sagittal, std::shared_ptr<const ModelArtifact> coronal,
                                const Manifest& manifest, const SplitAssignment& split, const SvmConfig& config,
                                const FusionOptions& options = {}) {
  if (!sagittal || !coronal || !sagittal->net || !coronal->net) throw Error("invalid_model", "fusion needs two loaded models");
  fusion_detail::check_views(*sagittal, *coronal);
  check_split_matches(manifest, split);
  if (options.c_grid.empty()) throw Error("invalid_config", "empty C grid");

  const auto train = fusion_detail::build(*sagittal, *coronal, config.fusion_mode, manifest, split, Subset::train);
  const auto validation = fusion_detail::build(*sagittal, *coronal, config.fusion_mode, manifest, split, Subset::validation);
  const bool has_pos = std::find(train.y.begin(), train.y.end(), 1) != train.y.end();
  const bool has_neg = std::find(train.y.begin(), train.y.end(), -1) != train.y.end();
  if (!has_pos || !has_neg) throw Error("single_class_training_set", "training subset must contain both classes");

  FusionModel model;
  model.sagittal = std::move(sagittal);
  model.coronal = std::move(coronal);
  model.mode = config.fusion_mode;
  double best_accuracy = -1;
  for (double C : options.c_grid) {
    SvmConfig c = config;
    c.C = C;
    SvmModel svm = train_svm(train.X, train.y, c);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < validation.X.size(); ++i) {
      const bool called = svm_decision(svm, validation.X[i]) >= model.threshold;
      correct += called == (validation.y[i] == 1) ? 1 : 0;
    }
    const double accuracy =
        validation.X.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(validation.X.size());
    model.c_selection.emplace_back(C, accuracy);
    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      model.svm = std::move(svm);
    }
  }
  model.model_id = fusion_detail::make_id(*model.sagittal, *model.coronal, model.svm.config);
  return model;
}

inline FusionPrediction predict_fusion(const FusionModel& model, const Tensor& sagittal_input, const Tensor& coronal_input) {
  const auto x = fused_input(*model.sagittal, *model.coronal, model.mode, sagittal_input, coronal_input);
  const double margin = svm_decision(model.svm, x);
  return {margin, margin >= model.threshold ? Label::defect : Label::no_defect};
}

inline FusionPrediction predict_fusion(const FusionModel& model, const ImageRef& sagittal_image,
                                       const ImageRef& coronal_image) {
  return predict_fusion(model, load_input(sagittal_image, model.sagittal->preprocessing),
                        load_input(coronal_image, model.coronal->preprocessing));
}

inline std::vector<PredictionRecord> predict_subset(const FusionModel& model, const Manifest& manifest,
                                                    const SplitAssignment& split, Subset subset) {
  std::vector<PredictionRecord> out;
  for (const auto& id : split.patients(subset)) {
    const StudyRecord* r = manifest.find(id);
    if (!r) throw Error("split_mismatch", "split references unknown patient " + id);
    const auto p = predict_fusion(model, r->image(View::sagittal), r->image(View::coronal));
    out.push_back(model_prediction(id, model.model_id, p.score, model.threshold));
  }
  return out;
}

inline nlohmann::json fusion_to_json(const FusionModel& model, const std::filesystem::path& base_dir) {
  nlohmann::json selection = nlohmann::json::array();
  for (const auto& [C, acc] : model.c_selection) selection.push_back({{"C", C}, {"validation_accuracy", acc}});
  return {{"kind", "fusion"},
          {"model_id", model.model_id},
          {"fusion_mode", std::string(to_string(model.mode))},
          {"threshold", model.threshold},
          {"sagittal_model", io::relativize(base_dir, std::filesystem::absolute(model.sagittal->metadata_uri))},
          {"coronal_model", io::relativize(base_dir, std::filesystem::absolute(model.coronal->metadata_uri))},
          {"c_selection", selection},
          {"svm", to_json(model.svm)}};
}

/// Both per-view artifacts must already be saved; the fusion file references
/// their metadata files.
inline void save_fusion(const FusionModel& model, const std::filesystem::path& path) {
  if (model.sagittal->metadata_uri.empty() || model.coronal->metadata_uri.empty()) {
    throw Error("unsaved_model", "save both single-view artifacts before the fusion model");
  }
  io::write_json(path, fusion_to_json(model, std::filesystem::absolute(path).parent_path()));
}

inline FusionModel load_fusion(const std::filesystem::path& path) {
  const auto j = io::read_json(path);
  if (j.value("kind", std::string()) != "fusion") throw Error("not_a_fusion_model", path.string() + " is not a fusion model");
  FusionModel model;
  try {
    const auto base = path.parent_path();
    model.model_id = j.at("model_id").get<std::string>();
    model.mode = parse_fusion_mode(j.at("fusion_mode").get<std::string>());
    model.threshold = j.at("threshold").get<double>();
    model.sagittal = std::make_shared<const ModelArtifact>(load_artifact(io::resolve(base, j.at("sagittal_model").get<std::string>())));
    model.coronal = std::make_shared<const ModelArtifact>(load_artifact(io::resolve(base, j.at("coronal_model").get<std::string>())));
    model.svm = svm_from_json(j.at("svm"));
    for (const auto& s : j.value("c_selection", nlohmann::json::array())) {
      model.c_selection.emplace_back(s.at("C").get<double>(), s.at("validation_accuracy").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_model", path.string() + ": " + e.what());
  }
  fusion_detail::check_views(*model.sagittal, *model.coronal);
  if (model.svm.dimension() != model.input_dimension()) throw Error("malformed_model", "SVM dimension does not match fusion mode");
  return model;
}

}  // namespace cartimark
