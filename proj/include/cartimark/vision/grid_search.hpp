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

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/vision/model.hpp"

namespace cartimark {

/// Ordered axes; the Cartesian product is enumerated with the last axis
/// varying fastest. Axis names are TrainConfig field names.
struct HyperGrid {
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;

  std::size_t size() const {
    std::size_t n = axes.empty() ? 0 : 1;
    for (const auto& [name, values] : axes) n *= values.size();
    return n;
  }
};

inline HyperGrid default_hyper_grid() {
  return {{{"learning_rate", {1e-3, 1e-4}}, {"frozen_fraction", {1.0, 0.8}}, {"epochs", {10, 30}}}};
}

inline HyperGrid hyper_grid_from_json(const nlohmann::json& j) {
  HyperGrid grid;
  if (j.is_object() && j.contains("axes")) {
    for (const auto& axis : j["axes"]) grid.axes.push_back({axis.at("name").get<std::string>(), axis.at("values").get<std::vector<nlohmann::json>>()});
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) grid.axes.push_back({it.key(), it.value().get<std::vector<nlohmann::json>>()});
  } else {
    throw Error("invalid_grid", "grid must be a JSON object");
  }
  return grid;
}

inline nlohmann::json to_json(const HyperGrid& grid) {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& [name, values] : grid.axes) axes.push_back({{"name", name}, {"values", values}});
  return {{"axes", axes}};
}

struct LeaderboardEntry {
  std::size_t index = 0;
  TrainConfig config;
  std::string model_id;
  double validation_accuracy = 0;
  Metric validation_auc;
};

struct GridSearchResult {
  TrainConfig best_config;
  ModelArtifact best_model;
  std::vector<LeaderboardEntry> leaderboard;
};

inline std::vector<TrainConfig> expand_grid(const HyperGrid& grid, const TrainConfig& base) {
  if (grid.size() == 0) throw Error("invalid_grid", "grid has no points");
  static const std::vector<std::string> kKnown = {"learning_rate", "epochs", "batch_size", "frozen_fraction",
                                                  "augment", "seed", "threshold"};
  for (const auto& [name, values] : grid.axes) {
    if (std::find(kKnown.begin(), kKnown.end(), name) == kKnown.end()) {
      throw Error("invalid_grid", "unknown hyperparameter '" + name + "'");
    }
  }
  std::vector<TrainConfig> out;
  std::vector<std::size_t> digit(grid.axes.size(), 0);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    nlohmann::json point = nlohmann::json::object();
    for (std::size_t a = 0; a < grid.axes.size(); ++a) point[grid.axes[a].first] = grid.axes[a].second[digit[a]];
    out.push_back(train_config_from_json(point, base));
    for (std::size_t a = grid.axes.size(); a-- > 0;) {
      if (++digit[a] < grid.axes[a].second.size()) break;
      digit[a] = 0;
    }
  }
  return out;
}

/// Trains one model per grid point and keeps the one with the highest
/// validation accuracy; ties go to higher validation AUC, then fewer epochs,
/// then earlier grid order.
inline GridSearchResult grid_search(const Manifest& manifest, const SplitAssignment& split, View view,
                                    const HyperGrid& grid, const BackboneSpec& backbone, const TrainConfig& base = {},
                                    const TrainOptions& options = {}) {
  const auto points = expand_grid(grid, base);
  GridSearchResult result;
  std::optional<std::size_t> best;
  TrainOptions inner = options;
  inner.out_dir.reset();
  for (std::size_t i = 0; i < points.size(); ++i) {
    ModelArtifact model;
    try {
      model = train_single_view(manifest, split, view, points[i], backbone, inner);
    } catch (const Error& e) {
      throw Error(e.code(), "grid point " + std::to_string(i) + " " + to_json(points[i]).dump() + ": " + e.what());
    }
    LeaderboardEntry entry{i, points[i], model.model_id, model.validation_metrics.accuracy, model.validation_auc};
    const auto better = [&](const LeaderboardEntry& a, const LeaderboardEntry& b) {
      if (a.validation_accuracy != b.validation_accuracy) return a.validation_accuracy > b.validation_accuracy;
      const double auc_a = a.validation_auc.value_or(-1.0), auc_b = b.validation_auc.value_or(-1.0);
      if (auc_a != auc_b) return auc_a > auc_b;
      if (a.config.epochs != b.config.epochs) return a.config.epochs < b.config.epochs;
      return a.index < b.index;
    };
    if (!best || better(entry, result.leaderboard[*best])) {
      best = i;
      result.best_model = std::move(model);
      result.best_config = points[i];
    }
    result.leaderboard.push_back(std::move(entry));
  }
  if (options.out_dir) save_artifact(result.best_model, *options.out_dir);
  return result;
}

inline nlohmann::json to_json(const std::vector<LeaderboardEntry>& board) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : board) {
    out.push_back({{"index", e.index},
                   {"config", to_json(e.config)},
                   {"model_id", e.model_id},
                   {"validation_accuracy", e.validation_accuracy},
                   {"validation_auc", metric_json(e.validation_auc)}});
  }
  return out;
}

}  // namespace cartimark
