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
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/data/types.hpp"

namespace cartimark {

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
  double threshold = 0;  // calls are "defect" for score >= threshold
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0;
};

/// Sweeps thresholds over the distinct scores in descending order; tied
/// scores move the curve in a single diagonal step, so the trapezoidal area
/// equals the Mann-Whitney statistic.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const Label> truth) {
  if (scores.size() != truth.size()) throw Error("length_mismatch", "scores and truth differ in length");
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error("non_finite_score", "score " + std::to_string(i) + " is not finite");
    positives += truth[i] == Label::defect ? 1 : 0;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) throw Error("single_class", "ROC needs both classes in the truth");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  double area2 = 0;  // twice the area, accumulated in counts
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const std::size_t tp_before = tp, fp_before = fp;
    while (i < order.size() && scores[order[i]] == threshold) {
      (truth[order[i]] == Label::defect ? tp : fp) += 1;
      ++i;
    }
    area2 += static_cast<double>((fp - fp_before) * (tp + tp_before));
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives), threshold});
  }
  curve.auc = area2 / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return curve;
}

inline nlohmann::json to_json(const RocCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"fpr", p.fpr},
                      {"tpr", p.tpr},
                      {"threshold", std::isfinite(p.threshold) ? nlohmann::json(p.threshold) : nlohmann::json(nullptr)}});
  }
  return {{"points", points}, {"auc", curve.auc}};
}

inline RocCurve roc_from_json(const nlohmann::json& j) {
  RocCurve curve;
  curve.auc = j.at("auc").get<double>();
  for (const auto& p : j.at("points")) {
    const auto& t = p.at("threshold");
    curve.points.push_back({p.at("fpr").get<double>(), p.at("tpr").get<double>(),
                            t.is_null() ? std::numeric_limits<double>::infinity() : t.get<double>()});
  }
  return curve;
}

}  // namespace cartimark
