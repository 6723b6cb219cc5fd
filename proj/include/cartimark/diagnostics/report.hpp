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
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/data/prediction.hpp"
#include "cartimark/data/types.hpp"
#include "cartimark/diagnostics/confusion.hpp"
#include "cartimark/diagnostics/roc.hpp"

namespace cartimark {

struct CurveSeries {
  std::string model_id;
  RocCurve curve;
};

struct RaterPointSeries {
  std::string rater_id;
  RaterPoint point;
};

/// Data behind the ROC figure: model curves plus superimposed reader points.
struct PlotData {
  std::vector<CurveSeries> curves;
  std::vector<RaterPointSeries> rater_points;
};

struct EvaluationReport {
  DiagnosticReport report;
  PlotData plot;
};

inline nlohmann::json to_json(const PlotData& plot) {
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& c : plot.curves) {
    nlohmann::json j = to_json(c.curve);
    j["model_id"] = c.model_id;
    curves.push_back(std::move(j));
  }
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : plot.rater_points) {
    points.push_back({{"rater_id", p.rater_id}, {"fpr", p.point.fpr}, {"tpr", p.point.tpr}});
  }
  return {{"curves", curves}, {"rater_points", points}};
}

inline PlotData plot_from_json(const nlohmann::json& j) {
  PlotData plot;
  for (const auto& c : j.at("curves")) plot.curves.push_back({c.at("model_id").get<std::string>(), roc_from_json(c)});
  for (const auto& p : j.at("rater_points")) {
    plot.rater_points.push_back({p.at("rater_id").get<std::string>(), {p.at("fpr").get<double>(), p.at("tpr").get<double>()}});
  }
  return plot;
}

inline nlohmann::json to_json(const EvaluationReport& e) {
  nlohmann::json j = to_json(e.report);
  j["plot"] = to_json(e.plot);
  return j;
}

/// Scores every rater found in `predictions` against `truth` (patient_id ->
/// label). Raters with finite scores also get an ROC curve; every rater gets
/// an operating point.
inline EvaluationReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                             const std::map<std::string, Label>& truth) {
  std::vector<std::string> raters;
  std::map<std::string, std::vector<const PredictionRecord*>> by_rater;
  for (const auto& p : predictions) {
    if (!truth.contains(p.patient_id)) throw Error("unknown_patient", "no ground truth for patient " + p.patient_id);
    auto& list = by_rater[p.rater_id];
    if (list.empty()) raters.push_back(p.rater_id);
    list.push_back(&p);
  }
  if (raters.empty()) throw Error("empty_input", "no predictions to evaluate");

  EvaluationReport out;
  for (const auto& rater : raters) {
    const auto& list = by_rater[rater];
    std::vector<Label> calls, labels;
    std::vector<double> scores;
    bool scored = true;
    for (const auto* p : list) {
      calls.push_back(p->call);
      labels.push_back(truth.at(p->patient_id));
      scores.push_back(p->score);
      scored = scored && std::isfinite(p->score);
    }
    const ConfusionMatrix cm = confusion(calls, labels);
    out.report.rows.push_back(diagnostic_metrics(cm, rater));
    if (cm.positives() > 0 && cm.negatives() > 0) {
      out.plot.rater_points.push_back({rater, rater_point(cm)});
      if (scored) out.plot.curves.push_back({rater, roc_curve(scores, labels)});
    }
  }
  return out;
}

/// Deterministic SVG rendering of ROC curves with reader points overlaid.
inline std::string render_roc_svg(const PlotData& plot, int size = 480) {
  static constexpr const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  static constexpr const char* kMarkers[] = {"#000000", "#7f7f7f", "#e377c2", "#17becf"};
  const double margin = 48;
  const double span = size - 2 * margin;
  const auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  const auto px = [&](double fpr) { return fmt(margin + fpr * span); };
  const auto py = [&](double tpr) { return fmt(size - margin - tpr * span); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) + "\" height=\"" +
         std::to_string(size) + "\" viewBox=\"0 0 " + std::to_string(size) + " " + std::to_string(size) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + fmt(margin) + "\" y=\"" + fmt(margin) + "\" width=\"" + fmt(span) + "\" height=\"" + fmt(span) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + px(0) + "\" y1=\"" + py(0) + "\" x2=\"" + px(1) + "\" y2=\"" + py(1) +
         "\" stroke=\"#999999\" stroke-dasharray=\"4 4\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    svg += "<text x=\"" + px(t) + "\" y=\"" + fmt(size - margin + 16) + "\" font-size=\"10\" text-anchor=\"middle\">" +
           fmt(t) + "</text>\n";
    svg += "<text x=\"" + fmt(margin - 6) + "\" y=\"" + py(t) + "\" font-size=\"10\" text-anchor=\"end\">" + fmt(t) +
           "</text>\n";
  }
  svg += "<text x=\"" + fmt(size / 2.0) + "\" y=\"" + fmt(size - 8.0) +
         "\" font-size=\"12\" text-anchor=\"middle\">False positive rate</text>\n";
  svg += "<text x=\"14\" y=\"" + fmt(size / 2.0) + "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         fmt(size / 2.0) + ")\">True positive rate</text>\n";

  for (std::size_t i = 0; i < plot.curves.size(); ++i) {
    const auto& c = plot.curves[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::string points;
    for (const auto& p : c.curve.points) points += px(p.fpr) + "," + py(p.tpr) + " ";
    if (!points.empty()) points.pop_back();
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    svg += "<text x=\"" + fmt(margin + span * 0.55) + "\" y=\"" + fmt(size - margin - 10 - 14.0 * static_cast<double>(plot.curves.size() + plot.rater_points.size() - 1 - i)) +
           "\" font-size=\"11\" fill=\"" + color + "\">" + c.model_id + " (AUC " + fmt(c.curve.auc) + ")</text>\n";
  }
  for (std::size_t i = 0; i < plot.rater_points.size(); ++i) {
    const auto& r = plot.rater_points[i];
    const char* color = kMarkers[i % std::size(kMarkers)];
    svg += "<circle cx=\"" + px(r.point.fpr) + "\" cy=\"" + py(r.point.tpr) + "\" r=\"5\" fill=\"" + color + "\"/>\n";
    svg += "<text x=\"" + fmt(margin + span * 0.55) + "\" y=\"" +
           fmt(size - margin - 10 - 14.0 * static_cast<double>(plot.rater_points.size() - 1 - i)) +
           "\" font-size=\"11\" fill=\"" + color + "\">&#9679; " + r.rater_id + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace cartimark
