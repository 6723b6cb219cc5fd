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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/data/types.hpp"

namespace cartimark {

/// Defect is the positive class.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fn + fp + tn; }
  std::int64_t positives() const { return tp + fn; }
  std::int64_t negatives() const { return fp + tn; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// A ratio whose denominator may be zero; nullopt means "undefined", never 0.
using Metric = std::optional<double>;

enum class Convention { standard, paper_table3 };

inline std::string_view to_string(Convention c) { return c == Convention::standard ? "standard" : "paper_table3"; }

struct DiagnosticRow {
  std::string rater_id;
  double accuracy = 0;
  Metric sensitivity;
  Metric specificity;
  Metric ppv;
  Metric npv;
  ConfusionMatrix confusion;
};

struct DiagnosticReport {
  Convention convention = Convention::standard;
  std::vector<DiagnosticRow> rows;
};

inline ConfusionMatrix confusion(std::span<const Label> calls, std::span<const Label> truth) {
  if (calls.size() != truth.size()) throw Error("length_mismatch", "calls and truth differ in length");
  if (calls.empty()) throw Error("empty_input", "no calls to score");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const bool called = calls[i] == Label::defect;
    const bool actual = truth[i] == Label::defect;
    if (actual) {
      (called ? cm.tp : cm.fn) += 1;
    } else {
      (called ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

namespace diagnostics_detail {

inline Metric ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace diagnostics_detail

/// Standard-convention metrics for one rater.
inline DiagnosticRow diagnostic_metrics(const ConfusionMatrix& cm, std::string rater_id = {}) {
  using diagnostics_detail::ratio;
  if (cm.tp < 0 || cm.fn < 0 || cm.fp < 0 || cm.tn < 0) throw Error("invalid_matrix", "negative count");
  if (cm.total() == 0) throw Error("empty_matrix", "confusion matrix has no observations");
  DiagnosticRow row;
  row.rater_id = std::move(rater_id);
  row.confusion = cm;
  row.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  row.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  row.specificity = ratio(cm.tn, cm.tn + cm.fp);
  row.ppv = ratio(cm.tp, cm.tp + cm.fp);
  row.npv = ratio(cm.tn, cm.tn + cm.fn);
  return row;
}

/// Relabels a standard row the way the reported comparison table does:
/// its "sensitivity" column holds PPV, "specificity" holds NPV, and
/// "PPV"/"NPV" hold sensitivity/specificity.
inline DiagnosticRow to_table3_convention(const DiagnosticRow& standard) {
  DiagnosticRow row = standard;
  row.sensitivity = standard.ppv;
  row.specificity = standard.npv;
  row.ppv = standard.sensitivity;
  row.npv = standard.specificity;
  return row;
}

struct RaterPoint {
  double fpr = 0;
  double tpr = 0;
};

/// Operating point of a binary-only rater on ROC axes.
inline RaterPoint rater_point(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("empty_matrix", "confusion matrix has no observations");
  if (cm.positives() == 0 || cm.negatives() == 0) {
    throw Error("single_class", "rater point needs both classes in the truth");
  }
  return {static_cast<double>(cm.fp) / static_cast<double>(cm.negatives()),
          static_cast<double>(cm.tp) / static_cast<double>(cm.positives())};
}

inline nlohmann::json metric_json(const Metric& m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fn", cm.fn}, {"fp", cm.fp}, {"tn", cm.tn}};
}

inline nlohmann::json to_json(const DiagnosticRow& row) {
  return {{"rater_id", row.rater_id},
          {"accuracy", row.accuracy},
          {"sensitivity", metric_json(row.sensitivity)},
          {"specificity", metric_json(row.specificity)},
          {"ppv", metric_json(row.ppv)},
          {"npv", metric_json(row.npv)},
          {"confusion", to_json(row.confusion)}};
}

inline nlohmann::json to_json(const DiagnosticReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) rows.push_back(to_json(r));
  return {{"convention", std::string(to_string(report.convention))}, {"rows", rows}};
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  return {j.at("tp").get<std::int64_t>(), j.at("fn").get<std::int64_t>(), j.at("fp").get<std::int64_t>(),
          j.at("tn").get<std::int64_t>()};
}

inline Metric metric_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline DiagnosticRow row_from_json(const nlohmann::json& j) {
  DiagnosticRow row;
  row.rater_id = j.value("rater_id", std::string());
  row.accuracy = j.at("accuracy").get<double>();
  row.sensitivity = metric_from_json(j.at("sensitivity"));
  row.specificity = metric_from_json(j.at("specificity"));
  row.ppv = metric_from_json(j.at("ppv"));
  row.npv = metric_from_json(j.at("npv"));
  row.confusion = confusion_from_json(j.at("confusion"));
  return row;
}

}  // namespace cartimark
