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

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/diagnostics/confusion.hpp"
#include "cartimark/diagnostics/table2.hpp"

namespace cartimark {

/// Metrics as printed in the reported comparison table (fractions).
struct ReportedRow {
  std::string_view rater_id;
  double accuracy;
  double sensitivity;
  double specificity;
  double ppv;
  double npv;
};

inline constexpr std::array<ReportedRow, 5> kReportedTable3 = {{
    {"surgeon", 0.8276, 0.8261, 0.8333, 0.9500, 0.5556},
    {"resident", 0.3448, 0.5385, 0.1875, 0.3500, 0.3333},
    {"cnn1", 0.8966, 0.8696, 1.0000, 1.0000, 0.6667},
    {"cnn2", 0.7931, 0.8500, 0.6667, 0.8500, 0.6667},
    {"cnn3", 0.8276, 0.8571, 0.7500, 0.9000, 0.6667},
}};

/// Half a percentage point: the table prints two decimals of a percentage.
inline constexpr double kTable3Tolerance = 0.005;

struct CellCheck {
  std::string reported_metric;  // column name in the reported table
  std::string standard_metric;   // standard quantity it is compared against
  double reported = 0;
  Metric computed;
  bool pass = false;
};

struct RaterReproduction {
  std::string rater_id;
  ConfusionMatrix confusion;
  DiagnosticRow standard;
  CellCheck accuracy;
  std::vector<CellCheck> audit;
};

struct ReproductionReport {
  double tolerance = kTable3Tolerance;
  std::vector<RaterReproduction> raters;

  bool all_pass() const {
    for (const auto& r : raters) {
      if (!r.accuracy.pass) return false;
      for (const auto& c : r.audit) {
        if (!c.pass) return false;
      }
    }
    return true;
  }
};

namespace reproduce_detail {

inline CellCheck check(std::string reported_metric, std::string standard_metric, double reported, Metric computed,
                       double tolerance) {
  CellCheck c{std::move(reported_metric), std::move(standard_metric), reported, computed, false};
  c.pass = computed.has_value() && std::abs(*computed - reported) <= tolerance;
  return c;
}

}  // namespace reproduce_detail

/// Recomputes every rater's confusion matrix and standard metrics from the
/// per-patient calls, compares accuracy against the reported value, and
/// audits the reported sensitivity/specificity/PPV/NPV against the
/// standard PPV/NPV/sensitivity/specificity respectively.
inline ReproductionReport reproduce_paper_tables(const Table2Dataset& data, double tolerance = kTable3Tolerance) {
  using reproduce_detail::check;
  check_table2(data);
  std::vector<Label> truth;
  for (const auto& row : data) truth.push_back(row.ground_truth);

  ReproductionReport report;
  report.tolerance = tolerance;
  for (const auto& reported : kReportedTable3) {
    std::vector<Label> calls;
    for (const auto& row : data) calls.push_back(rater_call(row, reported.rater_id));
    RaterReproduction r;
    r.rater_id = std::string(reported.rater_id);
    r.confusion = confusion(calls, truth);
    r.standard = diagnostic_metrics(r.confusion, r.rater_id);
    r.accuracy = check("accuracy", "accuracy", reported.accuracy, r.standard.accuracy, tolerance);
    r.audit.push_back(check("sensitivity", "ppv", reported.sensitivity, r.standard.ppv, tolerance));
    r.audit.push_back(check("specificity", "npv", reported.specificity, r.standard.npv, tolerance));
    r.audit.push_back(check("ppv", "sensitivity", reported.ppv, r.standard.sensitivity, tolerance));
    r.audit.push_back(check("npv", "specificity", reported.npv, r.standard.specificity, tolerance));
    report.raters.push_back(std::move(r));
  }
  return report;
}

inline nlohmann::json to_json(const CellCheck& c) {
  return {{"reported_metric", c.reported_metric},
          {"standard_metric", c.standard_metric},
          {"reported", c.reported},
          {"computed", metric_json(c.computed)},
          {"pass", c.pass}};
}

inline nlohmann::json to_json(const ReproductionReport& report) {
  nlohmann::json raters = nlohmann::json::array();
  nlohmann::json standard_rows = nlohmann::json::array();
  nlohmann::json table3_rows = nlohmann::json::array();
  for (const auto& r : report.raters) {
    nlohmann::json audit = nlohmann::json::array();
    for (const auto& c : r.audit) audit.push_back(to_json(c));
    raters.push_back({{"rater_id", r.rater_id},
                      {"confusion", to_json(r.confusion)},
                      {"accuracy", to_json(r.accuracy)},
                      {"audit", audit}});
    standard_rows.push_back(to_json(r.standard));
    table3_rows.push_back(to_json(to_table3_convention(r.standard)));
  }
  return {{"tolerance", report.tolerance},
          {"all_pass", report.all_pass()},
          {"raters", raters},
          {"reports",
           {{"standard", {{"convention", "standard"}, {"rows", standard_rows}}},
            {"paper_table3", {{"convention", "paper_table3"}, {"rows", table3_rows}}}}}};
}

}  // namespace cartimark
