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
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/data/types.hpp"

namespace cartimark {

/// One rater's verdict on one case. Model raters carry a continuous score and
/// the threshold that produced the call; human raters carry NaN for both.
struct PredictionRecord {
  std::string patient_id;
  std::string rater_id;
  double score = std::numeric_limits<double>::quiet_NaN();
  Label call = Label::no_defect;
  double threshold = std::numeric_limits<double>::quiet_NaN();

  bool is_human() const { return std::isnan(score); }
};

inline PredictionRecord model_prediction(std::string patient_id, std::string rater_id, double score, double threshold) {
  return {std::move(patient_id), std::move(rater_id), score, score >= threshold ? Label::defect : Label::no_defect,
          threshold};
}

inline nlohmann::json to_json(const PredictionRecord& r) {
  const auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  return {{"patient_id", r.patient_id},
          {"rater_id", r.rater_id},
          {"score", num(r.score)},
          {"call", std::string(to_string(r.call))},
          {"threshold", num(r.threshold)}};
}

inline PredictionRecord prediction_from_json(const nlohmann::json& j) {
  const auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  PredictionRecord r;
  r.patient_id = j.at("patient_id").get<std::string>();
  r.rater_id = j.at("rater_id").get<std::string>();
  r.score = num(j.value("score", nlohmann::json(nullptr)));
  r.call = parse_label(j.at("call").get<std::string>());
  r.threshold = num(j.value("threshold", nlohmann::json(nullptr)));
  return r;
}

inline std::string predictions_to_jsonl(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

inline void save_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path) {
  io::write_file_atomic(path, predictions_to_jsonl(records));
}

inline std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(prediction_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("malformed_prediction", path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cartimark
