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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/data/types.hpp"

namespace cartimark {

/// Binary diagnoses on the 29-patient held-out cohort: arthroscopic ground
/// truth plus five raters (two clinicians and three networks).
struct Table2Row {
  int patient_index;
  Label ground_truth;
  Label surgeon;
  Label resident;
  Label cnn1;
  Label cnn2;
  Label cnn3;
};

inline constexpr std::array<std::string_view, 5> kTable2Raters = {"surgeon", "resident", "cnn1", "cnn2", "cnn3"};

namespace table2_detail {
inline constexpr Label D = Label::defect;
inline constexpr Label N = Label::no_defect;
}  // namespace table2_detail

// clang-format off
inline constexpr std::array<Table2Row, 29> kTable2 = [] {
  using namespace table2_detail;
  return std::array<Table2Row, 29>{{
    { 1, D, D, D, D, D, N}, { 2, D, D, N, D, N, D}, { 3, D, D, N, D, N, D},
    { 4, D, D, N, D, D, D}, { 5, D, D, N, D, D, D}, { 6, D, D, D, D, D, D},
    { 7, D, D, D, D, D, D}, { 8, D, D, N, D, D, D}, { 9, D, D, N, D, D, D},
    {10, D, D, D, D, D, N}, {11, D, D, D, D, N, D}, {12, D, D, D, D, D, D},
    {13, D, N, N, D, D, D}, {14, D, D, N, D, D, D}, {15, D, D, N, D, D, D},
    {16, D, D, N, D, D, D}, {17, D, D, N, D, D, D}, {18, D, D, N, D, D, D},
    {19, D, D, D, D, D, D}, {20, D, D, N, D, D, D},
    {21, N, D, D, N, N, N}, {22, N, N, D, N, D, N}, {23, N, D, D, D, D, D},
    {24, N, N, D, N, N, N}, {25, N, N, N, D, N, D}, {26, N, D, D, N, D, N},
    {27, N, N, N, D, N, D}, {28, N, D, N, N, N, N}, {29, N, N, D, N, N, N},
  }};
}();
// clang-format on

constexpr int count_ground_truth(const std::array<Table2Row, 29>& rows, Label label) {
  int n = 0;
  for (const auto& r : rows) n += r.ground_truth == label ? 1 : 0;
  return n;
}

static_assert(count_ground_truth(kTable2, Label::defect) == 20, "bundled cohort must hold 20 defect rows");
static_assert(count_ground_truth(kTable2, Label::no_defect) == 9, "bundled cohort must hold 9 no-defect rows");

using Table2Dataset = std::vector<Table2Row>;

inline Table2Dataset bundled_table2() { return {kTable2.begin(), kTable2.end()}; }

inline Label rater_call(const Table2Row& row, std::string_view rater) {
  if (rater == "surgeon") return row.surgeon;
  if (rater == "resident") return row.resident;
  if (rater == "cnn1") return row.cnn1;
  if (rater == "cnn2") return row.cnn2;
  if (rater == "cnn3") return row.cnn3;
  throw Error("unknown_rater", "no rater column '" + std::string(rater) + "'");
}

inline void check_table2(const Table2Dataset& data) {
  int defects = 0, clear = 0;
  for (const auto& r : data) (r.ground_truth == Label::defect ? defects : clear) += 1;
  if (data.size() != 29 || defects != 20 || clear != 9) {
    throw Error("table2_invariant", "cohort must hold 29 rows (20 defect, 9 no-defect)");
  }
}

inline nlohmann::json table2_to_json(const Table2Dataset& data) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : data) {
    rows.push_back({{"patient_index", r.patient_index},
                    {"ground_truth", std::string(to_string(r.ground_truth))},
                    {"surgeon", std::string(to_string(r.surgeon))},
                    {"resident", std::string(to_string(r.resident))},
                    {"cnn1", std::string(to_string(r.cnn1))},
                    {"cnn2", std::string(to_string(r.cnn2))},
                    {"cnn3", std::string(to_string(r.cnn3))}});
  }
  return {{"version", 1}, {"rows", rows}};
}

inline Table2Dataset load_table2(const std::filesystem::path& path) {
  const auto doc = io::read_json(path);
  Table2Dataset data;
  try {
    for (const auto& j : doc.at("rows")) {
      data.push_back({j.at("patient_index").get<int>(), parse_label(j.at("ground_truth").get<std::string>()),
                      parse_label(j.at("surgeon").get<std::string>()), parse_label(j.at("resident").get<std::string>()),
                      parse_label(j.at("cnn1").get<std::string>()), parse_label(j.at("cnn2").get<std::string>()),
                      parse_label(j.at("cnn3").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("table2_invariant", e.what());
  }
  check_table2(data);
  return data;
}

}  // namespace cartimark
