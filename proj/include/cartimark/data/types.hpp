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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cartimark/core/error.hpp"

namespace cartimark {

enum class View { sagittal, coronal };
enum class Label { defect, no_defect };
enum class Laterality { left, right };
enum class Source { clinical, phantom };
enum class Subset { train, validation, test };

inline constexpr std::array<View, 2> kViews = {View::sagittal, View::coronal};

inline std::string_view to_string(View v) { return v == View::sagittal ? "sagittal" : "coronal"; }
inline std::string_view to_string(Label l) { return l == Label::defect ? "defect" : "no_defect"; }
inline std::string_view to_string(Laterality l) { return l == Laterality::left ? "left" : "right"; }
inline std::string_view to_string(Source s) { return s == Source::clinical ? "clinical" : "phantom"; }
inline std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::train: return "train";
    case Subset::validation: return "validation";
    case Subset::test: return "test";
  }
  return "test";
}

inline View parse_view(std::string_view s) {
  if (s == "sagittal") return View::sagittal;
  if (s == "coronal") return View::coronal;
  throw Error("invalid_view", "unknown view '" + std::string(s) + "'");
}

/// Accepts "no-defect" as written in clinical tables as well as "no_defect".
inline Label parse_label(std::string_view s) {
  if (s == "defect") return Label::defect;
  if (s == "no_defect" || s == "no-defect") return Label::no_defect;
  throw Error("invalid_label", "unknown label '" + std::string(s) + "'");
}

inline Laterality parse_laterality(std::string_view s) {
  if (s == "left") return Laterality::left;
  if (s == "right") return Laterality::right;
  throw Error("invalid_laterality", "unknown laterality '" + std::string(s) + "'");
}

inline Source parse_source(std::string_view s) {
  if (s == "clinical") return Source::clinical;
  if (s == "phantom") return Source::phantom;
  throw Error("invalid_source", "unknown source '" + std::string(s) + "'");
}

inline Subset parse_subset(std::string_view s) {
  if (s == "train") return Subset::train;
  if (s == "validation") return Subset::validation;
  if (s == "test") return Subset::test;
  throw Error("invalid_subset", "unknown subset '" + std::string(s) + "'");
}

struct ImageRef {
  std::string uri;
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
};

struct StudyRecord {
  std::string patient_id;
  Label label = Label::no_defect;
  std::map<View, ImageRef> images;
  std::optional<Laterality> laterality;

  const ImageRef& image(View v) const {
    const auto it = images.find(v);
    if (it == images.end()) {
      throw Error("missing_view", "patient " + patient_id + " has no " + std::string(to_string(v)) + " view");
    }
    return it->second;
  }
};

/// Image URIs are held resolved (absolute or relative to the process working
/// directory); save_manifest() writes them back relative to the manifest file.
struct Manifest {
  std::string dataset_name;
  std::string created;
  Source source = Source::clinical;
  std::vector<StudyRecord> records;

  std::size_t count(Label label) const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.label == label ? 1 : 0;
    return n;
  }

  const StudyRecord* find(std::string_view patient_id) const {
    for (const auto& r : records) {
      if (r.patient_id == patient_id) return &r;
    }
    return nullptr;
  }
};

}  // namespace cartimark
