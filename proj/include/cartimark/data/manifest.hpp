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
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/data/image.hpp"
#include "cartimark/data/types.hpp"

namespace cartimark {

struct Violation {
  std::string patient_id;
  std::string rule;
  std::string detail;
};

namespace manifest_detail {

inline std::string where(std::size_t index, const std::string& patient_id) {
  std::string s = "record " + std::to_string(index);
  if (!patient_id.empty()) s += " (patient " + patient_id + ")";
  return s;
}

inline ImageRef parse_image(const nlohmann::json& j, const std::filesystem::path& base) {
  ImageRef ref;
  ref.uri = io::resolve(base, j.at("uri").get<std::string>()).string();
  ref.width = j.at("width").get<int>();
  ref.height = j.at("height").get<int>();
  ref.channels = j.value("channels", 1);
  ref.bit_depth = j.value("bit_depth", 8);
  return ref;
}

}  // namespace manifest_detail

/// Checks every type invariant. Violations are data: an empty result means the
/// manifest is valid. Image files are probed for readability.
inline std::vector<Violation> validate_manifest(const Manifest& manifest) {
  std::vector<Violation> out;
  if (manifest.records.empty()) out.push_back({"", "empty_manifest", "manifest has no records"});
  std::set<std::string> seen;
  for (const auto& record : manifest.records) {
    if (record.patient_id.empty()) out.push_back({"", "empty_patient_id", "record without patient_id"});
    if (!seen.insert(record.patient_id).second) {
      out.push_back({record.patient_id, "duplicate_patient_id", record.patient_id});
    }
    for (View v : kViews) {
      const auto it = record.images.find(v);
      if (it == record.images.end()) {
        out.push_back({record.patient_id, "missing_view", std::string(to_string(v))});
        continue;
      }
      const ImageRef& ref = it->second;
      if (ref.width <= 0 || ref.height <= 0) {
        out.push_back({record.patient_id, "invalid_dimensions", ref.uri});
      }
      if (ref.channels != 1 && ref.channels != 3) {
        out.push_back({record.patient_id, "invalid_channels", ref.uri});
      }
      try {
        const PngHeader header = read_png_header(ref.uri);
        if (header.width != ref.width || header.height != ref.height) {
          out.push_back({record.patient_id, "dimension_mismatch", ref.uri});
        }
      } catch (const Error&) {
        out.push_back({record.patient_id, "unreadable_image", ref.uri});
      }
    }
  }
  return out;
}

/// Parses a manifest document. Structural problems raise Error naming the
/// record index; image readability is left to validate_manifest().
inline Manifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  using manifest_detail::where;
  Manifest manifest;
  try {
    manifest.dataset_name = doc.at("dataset_name").get<std::string>();
    manifest.source = parse_source(doc.value("source", std::string("clinical")));
    manifest.created = doc.value("created", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_manifest", std::string("manifest header: ") + e.what());
  }
  if (!doc.contains("records") || !doc["records"].is_array()) {
    throw Error("malformed_manifest", "manifest has no records array");
  }
  std::set<std::string> seen;
  std::size_t index = 0;
  for (const auto& j : doc["records"]) {
    StudyRecord record;
    try {
      record.patient_id = j.at("patient_id").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw Error("malformed_record", where(index, "") + ": missing patient_id");
    }
    try {
      record.label = parse_label(j.at("label").get<std::string>());
      if (j.contains("laterality") && !j["laterality"].is_null()) {
        record.laterality = parse_laterality(j["laterality"].get<std::string>());
      }
      const auto& images = j.at("images");
      for (auto it = images.begin(); it != images.end(); ++it) {
        record.images[parse_view(it.key())] = manifest_detail::parse_image(it.value(), base_dir);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed_record", where(index, record.patient_id) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("malformed_record", where(index, record.patient_id) + ": " + e.what());
    }
    for (View v : kViews) {
      if (!record.images.contains(v)) {
        throw Error("missing_view", where(index, record.patient_id) + ": missing " + std::string(to_string(v)) + " view");
      }
      const ImageRef& ref = record.images.at(v);
      if (ref.width <= 0 || ref.height <= 0 || (ref.channels != 1 && ref.channels != 3)) {
        throw Error("malformed_record", where(index, record.patient_id) + ": invalid " + std::string(to_string(v)) + " image geometry");
      }
    }
    if (!seen.insert(record.patient_id).second) {
      throw Error("duplicate_patient_id", where(index, record.patient_id) + ": duplicate patient_id");
    }
    manifest.records.push_back(std::move(record));
    ++index;
  }
  if (manifest.records.empty()) throw Error("empty_manifest", "manifest has no records");
  return manifest;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("missing_file", "manifest not found: " + path.string());
  return parse_manifest(io::read_json(path), path.parent_path());
}

inline nlohmann::json manifest_to_json(const Manifest& manifest, const std::filesystem::path& base_dir) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : manifest.records) {
    nlohmann::json images = nlohmann::json::object();
    for (const auto& [view, ref] : r.images) {
      images[std::string(to_string(view))] = {{"uri", io::relativize(base_dir, ref.uri)},
                                              {"width", ref.width},
                                              {"height", ref.height},
                                              {"channels", ref.channels},
                                              {"bit_depth", ref.bit_depth}};
    }
    nlohmann::json j = {{"patient_id", r.patient_id}, {"label", std::string(to_string(r.label))}, {"images", images}};
    if (r.laterality) j["laterality"] = std::string(to_string(*r.laterality));
    records.push_back(std::move(j));
  }
  return {{"dataset_name", manifest.dataset_name},
          {"created", manifest.created},
          {"source", std::string(to_string(manifest.source))},
          {"records", records}};
}

inline void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  const auto base = std::filesystem::absolute(path).parent_path();
  Manifest copy = manifest;
  for (auto& r : copy.records) {
    for (auto& [view, ref] : r.images) ref.uri = std::filesystem::absolute(ref.uri).lexically_normal().string();
  }
  io::write_json(path, manifest_to_json(copy, base));
}

}  // namespace cartimark
