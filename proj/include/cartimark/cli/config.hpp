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

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace cartimark::cli {

/// Reads TOML, or JSON with the same keys: top-level scalars set global
/// flags and objects named after a subcommand set that subcommand's flags.
class TomlOrJsonConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text{std::istreambuf_iterator<char>(input), std::istreambuf_iterator<char>()};
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream toml(text);
      return CLI::ConfigTOML::from_config(toml);
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    std::istringstream toml(json_to_toml(j));
    return CLI::ConfigTOML::from_config(toml);
  }

  static std::string json_to_toml(const nlohmann::json& j) {
    std::string scalars, sections;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        sections += "[" + key + "]\n";
        for (const auto& [k, v] : value.items()) sections += k + " = " + toml_value(v) + "\n";
      } else {
        scalars += key + " = " + toml_value(value) + "\n";
      }
    }
    return scalars + sections;
  }

 private:
  static std::string toml_value(const nlohmann::json& v) {
    if (v.is_array()) {
      std::string out = "[";
      for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_value(v[i]);
      return out + "]";
    }
    if (v.is_object()) throw CLI::ConversionError("config nesting deeper than one section is not supported");
    return v.dump();
  }
};

}  // namespace cartimark::cli
