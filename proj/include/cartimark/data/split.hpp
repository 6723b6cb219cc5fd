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
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/core/random.hpp"
#include "cartimark/data/types.hpp"

namespace cartimark {

/// Fractions for (train, validation, test).
using SplitRatios = std::array<double, 3>;

struct SplitAssignment {
  std::map<std::string, Subset> assignment;
  std::uint64_t seed = 0;
  SplitRatios ratios{0.8, 0.1, 0.1};
  bool stratified = true;

  /// Patient ids of one subset in canonical (sorted) order.
  std::vector<std::string> patients(Subset subset) const {
    std::vector<std::string> out;
    for (const auto& [id, s] : assignment) {
      if (s == subset) out.push_back(id);
    }
    return out;
  }

  std::size_t size(Subset subset) const {
    return static_cast<std::size_t>(
        std::count_if(assignment.begin(), assignment.end(), [&](const auto& kv) { return kv.second == subset; }));
  }

  Subset subset_of(const std::string& patient_id) const {
    const auto it = assignment.find(patient_id);
    if (it == assignment.end()) throw Error("unknown_patient", "patient " + patient_id + " is not in the split");
    return it->second;
  }
};

struct SubsetSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Floor on test and validation, remainder to train.
inline SubsetSizes subset_sizes(std::size_t n, const SplitRatios& ratios) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::abs(sum - 1.0) > 1e-9) {
    throw Error("invalid_ratios", "ratios must be positive and sum to 1");
  }
  SubsetSizes sizes;
  // The epsilon keeps exact products such as 10 * 0.1 from flooring to 0.
  sizes.test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[2] + 1e-9));
  sizes.validation = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[1] + 1e-9));
  if (sizes.test + sizes.validation > n) throw Error("empty_subset", "ratios leave no training patients");
  sizes.train = n - sizes.test - sizes.validation;
  if (sizes.train == 0 || sizes.validation == 0 || sizes.test == 0) {
    throw Error("empty_subset", "split of " + std::to_string(n) + " patients leaves an empty subset");
  }
  return sizes;
}

/// Patient-level split. Records are first put in canonical patient_id order so
/// the result does not depend on manifest order. In stratified mode each
/// class is shuffled separately and allotted per subset by rounding the
/// subset size times the overall prevalence.
inline SplitAssignment split_dataset(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed,
                                     bool stratified = true) {
  if (manifest.records.empty()) throw Error("empty_manifest", "cannot split an empty manifest");
  const SubsetSizes sizes = subset_sizes(manifest.records.size(), ratios);

  std::vector<std::string> positives, negatives, all;
  for (const auto& r : manifest.records) {
    (r.label == Label::defect ? positives : negatives).push_back(r.patient_id);
    all.push_back(r.patient_id);
  }
  std::sort(positives.begin(), positives.end());
  std::sort(negatives.begin(), negatives.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
    throw Error("duplicate_patient_id", "manifest contains duplicate patient ids");
  }

  SplitAssignment split;
  split.seed = seed;
  split.ratios = ratios;
  split.stratified = stratified;
  Rng rng(seed);

  if (!stratified) {
    rng.shuffle(std::span<std::string>(all));
    for (std::size_t i = 0; i < all.size(); ++i) {
      const Subset s = i < sizes.test ? Subset::test
                       : i < sizes.test + sizes.validation ? Subset::validation
                                                            : Subset::train;
      split.assignment[all[i]] = s;
    }
    return split;
  }

  rng.shuffle(std::span<std::string>(positives));
  rng.shuffle(std::span<std::string>(negatives));
  const double prevalence = static_cast<double>(positives.size()) / static_cast<double>(all.size());
  const auto allot = [&](std::size_t subset_size) {
    auto k = static_cast<std::size_t>(std::llround(prevalence * static_cast<double>(subset_size)));
    return std::min(k, subset_size);
  };
  std::size_t pos_test = allot(sizes.test);
  std::size_t pos_val = allot(sizes.validation);
  // Keep the allotment feasible for both classes.
  pos_test = std::clamp(pos_test, sizes.test > negatives.size() ? sizes.test - negatives.size() : 0,
                        std::min(sizes.test, positives.size()));
  const std::size_t pos_left = positives.size() - pos_test;
  const std::size_t neg_left = negatives.size() - (sizes.test - pos_test);
  pos_val = std::clamp(pos_val, sizes.validation > neg_left ? sizes.validation - neg_left : 0,
                       std::min(sizes.validation, pos_left));

  std::size_t p = 0, q = 0;
  const auto take = [&](std::size_t n_pos, std::size_t n_total, Subset s) {
    for (std::size_t i = 0; i < n_pos; ++i) split.assignment[positives[p++]] = s;
    for (std::size_t i = n_pos; i < n_total; ++i) split.assignment[negatives[q++]] = s;
  };
  take(pos_test, sizes.test, Subset::test);
  take(pos_val, sizes.validation, Subset::validation);
  take(positives.size() - p, sizes.train, Subset::train);
  return split;
}

inline nlohmann::json split_to_json(const SplitAssignment& split) {
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [id, s] : split.assignment) assignment[id] = std::string(to_string(s));
  return {{"seed", split.seed},
          {"ratios", {split.ratios[0], split.ratios[1], split.ratios[2]}},
          {"stratified", split.stratified},
          {"assignment", assignment}};
}

inline SplitAssignment split_from_json(const nlohmann::json& j) {
  SplitAssignment split;
  try {
    split.seed = j.at("seed").get<std::uint64_t>();
    const auto& r = j.at("ratios");
    split.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
    split.stratified = j.at("stratified").get<bool>();
    for (auto it = j.at("assignment").begin(); it != j.at("assignment").end(); ++it) {
      split.assignment[it.key()] = parse_subset(it.value().get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_split", e.what());
  }
  return split;
}

inline void save_split(const SplitAssignment& split, const std::filesystem::path& path) {
  io::write_json(path, split_to_json(split));
}

inline SplitAssignment load_split(const std::filesystem::path& path) { return split_from_json(io::read_json(path)); }

/// Throws unless the split covers exactly the manifest's patients.
inline void check_split_matches(const Manifest& manifest, const SplitAssignment& split) {
  if (split.assignment.size() != manifest.records.size()) {
    throw Error("split_mismatch", "split does not cover the manifest");
  }
  for (const auto& r : manifest.records) {
    if (!split.assignment.contains(r.patient_id)) {
      throw Error("split_mismatch", "patient " + r.patient_id + " missing from split");
    }
  }
}

}  // namespace cartimark
