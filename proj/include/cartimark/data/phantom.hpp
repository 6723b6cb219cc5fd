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
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "cartimark/core/error.hpp"
#include "cartimark/core/random.hpp"
#include "cartimark/data/image.hpp"
#include "cartimark/data/manifest.hpp"
#include "cartimark/data/types.hpp"

namespace cartimark {

/// Synthetic dual-view cohort. Each image shows a smooth bright band (the
/// synthetic cartilage) on a darker background; defect cases carry a circular
/// notch bitten out of the band's upper margin at the same relative position
/// in both views.
struct PhantomConfig {
  int n_patients = 60;
  std::uint64_t seed = 0;
  double defect_prevalence = 0.5;
  int image_size = 64;
  double noise_sigma = 0.02;
  double defect_radius_min = 3.0;
  double defect_radius_max = 6.0;
  std::string dataset_name = "phantom";
};

/// Per-patient rendering parameters, exposed for tests.
struct PhantomGeometry {
  double band_center = 0;      // row of the band centre line at the image centre
  double band_thickness = 0;   // vertical extent in pixels
  double band_level = 0.8;
  double background_level = 0.2;
  bool has_notch = false;
  double notch_position = 0.5;  // fraction of image width
  double notch_radius = 0;
};

inline constexpr const char* kPhantomTimestamp = "1970-01-01T00:00:00Z";

namespace phantom_detail {

/// Centre line of the band. Coronal slices show a straight plateau, sagittal
/// slices a condyle-like arc.
inline double centre_line(View view, const PhantomGeometry& g, double x, int size) {
  if (view == View::coronal) return g.band_center;
  const double u = (x - size / 2.0) / (size / 2.0);
  return g.band_center + (size / 8.0) * u * u - size / 16.0;
}

}  // namespace phantom_detail

inline double phantom_band_thickness(int image_size) { return image_size / 4.0; }

inline void check_phantom_config(const PhantomConfig& c) {
  if (c.n_patients < 2) throw Error("invalid_config", "n_patients must be at least 2");
  if (!(c.defect_prevalence > 0.0 && c.defect_prevalence < 1.0)) {
    throw Error("invalid_config", "defect_prevalence must lie in (0, 1)");
  }
  if (c.image_size < 16) throw Error("invalid_config", "image_size must be at least 16");
  if (c.noise_sigma < 0) throw Error("invalid_config", "noise_sigma must be non-negative");
  if (c.defect_radius_min < 1.0 || c.defect_radius_max < c.defect_radius_min) {
    throw Error("invalid_config", "defect radius range must satisfy 1 <= min <= max");
  }
  if (c.defect_radius_max >= phantom_band_thickness(c.image_size)) {
    throw Error("invalid_config", "defect radius leaves no band thickness headroom");
  }
}

inline PhantomGeometry phantom_geometry(const PhantomConfig& c, std::size_t index, bool defect) {
  Rng rng = Rng::derive(c.seed, index);
  PhantomGeometry g;
  const double size = c.image_size;
  g.band_thickness = phantom_band_thickness(c.image_size);
  g.band_center = size / 2.0 + rng.uniform(-size / 16.0, size / 16.0);
  g.band_level = rng.uniform(0.7, 0.9);
  g.background_level = rng.uniform(0.1, 0.25);
  g.notch_position = rng.uniform(0.25, 0.75);
  g.notch_radius = rng.uniform(c.defect_radius_min, c.defect_radius_max);
  g.has_notch = defect;
  return g;
}

/// Noise-free intensity at pixel centre (x, y).
inline double phantom_intensity(View view, const PhantomGeometry& g, int size, int x, int y) {
  const double px = x + 0.5;
  const double py = y + 0.5;
  const double centre = phantom_detail::centre_line(view, g, px, size);
  const bool in_band = std::abs(py - centre) <= g.band_thickness / 2.0;
  if (!in_band) return g.background_level;
  if (g.has_notch) {
    const double nx = g.notch_position * size;
    const double ny = phantom_detail::centre_line(view, g, nx, size) - g.band_thickness / 2.0;
    if ((px - nx) * (px - nx) + (py - ny) * (py - ny) <= g.notch_radius * g.notch_radius) return g.background_level;
  }
  return g.band_level;
}

inline Image render_phantom(const PhantomConfig& c, std::size_t index, bool defect, View view) {
  const PhantomGeometry g = phantom_geometry(c, index, defect);
  Rng noise = Rng::derive(c.seed ^ 0xA5A5A5A5ULL, index * 2 + (view == View::sagittal ? 0 : 1));
  Image image;
  image.width = image.height = c.image_size;
  image.channels = 1;
  image.bit_depth = 8;
  image.pixels.resize(static_cast<std::size_t>(c.image_size) * c.image_size);
  for (int y = 0; y < c.image_size; ++y) {
    for (int x = 0; x < c.image_size; ++x) {
      double v = phantom_intensity(view, g, c.image_size, x, y);
      if (c.noise_sigma > 0) v += c.noise_sigma * noise.normal();
      image.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return image;
}

inline std::string phantom_patient_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%04zu", index + 1);
  return buf;
}

/// Writes n_patients x 2 grayscale PNGs under out_dir/images and returns the
/// manifest referencing them. Deterministic per config.
inline Manifest generate_phantoms(const PhantomConfig& c, const std::filesystem::path& out_dir) {
  check_phantom_config(c);
  const auto n = static_cast<std::size_t>(c.n_patients);
  auto n_defect = static_cast<std::size_t>(std::llround(c.defect_prevalence * static_cast<double>(n)));
  n_defect = std::clamp<std::size_t>(n_defect, 1, n - 1);

  std::vector<bool> defect(n, false);
  std::fill(defect.begin(), defect.begin() + static_cast<std::ptrdiff_t>(n_defect), true);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(c.seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw Error("io_error", "cannot create " + (out_dir / "images").string());

  Manifest manifest;
  manifest.dataset_name = c.dataset_name;
  manifest.created = kPhantomTimestamp;
  manifest.source = Source::phantom;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_defect = defect[order[i]];
    StudyRecord record;
    record.patient_id = phantom_patient_id(i);
    record.label = is_defect ? Label::defect : Label::no_defect;
    record.laterality = (i % 2 == 0) ? Laterality::right : Laterality::left;
    for (View v : kViews) {
      const Image image = render_phantom(c, i, is_defect, v);
      const auto path = out_dir / "images" / (record.patient_id + "_" + std::string(to_string(v)) + ".png");
      write_png(path, image);
      record.images[v] = ImageRef{path.string(), c.image_size, c.image_size, 1, 8};
    }
    manifest.records.push_back(std::move(record));
  }
  return manifest;
}

}  // namespace cartimark
