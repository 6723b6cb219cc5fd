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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cartimark/core/random.hpp"
#include "cartimark/data/manifest.hpp"
#include "cartimark/data/phantom.hpp"
#include "cartimark/data/split.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cartimark;
using namespace cartimark::oracle;
using cartimark::testing::TempDir;

namespace {

nlohmann::json record_json(const std::string& id, const std::string& label, bool coronal = true) {
  nlohmann::json images = {{"sagittal", {{"uri", "a.png"}, {"width", 4}, {"height", 4}, {"channels", 1}, {"bit_depth", 8}}}};
  if (coronal) images["coronal"] = {{"uri", "b.png"}, {"width", 4}, {"height", 4}, {"channels", 1}, {"bit_depth", 8}};
  return {{"patient_id", id}, {"label", label}, {"images", images}};
}

}  // namespace

TEST(Manifest, PhantomRoundTripKeepsCounts) {
  TempDir dir("manifest");
  PhantomConfig config;
  config.n_patients = 10;
  config.seed = 3;
  config.image_size = 16;
  config.defect_radius_min = 1;
  config.defect_radius_max = 2;
  const Manifest m = generate_phantoms(config, dir.path());
  save_manifest(m, dir / "manifest.json");
  const Manifest loaded = load_manifest(dir / "manifest.json");
  ASSERT_EQ(loaded.records.size(), 10u);
  EXPECT_EQ(loaded.count(Label::defect), m.count(Label::defect));
  EXPECT_EQ(loaded.count(Label::no_defect), m.count(Label::no_defect));
  EXPECT_EQ(loaded.source, Source::phantom);
  EXPECT_TRUE(validate_manifest(loaded).empty());
  EXPECT_EQ(loaded.records[4].image(View::coronal).uri, m.records[4].image(View::coronal).uri);
}

TEST(Manifest, MissingCoronalViewNamesPatientAndView) {
  TempDir dir("manifest");
  nlohmann::json doc = {{"dataset_name", "x"}, {"source", "clinical"},
                        {"records", {record_json("A1", "defect"), record_json("B2", "no_defect", false)}}};
  io::write_json(dir / "m.json", doc);
  try {
    load_manifest(dir / "m.json");
    FAIL() << "expected missing_view";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "missing_view");
    EXPECT_NE(std::string(e.what()).find("B2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("coronal"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos);
  }
}

TEST(Manifest, ErrorsCarryCodes) {
  TempDir dir("manifest");
  EXPECT_THROW(
      {
        try {
          load_manifest(dir / "absent.json");
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), "missing_file");
          throw;
        }
      },
      Error);

  io::write_json(dir / "dup.json", {{"dataset_name", "x"}, {"records", {record_json("A", "defect"), record_json("A", "defect")}}});
  try {
    load_manifest(dir / "dup.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "duplicate_patient_id");
  }

  io::write_json(dir / "bad.json", {{"dataset_name", "x"}, {"records", {record_json("A", "maybe")}}});
  try {
    load_manifest(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "malformed_record");
    EXPECT_NE(std::string(e.what()).find("record 0"), std::string::npos);
  }
}

TEST(Manifest, ReferenceCohortCounts) {
  const Manifest m = synthetic_manifest(297, 207);
  TempDir dir("manifest");
  save_manifest(m, dir / "m.json");
  const Manifest loaded = load_manifest(dir / "m.json");
  EXPECT_EQ(loaded.count(Label::defect), 207u);
  EXPECT_EQ(loaded.count(Label::no_defect), 90u);
}

TEST(ValidateManifest, Rules) {
  TempDir dir("validate");
  PhantomConfig config;
  config.n_patients = 4;
  config.image_size = 16;
  config.defect_radius_min = 1;
  config.defect_radius_max = 2;
  Manifest m = generate_phantoms(config, dir.path());
  EXPECT_TRUE(validate_manifest(m).empty());

  Manifest dup = m;
  dup.records[1].patient_id = dup.records[0].patient_id;
  const auto v1 = validate_manifest(dup);
  ASSERT_EQ(v1.size(), 1u);
  EXPECT_EQ(v1[0].rule, "duplicate_patient_id");

  Manifest dangling = m;
  dangling.records[2].images[View::sagittal].uri = (dir / "nowhere.png").string();
  const auto v2 = validate_manifest(dangling);
  ASSERT_EQ(v2.size(), 1u);
  EXPECT_EQ(v2[0].rule, "unreadable_image");
  EXPECT_EQ(v2[0].detail, (dir / "nowhere.png").string());
  EXPECT_EQ(v2[0].patient_id, m.records[2].patient_id);

  Manifest missing = m;
  missing.records[3].images.erase(View::coronal);
  const auto v3 = validate_manifest(missing);
  ASSERT_EQ(v3.size(), 1u);
  EXPECT_EQ(v3[0].rule, "missing_view");
}

TEST(Split, SubsetSizes) {
  const auto a = subset_sizes(297, {0.8, 0.1, 0.1});
  EXPECT_EQ(a.train, 239u);
  EXPECT_EQ(a.validation, 29u);
  EXPECT_EQ(a.test, 29u);
  const auto b = subset_sizes(10, {0.8, 0.1, 0.1});
  EXPECT_EQ(b.train, 8u);
  EXPECT_EQ(b.validation, 1u);
  EXPECT_EQ(b.test, 1u);
  EXPECT_THROW(subset_sizes(5, {0.8, 0.1, 0.1}), Error);
  EXPECT_THROW(subset_sizes(100, {0.8, 0.1, 0.2}), Error);
  EXPECT_THROW(subset_sizes(100, {0.9, 0.2, -0.1}), Error);
}

TEST(Split, ReferenceCohortTestSetPrevalence) {
  const Manifest m = synthetic_manifest(297, 207);
  const auto split = split_dataset(m, {0.8, 0.1, 0.1}, 42, true);
  EXPECT_EQ(split.size(Subset::test), 29u);
  std::size_t defects = 0;
  for (const auto& id : split.patients(Subset::test)) defects += m.find(id)->label == Label::defect ? 1 : 0;
  EXPECT_EQ(defects, 20u);
}

TEST(Split, DeterministicAndOrderIndependent) {
  Manifest m = synthetic_manifest(50, 20);
  const auto a = split_dataset(m, {0.8, 0.1, 0.1}, 9, true);
  const auto b = split_dataset(m, {0.8, 0.1, 0.1}, 9, true);
  EXPECT_EQ(a.assignment, b.assignment);
  std::reverse(m.records.begin(), m.records.end());
  const auto c = split_dataset(m, {0.8, 0.1, 0.1}, 9, true);
  EXPECT_EQ(a.assignment, c.assignment);
  const auto d = split_dataset(m, {0.8, 0.1, 0.1}, 10, true);
  EXPECT_NE(a.assignment, d.assignment);
}

TEST(Split, JsonRoundTrip) {
  const Manifest m = synthetic_manifest(30, 12);
  const auto split = split_dataset(m, {0.8, 0.1, 0.1}, 5, false);
  const auto back = split_from_json(split_to_json(split));
  EXPECT_EQ(back.assignment, split.assignment);
  EXPECT_EQ(back.seed, 5u);
  EXPECT_FALSE(back.stratified);
}

// Partition, patient-level integrity and stratification over seeded manifests.
TEST(SplitProperty, PartitionAndStratification) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + rng.below(300);
    const std::size_t positives = 1 + rng.below(n - 1);
    const Manifest m = synthetic_manifest(n, positives, "p" + std::to_string(trial) + "_");
    for (bool stratified : {true, false}) {
      const auto split = split_dataset(m, {0.8, 0.1, 0.1}, rng.next(), stratified);
      EXPECT_EQ(split_violation(m, split, {0.8, 0.1, 0.1}, stratified), "") << "trial " << trial;
    }
  }
}

TEST(Phantom, PrevalenceRounding) {
  TempDir dir("phantom");
  PhantomConfig config;
  config.n_patients = 20;
  config.defect_prevalence = 0.5;
  config.seed = 7;
  config.image_size = 16;
  config.defect_radius_min = 1;
  config.defect_radius_max = 2;
  const Manifest m = generate_phantoms(config, dir.path());
  EXPECT_EQ(m.count(Label::defect), 10u);
  EXPECT_EQ(m.count(Label::no_defect), 10u);
}

TEST(Phantom, ZeroNoiseNotchIsSeparable) {
  TempDir dir("phantom");
  PhantomConfig config;
  config.n_patients = 12;
  config.noise_sigma = 0;
  config.seed = 11;
  const Manifest m = generate_phantoms(config, dir.path());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    const bool defect = r.label == Label::defect;
    const PhantomGeometry g = phantom_geometry(config, i, defect);
    for (View v : kViews) {
      const Image image = read_png(r.image(v).uri);
      // Minimum intensity over the band pixels of the no-notch geometry.
      PhantomGeometry band = g;
      band.has_notch = false;
      double band_min = 1.0, background_max = 0.0, background_min = 1.0;
      for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
          const double value = image.at(x, y);
          if (phantom_intensity(v, band, config.image_size, x, y) == band.band_level) {
            band_min = std::min(band_min, value);
          } else {
            background_max = std::max(background_max, value);
            background_min = std::min(background_min, value);
          }
        }
      }
      const double background_variation = background_max - background_min;
      if (defect) {
        EXPECT_GT(g.band_level - band_min, 10 * background_variation + 0.3);
      } else {
        EXPECT_NEAR(band_min, g.band_level, 1.0 / 255);
      }
      // Threshold oracle: the band minimum classifies perfectly.
      EXPECT_EQ(band_min < (g.band_level + g.background_level) / 2, defect);
    }
  }
}

TEST(Phantom, ByteIdenticalAcrossRuns) {
  TempDir a("phantom-a"), b("phantom-b");
  PhantomConfig config;
  config.n_patients = 6;
  config.seed = 99;
  const Manifest ma = generate_phantoms(config, a.path());
  const Manifest mb = generate_phantoms(config, b.path());
  save_manifest(ma, a / "manifest.json");
  save_manifest(mb, b / "manifest.json");
  EXPECT_EQ(cartimark::testing::file_hash(a / "manifest.json"), cartimark::testing::file_hash(b / "manifest.json"));
  for (std::size_t i = 0; i < ma.records.size(); ++i) {
    for (View v : kViews) {
      EXPECT_EQ(cartimark::testing::file_hash(ma.records[i].image(v).uri),
                cartimark::testing::file_hash(mb.records[i].image(v).uri));
    }
  }
  config.seed = 100;
  TempDir c("phantom-c");
  const Manifest mc = generate_phantoms(config, c.path());
  EXPECT_NE(cartimark::testing::file_hash(mc.records[0].image(View::sagittal).uri),
            cartimark::testing::file_hash(ma.records[0].image(View::sagittal).uri));
}

TEST(Phantom, DegenerateConfigRejected) {
  TempDir dir("phantom");
  PhantomConfig config;
  config.image_size = 32;
  config.defect_radius_max = 8;  // band thickness is 8
  EXPECT_THROW(generate_phantoms(config, dir.path()), Error);
  config.defect_radius_max = 4;
  config.n_patients = 1;
  EXPECT_THROW(generate_phantoms(config, dir.path()), Error);
  config.n_patients = 2;
  config.defect_prevalence = 0.01;
  const Manifest m = generate_phantoms(config, dir.path());
  EXPECT_EQ(m.count(Label::defect), 1u);
}

TEST(Png, SixteenBitRoundTrip) {
  TempDir dir("png");
  Image image;
  image.width = 3;
  image.height = 2;
  image.bit_depth = 16;
  image.pixels = {0.0f, 0.25f, 0.5f, 0.75f, 1.0f, 0.1f};
  write_png(dir / "x.png", image);
  const Image back = read_png(dir / "x.png");
  EXPECT_EQ(back.bit_depth, 16);
  ASSERT_EQ(back.pixels.size(), image.pixels.size());
  for (std::size_t i = 0; i < image.pixels.size(); ++i) EXPECT_NEAR(back.pixels[i], image.pixels[i], 1.0 / 65535);
  const auto header = read_png_header(dir / "x.png");
  EXPECT_EQ(header.width, 3);
  EXPECT_EQ(header.height, 2);
  io::write_file_atomic(dir / "junk.png", "not a png");
  EXPECT_THROW(read_png(dir / "junk.png"), Error);
}
