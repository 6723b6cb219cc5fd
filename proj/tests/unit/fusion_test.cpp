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

#include "cartimark/diagnostics/roc.hpp"
#include "cartimark/fusion/fusion.hpp"
#include "fixtures.hpp"

using namespace cartimark;
using cartimark::testing::PhantomBench;
using cartimark::testing::TempDir;

namespace {

class Fusion : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { bench_ = PhantomBench::build().release(); }
  static void TearDownTestSuite() { delete bench_; }
  static inline PhantomBench* bench_ = nullptr;
};

}  // namespace

TEST_F(Fusion, FusedNotWorseThanBestSingleView) {
  const auto& b = *bench_;
  const auto fused = train_fusion(b.sagittal, b.coronal, b.manifest, b.split, SvmConfig{});
  EXPECT_EQ(fused.input_dimension(), 32u);
  EXPECT_EQ(fused.svm.dimension(), 32u);
  EXPECT_EQ(fused.c_selection.size(), 5u);
  const double acc_fused = b.test_accuracy(predict_subset(fused, b.manifest, b.split, Subset::test));
  const double acc_sag = b.test_accuracy(predict_subset(*b.sagittal, b.manifest, b.split, Subset::test));
  const double acc_cor = b.test_accuracy(predict_subset(*b.coronal, b.manifest, b.split, Subset::test));
  EXPECT_GE(acc_fused, std::max(acc_sag, acc_cor) - 0.05);
}

TEST_F(Fusion, ScoreModeWithDuplicatedModel) {
  const auto& b = *bench_;
  // Same function on both views: relabel the sagittal model as the coronal one.
  auto twin = std::make_shared<ModelArtifact>(*b.sagittal);
  twin->view = View::coronal;
  Manifest mirrored = b.manifest;
  for (auto& r : mirrored.records) r.images[View::coronal] = r.images[View::sagittal];
  SvmConfig config;
  config.fusion_mode = FusionMode::score;
  const auto fused = train_fusion(b.sagittal, twin, mirrored, b.split, config);
  EXPECT_EQ(fused.input_dimension(), 2u);
  const auto& r = *mirrored.find(b.split.patients(Subset::test)[0]);
  const auto x = fused_input(*fused.sagittal, *fused.coronal, FusionMode::score,
                             load_input(r.image(View::sagittal), b.sagittal->preprocessing),
                             load_input(r.image(View::coronal), b.sagittal->preprocessing));
  ASSERT_EQ(x.size(), 2u);
  EXPECT_EQ(x[0], x[1]);
}

TEST_F(Fusion, ScoreModeMonotone) {
  const auto& b = *bench_;
  SvmConfig config;
  config.fusion_mode = FusionMode::score;
  const auto fused = train_fusion(b.sagittal, b.coronal, b.manifest, b.split, config);
  const auto coeff = svm_input_gradient(fused.svm);
  ASSERT_EQ(coeff.size(), 2u);
  ASSERT_GT(coeff[0], 0);
  ASSERT_GT(coeff[1], 0);
  for (double s = 0; s <= 1.0; s += 0.1) {
    for (double c = 0; c <= 1.0; c += 0.1) {
      const double base = svm_decision(fused.svm, std::vector<double>{s, c});
      EXPECT_GE(svm_decision(fused.svm, std::vector<double>{s + 0.05, c + 0.05}), base);
    }
  }
}

TEST_F(Fusion, ReloadGivesIdenticalPredictions) {
  const auto& b = *bench_;
  const auto fused = train_fusion(b.sagittal, b.coronal, b.manifest, b.split, SvmConfig{});
  save_fusion(fused, b.dir / "models" / "fusion.json");
  const auto loaded = load_fusion(b.dir / "models" / "fusion.json");
  EXPECT_EQ(loaded.model_id, fused.model_id);
  for (const auto& r : b.manifest.records) {
    const auto p = predict_fusion(fused, r.image(View::sagittal), r.image(View::coronal));
    const auto q = predict_fusion(loaded, r.image(View::sagittal), r.image(View::coronal));
    EXPECT_EQ(p.score, q.score);
    EXPECT_EQ(p.call, q.call);
    EXPECT_EQ(p.call == Label::defect, p.score >= fused.threshold);
  }
  EXPECT_THROW(load_fusion(b.sagittal->metadata_uri), Error);
}

TEST_F(Fusion, MarginSweepReproducesRoc) {
  const auto& b = *bench_;
  const auto fused = train_fusion(b.sagittal, b.coronal, b.manifest, b.split, SvmConfig{});
  const auto preds = predict_subset(fused, b.manifest, b.split, Subset::train);
  std::vector<double> scores;
  std::vector<Label> truth;
  for (const auto& p : preds) {
    scores.push_back(p.score);
    truth.push_back(b.manifest.find(p.patient_id)->label);
  }
  const auto curve = roc_curve(scores, truth);
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    FusionModel shifted = fused;
    shifted.threshold = curve.points[k].threshold;
    const auto calls = predict_subset(shifted, b.manifest, b.split, Subset::train);
    double tp = 0, fp = 0, pos = 0, neg = 0;
    for (const auto& c : calls) {
      const bool defect = b.manifest.find(c.patient_id)->label == Label::defect;
      (defect ? pos : neg) += 1;
      if (c.call == Label::defect) (defect ? tp : fp) += 1;
    }
    EXPECT_DOUBLE_EQ(curve.points[k].tpr, tp / pos);
    EXPECT_DOUBLE_EQ(curve.points[k].fpr, fp / neg);
  }
}

TEST_F(Fusion, Errors) {
  const auto& b = *bench_;
  try {
    train_fusion(b.coronal, b.sagittal, b.manifest, b.split, SvmConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "view_mismatch");
  }
  Manifest one_class = b.manifest;
  for (auto& r : one_class.records) r.label = Label::no_defect;
  try {
    train_fusion(b.sagittal, b.coronal, one_class, b.split, SvmConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "single_class_training_set");
  }
  auto unsaved = std::make_shared<ModelArtifact>(*b.sagittal);
  unsaved->metadata_uri.clear();
  const auto fused = train_fusion(unsaved, b.coronal, b.manifest, b.split, SvmConfig{});
  EXPECT_THROW(save_fusion(fused, b.dir / "x.json"), Error);
}
