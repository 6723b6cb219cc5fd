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

#include <memory>

#include "cartimark/data/phantom.hpp"
#include "cartimark/data/split.hpp"
#include "cartimark/fusion/fusion.hpp"
#include "cartimark/vision/model.hpp"
#include "test_util.hpp"

namespace cartimark::testing {

/// Seeded phantom set with one trained model per view, saved under a
/// scratch directory.
struct PhantomBench {
  TempDir dir{"bench"};
  Manifest manifest;
  SplitAssignment split;
  std::shared_ptr<const ModelArtifact> sagittal;
  std::shared_ptr<const ModelArtifact> coronal;

  static std::unique_ptr<PhantomBench> build(int n_patients = 60, double noise = 0.02, std::uint64_t seed = 2026,
                                             int epochs = 5) {
    auto b = std::make_unique<PhantomBench>();
    PhantomConfig config;
    config.n_patients = n_patients;
    config.noise_sigma = noise;
    config.seed = seed;
    b->manifest = generate_phantoms(config, b->dir / "phantom");
    save_manifest(b->manifest, b->dir / "phantom" / "manifest.json");
    b->split = split_dataset(b->manifest, {0.8, 0.1, 0.1}, seed, true);
    save_split(b->split, b->dir / "split.json");
    TrainConfig tc;
    tc.epochs = epochs;
    tc.seed = seed;
    const BackboneSpec tiny = make_backbone("tiny-test")->spec();
    TrainOptions options;
    options.out_dir = b->dir / "models";
    b->sagittal = std::make_shared<const ModelArtifact>(
        train_single_view(b->manifest, b->split, View::sagittal, tc, tiny, options));
    b->coronal = std::make_shared<const ModelArtifact>(
        train_single_view(b->manifest, b->split, View::coronal, tc, tiny, options));
    return b;
  }

  double test_accuracy(const std::vector<PredictionRecord>& predictions) const {
    double correct = 0;
    for (const auto& p : predictions) correct += p.call == manifest.find(p.patient_id)->label ? 1 : 0;
    return correct / static_cast<double>(predictions.size());
  }
};

}  // namespace cartimark::testing
