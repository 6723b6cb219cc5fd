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
#include <numbers>

#include "cartimark/core/random.hpp"
#include "cartimark/svm/svm.hpp"
#include "oracles.hpp"

using namespace cartimark;
using namespace cartimark::oracle;

namespace {

void expect_kkt(const SvmModel& m, const Problem& p, double tol) {
  const double C = m.config.C;
  double balance = 0;
  for (std::size_t i = 0; i < p.X.size(); ++i) {
    const double a = m.dual_coefficients[i];
    ASSERT_GE(a, 0.0);
    ASSERT_LE(a, C);
    balance += a * p.y[i];
    const double yf = p.y[i] * svm_decision(m, p.X[i]);
    if (a <= 0) {
      EXPECT_GE(yf, 1 - tol) << "point " << i;
    } else if (a >= C) {
      EXPECT_LE(yf, 1 + tol) << "point " << i;
    } else {
      EXPECT_NEAR(yf, 1, tol) << "point " << i;
    }
  }
  EXPECT_NEAR(balance, 0.0, 1e-9 * std::max(1.0, C));
}

}  // namespace

TEST(Svm, SymmetricTwoPoints) {
  const Matrix X{{1.0}, {-1.0}};
  const std::vector<int> y{1, -1};
  const auto m = train_svm(X, y, SvmConfig{});
  ASSERT_TRUE(m.converged);
  EXPECT_NEAR(m.weights[0], 1.0, 1e-6);
  EXPECT_NEAR(m.bias, 0.0, 1e-9);
  EXPECT_NEAR(m.dual_coefficients[0], 0.5, 1e-6);
  EXPECT_NEAR(m.dual_coefficients[1], 0.5, 1e-6);
  EXPECT_NEAR(svm_decision(m, std::vector<double>{1.0}), 1.0, 1e-6);
  EXPECT_NEAR(svm_decision(m, std::vector<double>{-1.0}), -1.0, 1e-6);
}

TEST(Svm, MidwayBoundary) {
  const Matrix X{{-1.0, 0.0}, {1.0, 0.0}};
  const std::vector<int> y{-1, 1};
  SvmConfig config;
  config.C = 1e6;
  const auto m = train_svm(X, y, config);
  EXPECT_GT(svm_decision(m, std::vector<double>{0.5, 0.0}), 0);
  EXPECT_LT(svm_decision(m, std::vector<double>{-0.5, 3.0}), 0);
  EXPECT_NEAR(svm_decision(m, std::vector<double>{0.0, 0.0}), 0.0, 1e-9);
  EXPECT_NEAR(svm_decision(m, std::vector<double>{0.0, -7.0}), 0.0, 1e-9);
}

TEST(SvmProperty, DecisionIsAffine) {
  Rng rng(12);
  const auto p = random_problem(rng, 20, 4, 1.0);
  const auto m = train_svm(p.X, p.y, SvmConfig{});
  const std::vector<double> zero(4, 0.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(4), b(4), sum(4);
    for (int k = 0; k < 4; ++k) {
      a[k] = 3 * rng.normal();
      b[k] = 3 * rng.normal();
      sum[k] = a[k] + b[k];
    }
    EXPECT_NEAR(svm_decision(m, a) + svm_decision(m, b), svm_decision(m, sum) + svm_decision(m, zero), 1e-9);
  }
}

TEST(Svm, SeparableMaxMargin) {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_problem(rng, 20, 2, 4.0);
    const Matrix Z = zscore(p.X);
    const double geometric = best_margin_2d(Z, p.y);
    ASSERT_GT(geometric, 0) << "trial " << trial << " not separable";
    SvmConfig config;
    config.C = 1e6;
    config.tolerance = 1e-6;
    const auto m = train_svm(p.X, p.y, config);
    ASSERT_TRUE(m.converged);
    const double norm = std::sqrt(dot(m.weights, m.weights));
    EXPECT_NEAR(1.0 / norm, geometric, 1e-3 * geometric) << "trial " << trial;
    for (std::size_t i = 0; i < p.X.size(); ++i) EXPECT_GT(p.y[i] * svm_decision(m, p.X[i]), 1 - 1e-4);
  }
}

TEST(SvmProperty, DualObjectiveMatchesIndependentSolver) {
  Rng rng(77);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 6 + rng.below(25);
    const std::size_t d = 1 + rng.below(5);
    const double C = std::pow(10.0, static_cast<double>(rng.below(4)) - 2.0);
    const auto p = random_problem(rng, n, d, 0.8);
    SvmConfig config;
    config.C = C;
    config.tolerance = 1e-5;
    const auto m = train_svm(p.X, p.y, config);
    ASSERT_TRUE(m.converged);
    const Matrix Z = zscore(p.X);
    const double ours = dual_objective(Z, p.y, m.dual_coefficients);
    const double oracle = fista_dual_optimum(Z, p.y, C);
    EXPECT_LE(std::abs(ours - oracle), 1e-3 * std::max(1.0, std::abs(oracle)))
        << "trial " << trial << " n=" << n << " d=" << d << " C=" << C;
    EXPECT_NEAR(svm_dual_objective(Z, p.y, m.dual_coefficients), ours, 1e-9 * std::max(1.0, std::abs(ours)));
    expect_kkt(m, p, 1e-3);

    // Decision is the plain dot product in standardized space.
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> w(d, 0.0);
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t k = 0; k < d; ++k) w[k] += m.dual_coefficients[t] * p.y[t] * Z[t][k];
      }
      EXPECT_NEAR(svm_decision(m, p.X[i]), dot(w, Z[i]) + m.bias, 1e-9);
    }
  }
}

TEST(SvmProperty, AffineFeatureScalingInvariance) {
  Rng rng(3);
  const auto p = random_problem(rng, 24, 3, 1.0);
  const auto a = train_svm(p.X, p.y, SvmConfig{});
  Matrix scaled = p.X;
  for (auto& x : scaled) {
    x[0] = 1000 * x[0] + 5;
    x[1] = 0.001 * x[1] - 2;
  }
  const auto b = train_svm(scaled, p.y, SvmConfig{});
  for (std::size_t i = 0; i < p.X.size(); ++i) {
    EXPECT_NEAR(svm_decision(a, p.X[i]), svm_decision(b, scaled[i]), 1e-6);
  }
}

TEST(Svm, ConflictingDuplicatesGiveZeroWeight) {
  Rng rng(8);
  Matrix X;
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> x{rng.normal(), rng.normal()};
    X.push_back(x);
    y.push_back(1);
    X.push_back(x);
    y.push_back(-1);
  }
  const auto m = train_svm(X, y, SvmConfig{});
  ASSERT_TRUE(m.converged);
  for (double w : m.weights) EXPECT_NEAR(w, 0.0, 1e-6);
  // With w = 0 every conflicting pair costs exactly 2 in hinge loss for |b| <= 1.
  EXPECT_LE(std::abs(m.bias), 1.0 + 1e-9);
  for (double a : m.dual_coefficients) EXPECT_NEAR(a, m.config.C, 1e-9);
}

TEST(Svm, ConstantDimensionIsHarmless) {
  const Matrix X{{0, 7}, {1, 7}, {3, 7}, {4, 7}};
  const std::vector<int> y{-1, -1, 1, 1};
  const auto m = train_svm(X, y, SvmConfig{});
  EXPECT_EQ(m.feature_scaling[1].scale, 1.0);
  EXPECT_NEAR(m.weights[1], 0.0, 1e-12);
  EXPECT_LT(svm_decision(m, X[1]), 0);
  EXPECT_GT(svm_decision(m, X[2]), 0);
}

TEST(Svm, InputErrors) {
  const Matrix X{{0.0}, {1.0}};
  const auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return std::string("none");
  };
  EXPECT_EQ(code([&] { train_svm(X, std::vector<int>{1, 1}, SvmConfig{}); }), "single_class");
  EXPECT_EQ(code([&] { train_svm(X, std::vector<int>{1, 0}, SvmConfig{}); }), "invalid_label");
  EXPECT_EQ(code([&] { train_svm(X, std::vector<int>{1}, SvmConfig{}); }), "length_mismatch");
  EXPECT_EQ(code([&] { train_svm(Matrix{{0.0}}, std::vector<int>{1}, SvmConfig{}); }), "too_few_samples");
  EXPECT_EQ(code([&] { train_svm(Matrix{{0.0}, {NAN}}, std::vector<int>{1, -1}, SvmConfig{}); }), "non_finite");
  EXPECT_EQ(code([&] { train_svm(Matrix{{0.0}, {1.0, 2.0}}, std::vector<int>{1, -1}, SvmConfig{}); }),
            "dimension_mismatch");
  SvmConfig rbf;
  rbf.kernel = "rbf";
  EXPECT_EQ(code([&] { train_svm(X, std::vector<int>{1, -1}, rbf); }), "unsupported_kernel");
  SvmConfig bad;
  bad.C = 0;
  EXPECT_EQ(code([&] { train_svm(X, std::vector<int>{1, -1}, bad); }), "invalid_config");
  const auto m = train_svm(X, std::vector<int>{-1, 1}, SvmConfig{});
  EXPECT_EQ(code([&] { svm_decision(m, std::vector<double>{1.0, 2.0}); }), "dimension_mismatch");
}

TEST(Svm, JsonRoundTrip) {
  Rng rng(4);
  const auto p = random_problem(rng, 16, 3, 1.0);
  SvmConfig config;
  config.C = 10;
  const auto m = train_svm(p.X, p.y, config);
  const auto back = svm_from_json(to_json(m));
  EXPECT_EQ(back.config.C, 10);
  EXPECT_EQ(back.support_indices, m.support_indices);
  for (const auto& x : p.X) EXPECT_DOUBLE_EQ(svm_decision(back, x), svm_decision(m, x));
  const auto j = to_json(m);
  EXPECT_EQ(j["support"]["count"].get<std::size_t>(), m.support_indices.size());
}
