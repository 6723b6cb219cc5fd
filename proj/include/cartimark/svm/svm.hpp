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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"

namespace cartimark {

enum class FusionMode { feature, score };

inline std::string_view to_string(FusionMode m) { return m == FusionMode::feature ? "feature" : "score"; }

inline FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "feature") return FusionMode::feature;
  if (s == "score") return FusionMode::score;
  throw Error("invalid_fusion_mode", "unknown fusion mode '" + std::string(s) + "'");
}

struct SvmConfig {
  std::string kernel = "linear";
  double C = 1.0;
  double tolerance = 1e-3;
  int max_passes = 1000;  // iteration cap is max_passes * n
  FusionMode fusion_mode = FusionMode::feature;
};

struct FeatureScaling {
  double mean = 0;
  double scale = 1;
};

/// Linear soft-margin SVM in standardized coordinates:
/// decision(x) = weights . standardize(x) + bias.
struct SvmModel {
  std::vector<double> weights;
  double bias = 0;
  std::vector<std::size_t> support_indices;
  std::vector<double> dual_coefficients;  // one alpha per training point
  SvmConfig config;
  std::vector<FeatureScaling> feature_scaling;
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t dimension() const { return weights.size(); }

  std::vector<double> standardize(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - feature_scaling[k].mean) / feature_scaling[k].scale;
    return z;
  }
};

/// Signed margin; positive values fall on the +1 (defect) side.
inline double svm_decision(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) {
    throw Error("dimension_mismatch", "expected " + std::to_string(model.dimension()) + " features, got " +
                                          std::to_string(x.size()));
  }
  double s = model.bias;
  for (std::size_t k = 0; k < x.size(); ++k) {
    s += model.weights[k] * (x[k] - model.feature_scaling[k].mean) / model.feature_scaling[k].scale;
  }
  return s;
}

/// Gradient of the decision with respect to the raw input.
inline std::vector<double> svm_input_gradient(const SvmModel& model) {
  std::vector<double> g(model.dimension());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = model.weights[k] / model.feature_scaling[k].scale;
  return g;
}

/// Per-dimension z-scoring (population standard deviation); constant
/// dimensions keep scale 1.
inline std::vector<FeatureScaling> fit_scaling(std::span<const std::vector<double>> X) {
  const std::size_t d = X.front().size();
  std::vector<FeatureScaling> s(d);
  const auto n = static_cast<double>(X.size());
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0;
    for (const auto& x : X) mean += x[k];
    mean /= n;
    double var = 0;
    for (const auto& x : X) var += (x[k] - mean) * (x[k] - mean);
    var /= n;
    const double sd = std::sqrt(var);
    s[k] = {mean, sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0};
  }
  return s;
}

/// Dual objective 0.5 a'Qa - sum(a) with Q_ij = y_i y_j <z_i, z_j>, i.e. the
/// quantity the solver minimises.
inline double svm_dual_objective(std::span<const std::vector<double>> Z, std::span<const int> y,
                                 std::span<const double> alpha) {
  const std::size_t n = Z.size();
  double quad = 0, lin = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += alpha[i];
    if (alpha[i] == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (alpha[j] == 0) continue;
      double dot = 0;
      for (std::size_t k = 0; k < Z[i].size(); ++k) dot += Z[i][k] * Z[j][k];
      quad += alpha[i] * alpha[j] * y[i] * y[j] * dot;
    }
  }
  return 0.5 * quad - lin;
}

/// Soft-margin training by sequential minimal optimisation over pairs chosen
/// with second-order working-set selection. Stops once the maximal KKT
/// violation drops below config.tolerance.
inline SvmModel train_svm(std::span<const std::vector<double>> X, std::span<const int> y, const SvmConfig& config) {
  if (config.kernel != "linear") throw Error("unsupported_kernel", "only the linear kernel is implemented");
  if (!(config.C > 0) || !(config.tolerance > 0) || config.max_passes <= 0) {
    throw Error("invalid_config", "C, tolerance and max_passes must be positive");
  }
  if (X.size() != y.size()) throw Error("length_mismatch", "X and y differ in length");
  if (X.size() < 2) throw Error("too_few_samples", "need at least two training points");
  const std::size_t n = X.size();
  const std::size_t d = X.front().size();
  if (d == 0) throw Error("dimension_mismatch", "empty feature vectors");
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (X[i].size() != d) throw Error("dimension_mismatch", "point " + std::to_string(i) + " has wrong dimension");
    for (double v : X[i]) {
      if (!std::isfinite(v)) throw Error("non_finite", "point " + std::to_string(i) + " has a non-finite feature");
    }
    if (y[i] == 1) {
      has_pos = true;
    } else if (y[i] == -1) {
      has_neg = true;
    } else {
      throw Error("invalid_label", "labels must be -1 or +1");
    }
  }
  if (!has_pos || !has_neg) throw Error("single_class", "training data must contain both classes");

  SvmModel model;
  model.config = config;
  model.feature_scaling = fit_scaling(X);
  std::vector<std::vector<double>> Z(n);
  for (std::size_t i = 0; i < n; ++i) Z[i] = model.standardize(X[i]);

  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += Z[i][k] * Z[j][k];
      K[i * n + j] = K[j * n + i] = dot;
    }
  }
  const auto Q = [&](std::size_t i, std::size_t j) { return static_cast<double>(y[i] * y[j]) * K[i * n + j]; };

  const double C = config.C;
  constexpr double kTau = 1e-12;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> G(n, -1.0);
  const auto is_upper = [&](std::size_t t) { return alpha[t] >= C; };
  const auto is_lower = [&](std::size_t t) { return alpha[t] <= 0; };
  const auto in_up = [&](std::size_t t) { return y[t] == 1 ? !is_upper(t) : !is_lower(t); };
  const auto in_low = [&](std::size_t t) { return y[t] == 1 ? !is_lower(t) : !is_upper(t); };

  const std::size_t max_iter = static_cast<std::size_t>(config.max_passes) * std::max<std::size_t>(n, 100);
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * G[t] >= gmax) {
        gmax = -y[t] * G[t];
        i = t;
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * G[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b > 0) {
        double a = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
        if (a <= 0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    if (i == n || j == n || gmax - gmin < config.tolerance) {
      model.converged = true;
      break;
    }

    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_ai, dj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(t, i) * di + Q(t, j) * dj;
  }
  model.iterations = iter;

  // Offset from free vectors; the midpoint of the feasible interval otherwise.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (is_upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  model.bias = -rho;

  model.weights.assign(d, 0.0);
  model.dual_coefficients = alpha;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0) continue;
    model.support_indices.push_back(t);
    for (std::size_t k = 0; k < d; ++k) model.weights[k] += alpha[t] * y[t] * Z[t][k];
  }
  return model;
}

inline nlohmann::json to_json(const SvmConfig& c) {
  return {{"kernel", c.kernel},
          {"C", c.C},
          {"tolerance", c.tolerance},
          {"max_passes", c.max_passes},
          {"fusion_mode", std::string(to_string(c.fusion_mode))}};
}

inline SvmConfig svm_config_from_json(const nlohmann::json& j) {
  SvmConfig c;
  c.kernel = j.value("kernel", c.kernel);
  c.C = j.value("C", c.C);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.max_passes = j.value("max_passes", c.max_passes);
  c.fusion_mode = parse_fusion_mode(j.value("fusion_mode", std::string("feature")));
  return c;
}

inline nlohmann::json to_json(const SvmModel& m) {
  nlohmann::json scaling = nlohmann::json::array();
  for (const auto& s : m.feature_scaling) scaling.push_back({{"mean", s.mean}, {"scale", s.scale}});
  std::size_t bounded = 0;
  for (std::size_t idx : m.support_indices) bounded += m.dual_coefficients[idx] >= m.config.C ? 1 : 0;
  return {{"config", to_json(m.config)},
          {"feature_scaling", scaling},
          {"weight_vector", m.weights},
          {"bias", m.bias},
          {"support",
           {{"count", m.support_indices.size()},
            {"at_bound", bounded},
            {"indices", m.support_indices},
            {"dual_coefficients", m.dual_coefficients}}},
          {"iterations", m.iterations},
          {"converged", m.converged}};
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
  SvmModel m;
  m.config = svm_config_from_json(j.at("config"));
  for (const auto& s : j.at("feature_scaling")) m.feature_scaling.push_back({s.at("mean").get<double>(), s.at("scale").get<double>()});
  m.weights = j.at("weight_vector").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  if (j.contains("support")) {
    m.support_indices = j["support"].value("indices", std::vector<std::size_t>{});
    m.dual_coefficients = j["support"].value("dual_coefficients", std::vector<double>{});
  }
  m.iterations = j.value("iterations", std::size_t{0});
  m.converged = j.value("converged", false);
  if (m.weights.size() != m.feature_scaling.size()) throw Error("malformed_model", "weight/scaling size mismatch");
  return m;
}

}  // namespace cartimark
