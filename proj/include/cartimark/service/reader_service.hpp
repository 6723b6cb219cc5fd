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

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/core/random.hpp"
#include "cartimark/data/manifest.hpp"
#include "cartimark/data/prediction.hpp"
#include "cartimark/data/split.hpp"
#include "cartimark/diagnostics/report.hpp"
#include "cartimark/fusion/fusion.hpp"
#include "cartimark/service/session.hpp"
#include "cartimark/vision/model.hpp"

namespace cartimark {

struct DatasetEntry {
  std::filesystem::path manifest;
  std::filesystem::path split;
};

struct ServiceConfig {
  std::filesystem::path storage_root;
  std::map<std::string, DatasetEntry> datasets;
  std::map<std::string, std::filesystem::path> models;
  std::optional<std::string> api_token;
  std::optional<std::filesystem::path> static_dir;
};

/// Relative paths resolve against `base` (normally the config file's directory).
inline ServiceConfig service_config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  ServiceConfig c;
  try {
    c.storage_root = io::resolve(base, j.at("storage_root").get<std::string>());
    const auto datasets = j.value("datasets", nlohmann::json::object());
    for (const auto& [name, d] : datasets.items()) {
      c.datasets[name] = {io::resolve(base, d.at("manifest").get<std::string>()),
                          io::resolve(base, d.at("split").get<std::string>())};
    }
    const auto models = j.value("models", nlohmann::json::object());
    for (const auto& [id, path] : models.items()) {
      c.models[id] = io::resolve(base, path.get<std::string>());
    }
    if (j.contains("api_token") && !j["api_token"].is_null()) c.api_token = j["api_token"].get<std::string>();
    if (j.contains("static_dir") && !j["static_dir"].is_null()) {
      c.static_dir = io::resolve(base, j["static_dir"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_config", std::string("service config: ") + e.what());
  }
  return c;
}

inline ServiceConfig load_service_config(const std::filesystem::path& path) {
  return service_config_from_json(io::read_json(path), path.parent_path());
}

struct DatasetRef {
  std::string name;
  Subset subset = Subset::test;
};

inline DatasetRef parse_dataset_ref(std::string_view ref) {
  const auto slash = ref.find('/');
  if (slash == std::string_view::npos || slash == 0) {
    throw Error("invalid_request", "dataset_ref must look like <dataset>/<subset>, got '" + std::string(ref) + "'");
  }
  try {
    return {std::string(ref.substr(0, slash)), parse_subset(ref.substr(slash + 1))};
  } catch (const Error& e) {
    throw Error("invalid_request", e.what());
  }
}

/// Blinded reader-study sessions, on-demand inference and reports.
/// Per-session operations are linearized by a per-session mutex; distinct
/// sessions proceed independently.
class ReaderService {
 public:
  /// Test hook invoked at named points of a submission ("after_append").
  using FaultHook = std::function<void(std::string_view point)>;

  explicit ReaderService(ServiceConfig config, std::unique_ptr<SessionStore> store = nullptr)
      : config_(std::move(config)),
        store_(store ? std::move(store) : std::make_unique<JsonlSessionStore>(config_.storage_root)) {
    std::filesystem::create_directories(config_.storage_root);
    load_secret();
    for (const auto& [name, entry] : config_.datasets) {
      Dataset d;
      d.manifest = load_manifest(entry.manifest);
      d.split = load_split(entry.split);
      check_split_matches(d.manifest, d.split);
      for (const auto& r : d.manifest.records) {
        for (const auto& [view, ref] : r.images) images_[image_token(ref.uri)] = ref.uri;
      }
      datasets_.emplace(name, std::move(d));
    }
    for (auto& s : store_->load_all()) {
      auto state = std::make_shared<SessionState>();
      state->session = std::move(s);
      sessions_.emplace(state->session.session_id, std::move(state));
    }
  }

  const ServiceConfig& config() const { return config_; }
  void set_fault_hook(FaultHook hook) { fault_hook_ = std::move(hook); }

  ReaderSession create_session(const std::string& reader_id, const std::string& reader_role,
                               const std::string& dataset_ref, std::uint64_t seed) {
    if (reader_id.empty()) throw Error("invalid_request", "reader_id must not be empty");
    const DatasetRef ref = parse_dataset_ref(dataset_ref);
    const Dataset& d = dataset(ref.name);
    if (ref.subset != Subset::test) throw Error("not_a_test_subset", "reader sessions run on the test subset only");
    ReaderSession s;
    s.reader_id = reader_id;
    s.reader_role = reader_role;
    s.dataset_ref = dataset_ref;
    s.seed = seed;
    s.case_order = d.split.patients(Subset::test);
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(s.case_order));
    s.created = utc_now();

    std::unique_lock lock(sessions_mutex_);
    do {
      s.session_id = new_session_id();
    } while (sessions_.contains(s.session_id));
    store_->create(s);
    auto state = std::make_shared<SessionState>();
    state->session = s;
    sessions_.emplace(s.session_id, std::move(state));
    return s;
  }

  /// Public session descriptor (no labels).
  static nlohmann::json session_json(const ReaderSession& s) {
    nlohmann::json j = session_header_json(s);
    j["status"] = std::string(to_string(s.status()));
    j["progress"] = {{"completed", s.responses.size()}, {"total", s.case_order.size()}};
    return j;
  }

  ReaderSession get_session(const std::string& session_id) const {
    auto state = find(session_id);
    std::lock_guard lock(state->mutex);
    return state->session;
  }

  nlohmann::json next_case(const std::string& session_id) {
    auto state = find(session_id);
    std::lock_guard lock(state->mutex);
    const ReaderSession& s = state->session;
    if (s.status() == SessionStatus::complete) throw Error("session_complete", "all cases have been answered");
    const std::string& patient_id = s.case_order[s.cursor()];
    const StudyRecord* record = dataset(parse_dataset_ref(s.dataset_ref).name).manifest.find(patient_id);
    if (!record) throw Error("unknown_patient", "patient " + patient_id + " is missing from the manifest");
    state->served_at[patient_id] = std::chrono::steady_clock::now();
    nlohmann::json images = nlohmann::json::object();
    for (View v : kViews) images[std::string(to_string(v))] = "/images/" + image_token(record->image(v).uri);
    return {{"session_id", s.session_id},
            {"patient_id", patient_id},
            {"images", images},
            {"progress", {{"index", s.cursor() + 1}, {"total", s.case_order.size()}}}};
  }

  /// Appends durably, then acknowledges. An exact repeat of an earlier
  /// submission returns the acknowledgment it originally got.
  nlohmann::json submit_diagnosis(const std::string& session_id, const std::string& patient_id,
                                  const std::string& diagnosis, std::optional<std::int64_t> elapsed_ms = std::nullopt) {
    Label call;
    try {
      call = parse_label(diagnosis);
    } catch (const Error&) {
      throw Error("invalid_request", "diagnosis must be 'defect' or 'no_defect'");
    }
    auto state = find(session_id);
    std::lock_guard lock(state->mutex);
    ReaderSession& s = state->session;
    for (std::size_t i = 0; i < s.responses.size(); ++i) {
      if (s.responses[i].patient_id != patient_id) continue;
      if (s.responses[i].diagnosis != call) {
        throw Error("conflicting_duplicate", "patient " + patient_id + " was already answered differently");
      }
      return ack(s, i + 1);
    }
    if (s.status() == SessionStatus::complete) throw Error("session_complete", "all cases have been answered");
    if (s.case_order[s.cursor()] != patient_id) {
      throw Error("out_of_order", "expected patient " + s.case_order[s.cursor()] + ", got " + patient_id);
    }
    CaseResponse r;
    r.patient_id = patient_id;
    r.diagnosis = call;
    r.responded_at = utc_now();
    if (elapsed_ms) {
      r.elapsed_ms = *elapsed_ms;
    } else if (auto it = state->served_at.find(patient_id); it != state->served_at.end()) {
      r.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - it->second).count();
    }
    store_->append_response(s, r);
    if (fault_hook_) fault_hook_("after_append");
    s.responses.push_back(std::move(r));
    if (s.status() == SessionStatus::complete) s.completed = s.responses.back().responded_at;
    if (auto* jsonl = dynamic_cast<JsonlSessionStore*>(store_.get())) {
      try {
        std::lock_guard index_lock(index_mutex_);
        jsonl->write_index_entry(s);
      } catch (const std::exception&) {
        // The index is a convenience snapshot; the log already holds the response.
      }
    }
    return ack(s, s.responses.size());
  }

  /// Unblinds after completion: the reader's metrics, operating point and
  /// every cached model curve on the same dataset.
  nlohmann::json session_report(const std::string& session_id) {
    const ReaderSession s = get_session(session_id);
    if (s.status() != SessionStatus::complete) {
      throw Error("incomplete_session", std::to_string(s.responses.size()) + " of " +
                                            std::to_string(s.case_order.size()) + " cases answered");
    }
    const Dataset& d = dataset(parse_dataset_ref(s.dataset_ref).name);
    std::vector<Label> calls, truth;
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& r : s.responses) {
      const Label label = d.manifest.find(r.patient_id)->label;
      calls.push_back(r.diagnosis);
      truth.push_back(label);
      cases.push_back({{"patient_id", r.patient_id},
                       {"diagnosis", std::string(to_string(r.diagnosis))},
                       {"ground_truth", std::string(to_string(label))},
                       {"elapsed_ms", r.elapsed_ms}});
    }
    const ConfusionMatrix cm = confusion(calls, truth);
    const DiagnosticRow reader = diagnostic_metrics(cm, s.reader_id);
    nlohmann::json point = nullptr;
    PlotData plot;
    if (cm.positives() > 0 && cm.negatives() > 0) {
      const RaterPoint rp = rater_point(cm);
      point = {{"fpr", rp.fpr}, {"tpr", rp.tpr}};
      plot.rater_points.push_back({s.reader_id, rp});
    }

    std::map<std::string, Label> truth_map;
    for (const auto& id : d.split.patients(parse_dataset_ref(s.dataset_ref).subset)) {
      truth_map[id] = d.manifest.find(id)->label;
    }
    nlohmann::json model_rows = nlohmann::json::array();
    for (const auto& [ref, path] : config_.models) {
      const auto cached = cache_path(ref, s.dataset_ref);
      if (!std::filesystem::exists(cached)) continue;
      const auto eval = evaluate_predictions(load_predictions(cached), truth_map);
      for (const auto& row : eval.report.rows) model_rows.push_back(to_json(row));
      for (const auto& c : eval.plot.curves) plot.curves.push_back(c);
      for (const auto& p : eval.plot.rater_points) plot.rater_points.push_back(p);
    }
    return {{"session_id", s.session_id},
            {"reader_id", s.reader_id},
            {"reader_role", s.reader_role},
            {"dataset_ref", s.dataset_ref},
            {"status", "complete"},
            {"completed", s.completed},
            {"reader", to_json(reader)},
            {"rater_point", point},
            {"models", model_rows},
            {"plot", to_json(plot)},
            {"cases", cases}};
  }

  /// Batch inference over a dataset subset, cached on disk per (model, dataset).
  std::vector<PredictionRecord> model_predict(const std::string& dataset_ref, const std::string& model_ref,
                                              bool force = false) {
    const DatasetRef ref = parse_dataset_ref(dataset_ref);
    const Dataset& d = dataset(ref.name);
    const auto model_path = config_.models.find(model_ref);
    if (model_path == config_.models.end()) throw Error("unknown_model", "no model registered as '" + model_ref + "'");
    std::lock_guard lock(model_mutex(model_ref));
    const auto cached = cache_path(model_ref, dataset_ref);
    if (!force && std::filesystem::exists(cached)) return load_predictions(cached);
    const auto model = load_model(model_ref, model_path->second);
    std::vector<PredictionRecord> records;
    if (const auto* fused = std::get_if<std::shared_ptr<const FusionModel>>(&model)) {
      records = predict_subset(**fused, d.manifest, d.split, ref.subset);
    } else {
      records = predict_subset(*std::get<std::shared_ptr<const ModelArtifact>>(model), d.manifest, d.split, ref.subset);
    }
    save_predictions(records, cached);
    return records;
  }

  /// Resolves an opaque image token to a file; nullopt when unknown.
  std::optional<std::filesystem::path> image_path(const std::string& token) const {
    const auto it = images_.find(token);
    if (it == images_.end()) return std::nullopt;
    return std::filesystem::path(it->second);
  }

  std::filesystem::path cache_path(const std::string& model_ref, const std::string& dataset_ref) const {
    const DatasetRef ref = parse_dataset_ref(dataset_ref);
    return config_.storage_root / "predictions" / model_ref / (ref.name + "." + std::string(to_string(ref.subset)) + ".jsonl");
  }

 private:
  struct Dataset {
    Manifest manifest;
    SplitAssignment split;
  };

  struct SessionState {
    mutable std::mutex mutex;
    ReaderSession session;
    std::map<std::string, std::chrono::steady_clock::time_point> served_at;
  };

  using LoadedModel = std::variant<std::shared_ptr<const ModelArtifact>, std::shared_ptr<const FusionModel>>;

  static nlohmann::json ack(const ReaderSession& s, std::size_t completed) {
    const bool done = completed == s.case_order.size();
    return {{"session_id", s.session_id},
            {"progress", {{"completed", completed}, {"total", s.case_order.size()}}},
            {"status", done ? "complete" : "active"}};
  }

  const Dataset& dataset(const std::string& name) const {
    const auto it = datasets_.find(name);
    if (it == datasets_.end()) throw Error("unknown_dataset", "no dataset registered as '" + name + "'");
    return it->second;
  }

  std::shared_ptr<SessionState> find(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error("unknown_session", "no session '" + session_id + "'");
    return it->second;
  }

  std::mutex& model_mutex(const std::string& model_ref) {
    std::lock_guard lock(models_mutex_);
    return model_locks_[model_ref];
  }

  LoadedModel load_model(const std::string& model_ref, const std::filesystem::path& path) {
    {
      std::lock_guard lock(models_mutex_);
      if (auto it = loaded_.find(model_ref); it != loaded_.end()) return it->second;
    }
    const auto j = io::read_json(path);
    LoadedModel model;
    if (j.value("kind", std::string()) == "fusion") {
      model = std::make_shared<const FusionModel>(load_fusion(path));
    } else {
      model = std::make_shared<const ModelArtifact>(load_artifact(path));
    }
    std::lock_guard lock(models_mutex_);
    return loaded_.emplace(model_ref, model).first->second;
  }

  void load_secret() {
    const auto path = config_.storage_root / "image_token_salt";
    if (std::filesystem::exists(path)) {
      secret_ = io::read_file(path);
      return;
    }
    std::random_device rd;
    secret_ = io::hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd()) + io::hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    io::write_file_atomic(path, secret_);
  }

  std::string image_token(const std::string& uri) const {
    return io::hex64(io::fnv1a(uri, io::fnv1a(secret_))) + io::hex64(io::fnv1a(secret_ + uri));
  }

  std::string new_session_id() {
    std::random_device rd;
    return "s-" + io::hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  }

  ServiceConfig config_;
  std::unique_ptr<SessionStore> store_;
  std::map<std::string, Dataset> datasets_;
  std::map<std::string, std::string> images_;
  std::string secret_;
  FaultHook fault_hook_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<SessionState>> sessions_;
  std::mutex index_mutex_;

  std::mutex models_mutex_;
  std::map<std::string, std::mutex> model_locks_;
  std::map<std::string, LoadedModel> loaded_;
};

}  // namespace cartimark
