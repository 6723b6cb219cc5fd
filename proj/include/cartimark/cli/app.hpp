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

#include <signal.h>

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cartimark/cli/config.hpp"
#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/data/manifest.hpp"
#include "cartimark/data/phantom.hpp"
#include "cartimark/data/prediction.hpp"
#include "cartimark/data/split.hpp"
#include "cartimark/diagnostics/report.hpp"
#include "cartimark/diagnostics/reproduce.hpp"
#include "cartimark/diagnostics/table2.hpp"
#include "cartimark/fusion/fusion.hpp"
#include "cartimark/saliency/overlay.hpp"
#include "cartimark/saliency/saliency.hpp"
#include "cartimark/service/http.hpp"
#include "cartimark/service/reader_service.hpp"
#include "cartimark/vision/grid_search.hpp"
#include "cartimark/vision/model.hpp"

namespace cartimark::cli {

namespace fs = std::filesystem;

/// Output directory of one stage plus the list of files it produced.
class RunOutput {
 public:
  RunOutput(std::string stage, fs::path dir) : stage_(std::move(stage)), dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  /// Creates the directory and drops a marker that is removed on finish().
  void open() {
    fs::create_directories(dir_);
    io::write_json(dir_ / kIncomplete, {{"stage", stage_}, {"status", "running"}});
  }

  /// Path for a new output file, recorded in the produced-files manifest.
  fs::path file(const std::string& relative) {
    files_.push_back(relative);
    const auto p = dir_ / relative;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
  }

  void finish() {
    std::sort(files_.begin(), files_.end());
    files_.erase(std::unique(files_.begin(), files_.end()), files_.end());
    nlohmann::json list = nlohmann::json::array();
    for (const auto& f : files_) {
      const auto p = dir_ / f;
      list.push_back({{"path", f}, {"bytes", fs::file_size(p)}, {"fnv1a", io::hex64(io::fnv1a(io::read_file(p)))}});
    }
    io::write_json(dir_ / "produced.json", {{"stage", stage_}, {"files", list}});
    fs::remove(dir_ / kIncomplete);
  }

  /// Leaves the directory marked as failed.
  void fail(const std::string& code, const std::string& message) {
    if (!fs::exists(dir_)) return;
    io::write_json(dir_ / kIncomplete, {{"stage", stage_}, {"status", "failed"}, {"code", code}, {"message", message}});
  }

  static constexpr const char* kIncomplete = "INCOMPLETE.json";

 private:
  std::string stage_;
  fs::path dir_;
  std::vector<std::string> files_;
};

using AnyModel = std::variant<ModelArtifact, FusionModel>;

inline AnyModel load_any_model(const fs::path& path) {
  const auto j = io::read_json(path);
  if (j.value("kind", std::string()) == "fusion") return load_fusion(path);
  return load_artifact(path);
}

inline std::string compact_timestamp() {
  std::string t = utc_now();
  std::erase(t, '-');
  std::erase(t, ':');
  return t;
}

struct Options {
  std::string data_dir;
  std::string out;
  std::string run_id;

  PhantomConfig phantom;

  std::string manifest;
  std::string split_file;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  bool no_stratify = false;

  std::string view = "sagittal";
  std::string backbone = "tiny-test";
  TrainConfig train;
  std::string grid;

  std::string sagittal_model;
  std::string coronal_model;
  std::string fusion_mode = "feature";
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  double svm_tolerance = 1e-3;
  int max_passes = 1000;

  std::string model;
  std::string subset = "test";
  std::string patient;
  std::string colormap = "jet";
  double alpha = 0.5;

  std::vector<std::string> predictions;
  std::string truth;

  std::string table2;
  std::string plot;
  bool table2_readers = false;
  int size = 480;

  std::string service_config;
  std::string host = "127.0.0.1";
  int port = 8080;
};

class App {
 public:
  App(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"Cartilage defect classification toolkit"};
    app.config_formatter(std::make_shared<TomlOrJsonConfig>());
    app.set_config("--config", "", "TOML or JSON file with flag values");
    app.require_subcommand(1);
    app.add_option("--data-dir", o_.data_dir, "Storage root (default ./cartimark-data)")->envname("CARTIMARK_DATA_DIR");
    app.add_option("--out", o_.out, "Write this stage's outputs here instead of the run layout");
    app.add_option("--run-id", o_.run_id, "Run directory name under <data-dir>/runs (default: UTC timestamp)");
    define(app);
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      report_error("usage", e.what());
      return 2;
    }
    const auto* sub = app.get_subcommands().front();
    const std::string stage = sub->get_name();
    std::optional<RunOutput> output;
    try {
      if (stage == "serve") return serve();
      output.emplace(stage, output_dir(stage));
      const int code = dispatch(stage, *output);
      output->finish();
      return code;
    } catch (const Error& e) {
      if (output) output->fail(e.code(), e.what());
      report_error(e.code(), e.what());
      return 3;
    } catch (const std::exception& e) {
      if (output) output->fail("internal_error", e.what());
      report_error("internal_error", e.what());
      return 3;
    }
  }

 private:
  void define(CLI::App& app) {
    auto* ph = app.add_subcommand("phantom", "Generate a synthetic two-view phantom dataset");
    ph->add_option("--n", o_.phantom.n_patients, "Number of patients")->check(CLI::Range(2, 1000000));
    ph->add_option("--seed", o_.phantom.seed, "Random seed");
    ph->add_option("--prevalence", o_.phantom.defect_prevalence, "Defect prevalence")->check(CLI::Range(0.0, 1.0));
    ph->add_option("--size", o_.phantom.image_size, "Image side in pixels")->check(CLI::Range(16, 4096));
    ph->add_option("--noise", o_.phantom.noise_sigma, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
    ph->add_option("--radius-min", o_.phantom.defect_radius_min, "Minimum notch radius");
    ph->add_option("--radius-max", o_.phantom.defect_radius_max, "Maximum notch radius");
    ph->add_option("--name", o_.phantom.dataset_name, "Dataset name");

    auto* sp = app.add_subcommand("split", "Patient-level train/validation/test split");
    sp->add_option("--manifest", o_.manifest, "Manifest file")->required()->check(CLI::ExistingFile);
    sp->add_option("--ratios", o_.ratios, "train,validation,test")->delimiter(',')->expected(3);
    sp->add_option("--seed", o_.seed, "Random seed");
    sp->add_flag("--no-stratify", o_.no_stratify, "Ignore label balance");

    const auto data_flags = [&](CLI::App* c) {
      c->add_option("--manifest", o_.manifest, "Manifest file")->required()->check(CLI::ExistingFile);
      c->add_option("--split", o_.split_file, "Split file")->required()->check(CLI::ExistingFile);
    };
    const auto train_flags = [&](CLI::App* c) {
      data_flags(c);
      c->add_option("--view", o_.view, "sagittal or coronal")->required()->check(CLI::IsMember({"sagittal", "coronal"}));
      c->add_option("--backbone", o_.backbone, "Backbone provider");
      c->add_option("--lr", o_.train.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
      c->add_option("--epochs", o_.train.epochs, "Epochs")->check(CLI::NonNegativeNumber);
      c->add_option("--batch-size", o_.train.batch_size, "Batch size")->check(CLI::PositiveNumber);
      c->add_option("--frozen", o_.train.frozen_fraction, "Frozen fraction of backbone depth")->check(CLI::Range(0.0, 1.0));
      c->add_flag("--augment", o_.train.augment, "Horizontal-flip augmentation");
      c->add_option("--seed", o_.train.seed, "Random seed");
      c->add_option("--threshold", o_.train.threshold, "Score threshold for calls");
    };
    train_flags(app.add_subcommand("train", "Train a single-view classifier"));
    auto* gs = app.add_subcommand("grid-search", "Grid search over training hyperparameters");
    train_flags(gs);
    gs->add_option("--grid", o_.grid, "JSON grid {axis: [values]} (default: built-in grid)")->check(CLI::ExistingFile);

    auto* ft = app.add_subcommand("fuse-train", "Train the two-view SVM fusion model");
    data_flags(ft);
    ft->add_option("--sagittal-model", o_.sagittal_model, "Sagittal model metadata")->required()->check(CLI::ExistingFile);
    ft->add_option("--coronal-model", o_.coronal_model, "Coronal model metadata")->required()->check(CLI::ExistingFile);
    ft->add_option("--mode", o_.fusion_mode, "feature or score")->check(CLI::IsMember({"feature", "score"}));
    ft->add_option("--c-grid", o_.c_grid, "Candidate C values")->delimiter(',');
    ft->add_option("--tolerance", o_.svm_tolerance, "KKT tolerance")->check(CLI::PositiveNumber);
    ft->add_option("--max-passes", o_.max_passes, "Iteration cap factor")->check(CLI::PositiveNumber);

    auto* pr = app.add_subcommand("predict", "Score a dataset subset");
    data_flags(pr);
    pr->add_option("--model", o_.model, "Model metadata or fusion file")->required()->check(CLI::ExistingFile);
    pr->add_option("--subset", o_.subset, "Subset")->check(CLI::IsMember({"train", "validation", "test"}));

    auto* sa = app.add_subcommand("saliency", "Saliency maps and overlays for one patient");
    sa->add_option("--model", o_.model, "Model metadata or fusion file")->required()->check(CLI::ExistingFile);
    sa->add_option("--manifest", o_.manifest, "Manifest file")->required()->check(CLI::ExistingFile);
    sa->add_option("--patient", o_.patient, "Patient id")->required();
    sa->add_option("--colormap", o_.colormap, "jet or bluered")->check(CLI::IsMember({"jet", "bluered"}));
    sa->add_option("--alpha", o_.alpha, "Overlay opacity")->check(CLI::Range(0.0, 1.0));

    auto* ev = app.add_subcommand("evaluate", "Diagnostic metrics and ROC data for prediction files");
    ev->add_option("--predictions", o_.predictions, "Prediction JSONL files")->required()->check(CLI::ExistingFile);
    ev->add_option("--truth", o_.truth, "Manifest holding ground truth")->required()->check(CLI::ExistingFile);

    auto* rt = app.add_subcommand("reproduce-tables", "Recompute reader and model metrics from the bundled table");
    rt->add_option("--table2", o_.table2, "Alternative table file")->check(CLI::ExistingFile);

    auto* rp = app.add_subcommand("roc-plot", "Render ROC curves and reader points as SVG");
    rp->add_option("--plot", o_.plot, "Plot data or evaluation report JSON")->check(CLI::ExistingFile);
    rp->add_flag("--table2-readers", o_.table2_readers, "Add the bundled surgeon and resident operating points");
    rp->add_option("--size", o_.size, "Image side in pixels")->check(CLI::Range(120, 4000));

    auto* sv = app.add_subcommand("serve", "Run the reader-study HTTP service");
    sv->add_option("--service-config", o_.service_config, "Service JSON config")->required()->check(CLI::ExistingFile);
    sv->add_option("--host", o_.host, "Bind address");
    sv->add_option("--port", o_.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  }

  fs::path output_dir(const std::string& stage) const {
    if (!o_.out.empty()) return o_.out;
    const fs::path root = o_.data_dir.empty() ? fs::path("cartimark-data") : fs::path(o_.data_dir);
    const fs::path base = root / "runs";
    if (!o_.run_id.empty()) return base / o_.run_id / stage;
    const std::string stamp = compact_timestamp();
    fs::path dir = base / stamp / stage;
    for (int n = 1; fs::exists(dir); ++n) dir = base / (stamp + "-" + std::to_string(n)) / stage;
    return dir;
  }

  void report_error(const std::string& code, const std::string& message) {
    err_ << nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
  }

  void emit(const nlohmann::json& summary) { out_ << summary.dump(2) << "\n"; }

  int dispatch(const std::string& stage, RunOutput& out) {
    if (stage == "phantom") return phantom(out);
    if (stage == "split") return split(out);
    if (stage == "train") return train(out);
    if (stage == "grid-search") return grid_search_cmd(out);
    if (stage == "fuse-train") return fuse_train(out);
    if (stage == "predict") return predict(out);
    if (stage == "saliency") return saliency(out);
    if (stage == "evaluate") return evaluate(out);
    if (stage == "reproduce-tables") return reproduce(out);
    if (stage == "roc-plot") return roc_plot(out);
    throw Error("usage", "unknown subcommand " + stage);
  }

  int phantom(RunOutput& out) {
    check_phantom_config(o_.phantom);
    out.open();
    const Manifest m = generate_phantoms(o_.phantom, out.dir());
    save_manifest(m, out.file("manifest.json"));
    for (const auto& r : m.records) {
      for (const auto& [v, ref] : r.images) out.file(io::relativize(out.dir(), ref.uri));
    }
    emit({{"stage", "phantom"}, {"out_dir", out.dir().string()}, {"manifest", (out.dir() / "manifest.json").string()},
          {"patients", m.records.size()}, {"defect", m.count(Label::defect)}, {"no_defect", m.count(Label::no_defect)}});
    return 0;
  }

  int split(RunOutput& out) {
    const Manifest m = load_manifest(o_.manifest);
    const SplitRatios ratios{o_.ratios.at(0), o_.ratios.at(1), o_.ratios.at(2)};
    const auto s = split_dataset(m, ratios, o_.seed, !o_.no_stratify);
    out.open();
    save_split(s, out.file("split.json"));
    emit({{"stage", "split"}, {"split", (out.dir() / "split.json").string()}, {"train", s.size(Subset::train)},
          {"validation", s.size(Subset::validation)}, {"test", s.size(Subset::test)}});
    return 0;
  }

  BackboneSpec backbone() const { return make_backbone(o_.backbone)->spec(); }

  static nlohmann::json model_summary(const ModelArtifact& a) {
    return {{"model_id", a.model_id},
            {"view", std::string(to_string(a.view))},
            {"metadata", a.metadata_uri.string()},
            {"validation_accuracy", a.validation_metrics.accuracy},
            {"validation_auc", metric_json(a.validation_auc)}};
  }

  int train(RunOutput& out) {
    check_train_config(o_.train);
    const BackboneSpec spec = backbone();
    const Manifest m = load_manifest(o_.manifest);
    const auto s = load_split(o_.split_file);
    out.open();
    TrainOptions options;
    options.out_dir = out.dir();
    const auto a = train_single_view(m, s, parse_view(o_.view), o_.train, spec, options);
    out.file(a.metadata_uri.filename().string());
    out.file(a.weights_uri.filename().string());
    auto summary = model_summary(a);
    summary["stage"] = "train";
    emit(summary);
    return 0;
  }

  int grid_search_cmd(RunOutput& out) {
    check_train_config(o_.train);
    const HyperGrid grid = o_.grid.empty() ? default_hyper_grid() : hyper_grid_from_json(io::read_json(o_.grid));
    expand_grid(grid, o_.train);
    const BackboneSpec spec = backbone();
    const Manifest m = load_manifest(o_.manifest);
    const auto s = load_split(o_.split_file);
    out.open();
    TrainOptions options;
    options.out_dir = out.dir();
    const auto result = grid_search(m, s, parse_view(o_.view), grid, spec, o_.train, options);
    out.file(result.best_model.metadata_uri.filename().string());
    out.file(result.best_model.weights_uri.filename().string());
    io::write_json(out.file("leaderboard.json"), {{"grid", to_json(grid)}, {"leaderboard", to_json(result.leaderboard)}});
    auto summary = model_summary(result.best_model);
    summary["stage"] = "grid-search";
    summary["best_config"] = to_json(result.best_config);
    summary["grid_points"] = result.leaderboard.size();
    emit(summary);
    return 0;
  }

  int fuse_train(RunOutput& out) {
    SvmConfig config;
    config.fusion_mode = parse_fusion_mode(o_.fusion_mode);
    config.tolerance = o_.svm_tolerance;
    config.max_passes = o_.max_passes;
    FusionOptions options;
    options.c_grid = o_.c_grid;
    for (double c : options.c_grid) {
      if (!(c > 0)) throw Error("invalid_config", "C values must be positive");
    }
    const Manifest m = load_manifest(o_.manifest);
    const auto s = load_split(o_.split_file);
    auto sag = load_artifact(o_.sagittal_model);
    auto cor = load_artifact(o_.coronal_model);
    out.open();
    // Keep the fusion directory self-contained.
    save_artifact(sag, out.dir() / "views");
    save_artifact(cor, out.dir() / "views");
    for (const auto* a : {&sag, &cor}) {
      out.file("views/" + a->metadata_uri.filename().string());
      out.file("views/" + a->weights_uri.filename().string());
    }
    const auto fused = train_fusion(std::make_shared<const ModelArtifact>(std::move(sag)),
                                    std::make_shared<const ModelArtifact>(std::move(cor)), m, s, config, options);
    save_fusion(fused, out.file("fusion.json"));
    nlohmann::json selection = nlohmann::json::array();
    for (const auto& [C, acc] : fused.c_selection) selection.push_back({{"C", C}, {"validation_accuracy", acc}});
    emit({{"stage", "fuse-train"}, {"model_id", fused.model_id}, {"model", (out.dir() / "fusion.json").string()},
          {"C", fused.svm.config.C}, {"c_selection", selection}, {"support_vectors", fused.svm.support_indices.size()}});
    return 0;
  }

  int predict(RunOutput& out) {
    const auto model = load_any_model(o_.model);
    const Manifest m = load_manifest(o_.manifest);
    const auto s = load_split(o_.split_file);
    const Subset subset = parse_subset(o_.subset);
    out.open();
    const auto records = std::visit([&](const auto& x) { return predict_subset(x, m, s, subset); }, model);
    save_predictions(records, out.file("predictions.jsonl"));
    emit({{"stage", "predict"}, {"predictions", (out.dir() / "predictions.jsonl").string()}, {"count", records.size()},
          {"rater_id", records.empty() ? "" : records.front().rater_id}});
    return 0;
  }

  int saliency(RunOutput& out) {
    const auto model = load_any_model(o_.model);
    const Manifest m = load_manifest(o_.manifest);
    const StudyRecord* record = m.find(o_.patient);
    if (!record) throw Error("unknown_patient", "patient " + o_.patient + " is not in the manifest");
    out.open();
    const auto maps = std::visit([&](const auto& x) { return compute_saliency(x, *record); }, model);
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [view, map] : maps) {
      const std::string stem = o_.patient + "_" + std::string(to_string(view));
      save_saliency_map(map, out.file(stem + "_saliency.bin"));
      render_overlay(record->image(view), map, o_.colormap, out.file(stem + "_overlay.png"), o_.alpha);
      list.push_back({{"view", std::string(to_string(view))}, {"height", map.height}, {"width", map.width},
                      {"map", stem + "_saliency.bin"}, {"overlay", stem + "_overlay.png"}});
    }
    const std::string model_id = maps.begin()->second.model_id;
    const nlohmann::json meta = {{"method", kSaliencyMethod}, {"model_id", model_id}, {"patient_id", o_.patient},
                                 {"colormap", o_.colormap}, {"alpha", o_.alpha}, {"maps", list}};
    io::write_json(out.file("saliency.json"), meta);
    emit({{"stage", "saliency"}, {"out_dir", out.dir().string()}, {"maps", list}});
    return 0;
  }

  int evaluate(RunOutput& out) {
    const Manifest m = load_manifest(o_.truth);
    std::map<std::string, Label> truth;
    for (const auto& r : m.records) truth[r.patient_id] = r.label;
    std::vector<PredictionRecord> all;
    for (const auto& p : o_.predictions) {
      auto records = load_predictions(p);
      all.insert(all.end(), records.begin(), records.end());
    }
    const auto eval = evaluate_predictions(all, truth);
    out.open();
    io::write_json(out.file("report.json"), to_json(eval));
    io::write_json(out.file("plot.json"), to_json(eval.plot));
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : eval.report.rows) rows.push_back({{"rater_id", row.rater_id}, {"accuracy", row.accuracy}});
    emit({{"stage", "evaluate"}, {"report", (out.dir() / "report.json").string()}, {"rows", rows}});
    return 0;
  }

  int reproduce(RunOutput& out) {
    const Table2Dataset data = o_.table2.empty() ? bundled_table2() : load_table2(o_.table2);
    const auto report = reproduce_paper_tables(data);
    out.open();
    io::write_json(out.file("reproduction.json"), to_json(report));
    nlohmann::json accuracies = nlohmann::json::object();
    for (const auto& r : report.raters) {
      accuracies[r.rater_id] = {{"percent", std::round(*r.accuracy.computed * 10000.0) / 100.0},
                                {"pass", r.accuracy.pass}};
    }
    emit({{"stage", "reproduce-tables"}, {"report", (out.dir() / "reproduction.json").string()},
          {"accuracy", accuracies}, {"all_pass", report.all_pass()}});
    return report.all_pass() ? 0 : 1;
  }

  int roc_plot(RunOutput& out) {
    PlotData plot;
    if (!o_.plot.empty()) {
      const auto j = io::read_json(o_.plot);
      plot = plot_from_json(j.contains("plot") ? j.at("plot") : j);
    }
    if (o_.table2_readers) {
      const auto data = bundled_table2();
      std::vector<Label> truth;
      for (const auto& row : data) truth.push_back(row.ground_truth);
      for (std::string_view rater : {"surgeon", "resident"}) {
        std::vector<Label> calls;
        for (const auto& row : data) calls.push_back(rater_call(row, rater));
        plot.rater_points.push_back({std::string(rater), rater_point(confusion(calls, truth))});
      }
    }
    if (plot.curves.empty() && plot.rater_points.empty()) {
      throw Error("invalid_request", "nothing to plot: pass --plot and/or --table2-readers");
    }
    out.open();
    io::write_file_atomic(out.file("roc.svg"), render_roc_svg(plot, o_.size));
    emit({{"stage", "roc-plot"}, {"svg", (out.dir() / "roc.svg").string()}, {"curves", plot.curves.size()},
          {"rater_points", plot.rater_points.size()}});
    return 0;
  }

  int serve() {
    ReaderService service(load_service_config(o_.service_config));
    httplib::Server server;
    install_routes(server, service);
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    const int port = o_.port == 0 ? server.bind_to_any_port(o_.host) : (server.bind_to_port(o_.host, o_.port) ? o_.port : -1);
    if (port < 0) throw Error("bind_failed", "cannot listen on " + o_.host + ":" + std::to_string(o_.port));
    emit({{"stage", "serve"}, {"host", o_.host}, {"port", port}});
    out_.flush();
    std::thread waiter([&] {
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
    });
    server.listen_after_bind();
    ::kill(::getpid(), SIGTERM);
    waiter.join();
    return 0;
  }

  std::ostream& out_;
  std::ostream& err_;
  Options o_;
};

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return App(out, err).run(argc, argv);
}

}  // namespace cartimark::cli
