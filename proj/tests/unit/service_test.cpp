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

#include <thread>

#include "cartimark/service/http.hpp"
#include "durability.hpp"
#include "fixtures.hpp"
#include "study_fixture.hpp"

using namespace cartimark;
using namespace cartimark::testing;

namespace {

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

class Service : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { study_ = StudyFixture::build().release(); }
  static void TearDownTestSuite() { delete study_; }

  // Fresh storage per test.
  void SetUp() override {
    config_ = study_->config;
    config_.storage_root = study_->dir / ("store-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(config_.storage_root);
  }

  std::string replay(ReaderService& service, std::string_view rater, std::uint64_t seed,
                     std::vector<nlohmann::json>* traffic = nullptr) {
    const auto rows = study_->table2_assignment();
    const auto session = service.create_session(std::string(rater), std::string(rater), "cohort/test", seed);
    if (traffic) traffic->push_back(ReaderService::session_json(session));
    for (;;) {
      const auto next = service.next_case(session.session_id);
      if (traffic) traffic->push_back(next);
      const auto id = next.at("patient_id").get<std::string>();
      const auto call = rater_call(rows.at(id), rater);
      const auto ack = service.submit_diagnosis(session.session_id, id, std::string(to_string(call)));
      if (traffic) traffic->push_back(ack);
      if (ack.at("status") == "complete") break;
    }
    return session.session_id;
  }

  static inline StudyFixture* study_ = nullptr;
  ServiceConfig config_;
};

}  // namespace

TEST(LabelScan, FindsNestedLeaks) {
  EXPECT_TRUE(label_leaks({{"a", {{"b", 1}}}}).empty());
  EXPECT_EQ(label_leaks({{"a", {{"label", 1}}}}).size(), 1u);
  EXPECT_EQ(label_leaks({{"a", {1, "defect"}}}).size(), 1u);
}

TEST_F(Service, StudyCohortHasReportedTestComposition) {
  const auto ids = study_->split.patients(Subset::test);
  ASSERT_EQ(ids.size(), 29u);
  std::size_t defects = 0;
  for (const auto& id : ids) defects += study_->truth(id) == Label::defect ? 1 : 0;
  EXPECT_EQ(defects, 20u);
}

TEST_F(Service, CreateSession) {
  ReaderService service(config_);
  const auto a = service.create_session("r1", "surgeon", "cohort/test", 7);
  const auto b = service.create_session("r2", "resident", "cohort/test", 7);
  const auto c = service.create_session("r3", "resident", "cohort/test", 8);
  EXPECT_EQ(a.case_order.size(), 29u);
  EXPECT_EQ(a.case_order, b.case_order);
  EXPECT_NE(a.case_order, c.case_order);
  EXPECT_NE(a.session_id, b.session_id);
  auto sorted = a.case_order;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, study_->split.patients(Subset::test));
  EXPECT_EQ(error_code([&] { service.create_session("r", "x", "cohort/train", 1); }), "not_a_test_subset");
  EXPECT_EQ(error_code([&] { service.create_session("r", "x", "nothing/test", 1); }), "unknown_dataset");
  EXPECT_EQ(error_code([&] { service.create_session("r", "x", "cohort", 1); }), "invalid_request");
  EXPECT_EQ(error_code([&] { service.next_case("missing"); }), "unknown_session");
}

TEST_F(Service, NextCaseIsBlinded) {
  ReaderService service(config_);
  std::vector<nlohmann::json> traffic;
  const auto id = replay(service, "surgeon", 3, &traffic);
  EXPECT_EQ(traffic.size(), 1u + 2 * 29u);
  EXPECT_EQ(traffic[1]["progress"]["index"], 1);
  EXPECT_EQ(traffic[1]["progress"]["total"], 29);
  for (const auto& payload : traffic) {
    EXPECT_TRUE(label_leaks(payload).empty()) << payload.dump();
    for (View v : kViews) {
      if (!payload.contains("images")) continue;
      const std::string url = payload["images"][std::string(to_string(v))];
      EXPECT_EQ(url.find(payload["patient_id"].get<std::string>()), std::string::npos);
      ASSERT_TRUE(service.image_path(url.substr(8)).has_value());
    }
  }
  EXPECT_EQ(error_code([&] { service.next_case(id); }), "session_complete");
}

TEST_F(Service, ReportReproducesReportedReaders) {
  ReaderService service(config_);
  const auto surgeon = service.session_report(replay(service, "surgeon", 11));
  EXPECT_NEAR(surgeon["reader"]["accuracy"].get<double>(), 0.8276, 0.00005);
  EXPECT_NEAR(surgeon["rater_point"]["fpr"].get<double>(), 0.4444, 0.00005);
  EXPECT_NEAR(surgeon["rater_point"]["tpr"].get<double>(), 0.95, 1e-12);
  EXPECT_EQ(surgeon["reader"]["confusion"], to_json(ConfusionMatrix{19, 1, 4, 5}));
  const auto resident = service.session_report(replay(service, "resident", 12));
  EXPECT_NEAR(resident["reader"]["accuracy"].get<double>(), 0.3448, 0.00005);
  EXPECT_EQ(resident["plot"]["rater_points"].size(), 1u);
}

TEST_F(Service, ReportEqualsOfflineDiagnostics) {
  ReaderService service(config_);
  const auto session = service.create_session("all-correct", "test", "cohort/test", 4);
  std::vector<Label> calls, truth;
  Rng rng(4);
  for (const auto& id : session.case_order) {
    const Label call = rng.below(4) == 0 ? Label::no_defect : study_->truth(id);
    calls.push_back(call);
    truth.push_back(study_->truth(id));
    service.submit_diagnosis(session.session_id, id, std::string(to_string(call)));
  }
  const auto report = service.session_report(session.session_id);
  EXPECT_EQ(report["reader"], to_json(diagnostic_metrics(confusion(calls, truth), "all-correct")));

  const auto perfect = service.create_session("perfect", "test", "cohort/test", 5);
  for (const auto& id : perfect.case_order) {
    service.submit_diagnosis(perfect.session_id, id, std::string(to_string(study_->truth(id))));
  }
  const auto r = service.session_report(perfect.session_id);
  for (const char* m : {"accuracy", "sensitivity", "specificity", "ppv", "npv"}) EXPECT_EQ(r["reader"][m], 1.0) << m;
  EXPECT_EQ(r["rater_point"]["fpr"], 0.0);
  EXPECT_EQ(r["rater_point"]["tpr"], 1.0);
}

TEST_F(Service, SubmissionRules) {
  ReaderService service(config_);
  const auto s = service.create_session("r", "x", "cohort/test", 9);
  const auto& order = s.case_order;
  const auto first = service.submit_diagnosis(s.session_id, order[0], "defect");
  EXPECT_EQ(first["progress"]["completed"], 1);
  EXPECT_EQ(first["status"], "active");
  EXPECT_EQ(service.submit_diagnosis(s.session_id, order[0], "defect"), first);
  EXPECT_EQ(error_code([&] { service.submit_diagnosis(s.session_id, order[0], "no_defect"); }), "conflicting_duplicate");
  service.submit_diagnosis(s.session_id, order[1], "no_defect");
  service.submit_diagnosis(s.session_id, order[2], "no_defect");
  EXPECT_EQ(error_code([&] { service.submit_diagnosis(s.session_id, order[5], "defect"); }), "out_of_order");
  EXPECT_EQ(error_code([&] { service.submit_diagnosis(s.session_id, order[3], "maybe"); }), "invalid_request");
  EXPECT_EQ(error_code([&] { service.session_report(s.session_id); }), "incomplete_session");
  EXPECT_EQ(service.get_session(s.session_id).responses.size(), 3u);
  for (std::size_t i = 3; i < order.size(); ++i) service.submit_diagnosis(s.session_id, order[i], "defect");
  EXPECT_EQ(service.submit_diagnosis(s.session_id, order.back(), "defect")["status"], "complete");
  EXPECT_EQ(error_code([&] { service.submit_diagnosis(s.session_id, "P9999", "defect"); }), "session_complete");

  // One log line per stored response, plus the creation event.
  const auto text = io::read_file(JsonlSessionStore(config_.storage_root).log_path(s.session_id));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 30);
}

TEST_F(Service, RestartRecoversAndTrimsTornTail) {
  std::string id;
  std::vector<std::string> order;
  {
    ReaderService service(config_);
    const auto s = service.create_session("r", "x", "cohort/test", 2);
    id = s.session_id;
    order = s.case_order;
    for (int i = 0; i < 4; ++i) service.submit_diagnosis(id, order[static_cast<std::size_t>(i)], "defect");
  }
  const auto log = JsonlSessionStore(config_.storage_root).log_path(id);
  {
    std::ofstream out(log, std::ios::app | std::ios::binary);
    out << R"({"event":"response","index":4,"patient_id":")";
  }
  ReaderService restarted(config_);
  const auto s = restarted.get_session(id);
  EXPECT_EQ(s.responses.size(), 4u);
  EXPECT_EQ(restarted.next_case(id)["patient_id"], order[4]);
  restarted.submit_diagnosis(id, order[4], "no_defect");
  ReaderService again(config_);
  EXPECT_EQ(again.get_session(id).responses.size(), 5u);
  EXPECT_EQ(again.get_session(id).responses[4].diagnosis, Label::no_defect);
}

TEST_F(Service, ConcurrentRetriesStoreOneResponsePerCase) {
  ReaderService service(config_);
  std::vector<ReaderSession> sessions;
  for (int i = 0; i < 3; ++i) sessions.push_back(service.create_session("c" + std::to_string(i), "x", "cohort/test", 20 + static_cast<std::uint64_t>(i)));
  std::vector<std::thread> threads;
  for (const auto& s : sessions) {
    for (int dup = 0; dup < 2; ++dup) {
      threads.emplace_back([&service, s] {
        for (const auto& id : s.case_order) {
          for (;;) {
            try {
              service.submit_diagnosis(s.session_id, id, scripted_diagnosis(id));
              break;
            } catch (const Error& e) {
              if (e.code() != "out_of_order") throw;
              std::this_thread::yield();
            }
          }
        }
      });
    }
  }
  for (auto& t : threads) t.join();
  ReaderService reloaded(config_);
  for (const auto& s : sessions) {
    const auto stored = reloaded.get_session(s.session_id);
    ASSERT_EQ(stored.responses.size(), 29u);
    for (std::size_t i = 0; i < 29; ++i) EXPECT_EQ(stored.responses[i].patient_id, s.case_order[i]);
  }
}

TEST_F(Service, KillBetweenSubmitAndAckLosesNothing) {
  std::size_t interrupted = 0, in_flight = 0;
  for (std::uint64_t trial = 0; trial < 6; ++trial) {
    const auto r = run_kill_trial(config_, "cohort/test", 1000 + trial);
    EXPECT_FALSE(r.lost_acknowledged) << r.detail;
    EXPECT_GE(r.stored, r.acknowledged);
    EXPECT_TRUE(r.completed_after_restart);
    interrupted += r.acknowledged < 29 ? 1 : 0;
    in_flight += r.stored > r.acknowledged ? 1 : 0;
  }
  EXPECT_GT(interrupted, 0u);
  EXPECT_GT(in_flight, 0u);
}

class ServiceModels : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    bench_ = PhantomBench::build().release();
    const auto fused = train_fusion(bench_->sagittal, bench_->coronal, bench_->manifest, bench_->split, SvmConfig{});
    save_fusion(fused, bench_->dir / "models" / "fusion.json");
  }
  static void TearDownTestSuite() { delete bench_; }

  ServiceConfig config() const {
    ServiceConfig c;
    c.storage_root = bench_->dir / "store";
    c.datasets["bench"] = {bench_->dir / "phantom" / "manifest.json", bench_->dir / "split.json"};
    c.models["cnn1"] = bench_->dir / "models" / "fusion.json";
    c.models["cnn2"] = bench_->sagittal->metadata_uri;
    return c;
  }

  static inline PhantomBench* bench_ = nullptr;
};

TEST_F(ServiceModels, PredictionsAreCachedPerDataset) {
  ReaderService service(config());
  const auto first = service.model_predict("bench/test", "cnn1", true);
  EXPECT_EQ(first.size(), bench_->split.size(Subset::test));
  for (const auto& p : first) EXPECT_EQ(p.threshold, 0.0);
  const auto cache = service.cache_path("cnn1", "bench/test");
  const auto stamp = std::filesystem::last_write_time(cache);
  const auto second = service.model_predict("bench/test", "cnn1");
  EXPECT_EQ(std::filesystem::last_write_time(cache), stamp);
  ASSERT_EQ(second.size(), first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(second[i].score, first[i].score);
    EXPECT_EQ(second[i].call, first[i].call);
  }
  const auto single = service.model_predict("bench/test", "cnn2");
  for (const auto& p : single) EXPECT_EQ(p.threshold, 0.5);
  EXPECT_EQ(error_code([&] { service.model_predict("bench/test", "cnn9"); }), "unknown_model");
  EXPECT_EQ(error_code([&] { service.model_predict("none/test", "cnn1"); }), "unknown_dataset");

  // Cached curves appear in reader reports on the same dataset.
  const auto s = service.create_session("r", "x", "bench/test", 1);
  for (const auto& id : s.case_order) service.submit_diagnosis(s.session_id, id, "defect");
  const auto report = service.session_report(s.session_id);
  EXPECT_EQ(report["plot"]["curves"].size(), 2u);
  EXPECT_EQ(report["models"].size(), 2u);
  EXPECT_EQ(report["plot"]["rater_points"].size(), 3u);
}

TEST_F(ServiceModels, HttpApi) {
  ServiceConfig c = config();
  c.storage_root = bench_->dir / "http-store";
  c.api_token = "secret-token";
  ReaderService service(c);
  httplib::Server server;
  install_routes(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const httplib::Headers auth = {{"Authorization", "Bearer secret-token"}};
  auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  auto denied = client.Post("/sessions", R"({"reader_id":"a","dataset_ref":"bench/test"})", "application/json");
  ASSERT_TRUE(denied);
  EXPECT_EQ(denied->status, 401);
  EXPECT_EQ(nlohmann::json::parse(denied->body)["code"], "unauthorized");

  auto created = client.Post("/sessions", auth, R"({"reader_id":"a","reader_role":"surgeon","dataset_ref":"bench/test","seed":3})",
                             "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  const auto session = nlohmann::json::parse(created->body);
  const std::string id = session["session_id"];
  EXPECT_TRUE(label_leaks(session).empty());

  auto early = client.Get("/sessions/" + id + "/report", auth);
  EXPECT_EQ(early->status, 409);
  EXPECT_EQ(nlohmann::json::parse(early->body)["code"], "incomplete_session");

  for (;;) {
    auto next = client.Get("/sessions/" + id + "/next", auth);
    ASSERT_EQ(next->status, 200);
    const auto payload = nlohmann::json::parse(next->body);
    EXPECT_TRUE(label_leaks(payload).empty());
    auto image = client.Get(payload["images"]["sagittal"].get<std::string>());
    ASSERT_EQ(image->status, 200);
    EXPECT_EQ(image->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(image->body.substr(1, 3), "PNG");
    const nlohmann::json body = {{"patient_id", payload["patient_id"]}, {"diagnosis", "defect"}};
    auto ack = client.Post("/sessions/" + id + "/responses", auth, body.dump(), "application/json");
    ASSERT_EQ(ack->status, 200);
    auto retry = client.Post("/sessions/" + id + "/responses", auth, body.dump(), "application/json");
    EXPECT_EQ(retry->body, ack->body);
    if (nlohmann::json::parse(ack->body)["status"] == "complete") break;
  }
  auto done = client.Get("/sessions/" + id + "/next", auth);
  EXPECT_EQ(done->status, 409);
  auto report = client.Get("/sessions/" + id + "/report", auth);
  ASSERT_EQ(report->status, 200);
  EXPECT_EQ(nlohmann::json::parse(report->body)["cases"].size(), bench_->split.size(Subset::test));

  auto preds = client.Get("/models/cnn1/predictions?dataset=bench/test", auth);
  ASSERT_EQ(preds->status, 200);
  EXPECT_EQ(nlohmann::json::parse(preds->body)["predictions"].size(), bench_->split.size(Subset::test));
  EXPECT_EQ(client.Get("/models/zzz/predictions?dataset=bench/test", auth)->status, 404);
  EXPECT_EQ(client.Get("/models/cnn1/predictions", auth)->status, 400);
  EXPECT_EQ(client.Get("/sessions/nope/next", auth)->status, 404);
  EXPECT_EQ(client.Get("/images/0123abcd")->status, 404);
  auto bad = client.Post("/sessions", auth, "{not json", "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(nlohmann::json::parse(bad->body)["code"], "invalid_request");

  server.stop();
  thread.join();
}
