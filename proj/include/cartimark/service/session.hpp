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

#include <sys/types.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/data/types.hpp"

namespace cartimark {

enum class SessionStatus { active, complete };

inline std::string_view to_string(SessionStatus s) { return s == SessionStatus::active ? "active" : "complete"; }

inline SessionStatus parse_session_status(std::string_view s) {
  if (s == "active") return SessionStatus::active;
  if (s == "complete") return SessionStatus::complete;
  throw Error("malformed_session", "unknown session status '" + std::string(s) + "'");
}

struct CaseResponse {
  std::string patient_id;
  Label diagnosis = Label::no_defect;
  std::string responded_at;
  std::int64_t elapsed_ms = 0;
};

struct ReaderSession {
  std::string session_id;
  std::string reader_id;
  std::string reader_role;
  std::string dataset_ref;
  std::uint64_t seed = 0;
  std::vector<std::string> case_order;
  std::vector<CaseResponse> responses;
  std::string created;
  std::string completed;

  std::size_t cursor() const { return responses.size(); }
  SessionStatus status() const {
    return responses.size() == case_order.size() ? SessionStatus::complete : SessionStatus::active;
  }
};

/// UTC, second resolution, ISO 8601.
inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json to_json(const CaseResponse& r) {
  return {{"patient_id", r.patient_id},
          {"diagnosis", std::string(to_string(r.diagnosis))},
          {"responded_at", r.responded_at},
          {"elapsed_ms", r.elapsed_ms}};
}

inline CaseResponse case_response_from_json(const nlohmann::json& j) {
  return {j.at("patient_id").get<std::string>(), parse_label(j.at("diagnosis").get<std::string>()),
          j.value("responded_at", std::string()), j.value("elapsed_ms", std::int64_t{0})};
}

/// Session descriptor without responses.
inline nlohmann::json session_header_json(const ReaderSession& s) {
  return {{"session_id", s.session_id}, {"reader_id", s.reader_id}, {"reader_role", s.reader_role},
          {"dataset_ref", s.dataset_ref}, {"seed", s.seed},         {"case_order", s.case_order},
          {"created", s.created}};
}

/// Durable storage for reader sessions.
class SessionStore {
 public:
  virtual ~SessionStore() = default;
  virtual std::vector<ReaderSession> load_all() = 0;
  virtual void create(const ReaderSession& session) = 0;
  /// Must be durable when it returns.
  virtual void append_response(const ReaderSession& session, const CaseResponse& response) = 0;
};

/// One append-only JSON-lines event log per session plus a snapshot index.
/// The log is authoritative; the index is rebuilt from the logs on load.
class JsonlSessionStore final : public SessionStore {
 public:
  explicit JsonlSessionStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(dir(), ec);
    if (ec) throw Error("storage_failure", "cannot create " + dir().string() + ": " + ec.message());
  }

  std::vector<ReaderSession> load_all() override {
    std::vector<ReaderSession> out;
    std::vector<std::filesystem::path> logs;
    for (const auto& entry : std::filesystem::directory_iterator(dir())) {
      if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
      if (auto s = load_log(path)) out.push_back(std::move(*s));
    }
    return out;
  }

  void create(const ReaderSession& session) override {
    const auto path = log_path(session.session_id);
    if (std::filesystem::exists(path)) throw Error("storage_failure", "session log already exists: " + path.string());
    nlohmann::json event = {{"event", "created"}, {"session", session_header_json(session)}};
    io::append_line_durable(path, event.dump());
    io::fsync_path(dir(), O_RDONLY | O_DIRECTORY);
    write_index_entry(session);
  }

  void append_response(const ReaderSession& session, const CaseResponse& response) override {
    nlohmann::json event = to_json(response);
    event["event"] = "response";
    event["index"] = session.responses.size();
    io::append_line_durable(log_path(session.session_id), event.dump());
  }

  /// Refreshes the snapshot index; not needed for durability.
  void write_index_entry(const ReaderSession& session) {
    const auto path = dir() / "index.json";
    nlohmann::json index = nlohmann::json::object();
    if (std::filesystem::exists(path)) {
      try {
        index = io::read_json(path);
      } catch (const Error&) {
        index = nlohmann::json::object();
      }
    }
    index[session.session_id] = {{"reader_id", session.reader_id},
                                 {"dataset_ref", session.dataset_ref},
                                 {"status", std::string(to_string(session.status()))},
                                 {"responses", session.responses.size()},
                                 {"total", session.case_order.size()}};
    io::write_json(path, index);
  }

  std::filesystem::path log_path(const std::string& session_id) const { return dir() / (session_id + ".jsonl"); }

 private:
  std::filesystem::path dir() const { return root_ / "sessions"; }

  /// Replays a log. A torn final line (crash mid-write) is dropped and cut
  /// from the file so later appends stay line-aligned.
  static std::optional<ReaderSession> load_log(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    std::optional<ReaderSession> session;
    std::size_t pos = 0, good_end = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string::npos) break;
      const std::string line = text.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) {
        good_end = pos;
        continue;
      }
      nlohmann::json event;
      try {
        event = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error("corrupt_session_log", path.string() + ": " + e.what());
      }
      const auto kind = event.value("event", std::string());
      if (kind == "created") {
        const auto& h = event.at("session");
        session = ReaderSession{};
        session->session_id = h.at("session_id").get<std::string>();
        session->reader_id = h.at("reader_id").get<std::string>();
        session->reader_role = h.value("reader_role", std::string());
        session->dataset_ref = h.at("dataset_ref").get<std::string>();
        session->seed = h.value("seed", std::uint64_t{0});
        session->case_order = h.at("case_order").get<std::vector<std::string>>();
        session->created = h.value("created", std::string());
      } else if (kind == "response") {
        if (!session) throw Error("corrupt_session_log", path.string() + ": response before creation");
        if (event.at("index").get<std::size_t>() != session->responses.size()) {
          throw Error("corrupt_session_log", path.string() + ": response index out of sequence");
        }
        session->responses.push_back(case_response_from_json(event));
        if (session->status() == SessionStatus::complete) session->completed = session->responses.back().responded_at;
      }
      good_end = pos;
    }
    if (good_end < text.size()) {
      if (::truncate(path.c_str(), static_cast<off_t>(good_end)) != 0) {
        throw Error("storage_failure", "cannot trim torn tail of " + path.string());
      }
      io::fsync_path(path, O_RDONLY);
    }
    return session;
  }

  std::filesystem::path root_;
};

}  // namespace cartimark
