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
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cartimark/core/error.hpp"
#include "cartimark/core/io.hpp"
#include "cartimark/service/reader_service.hpp"

namespace cartimark {

/// HTTP status for a service error code.
inline int http_status(std::string_view code) {
  if (code == "unknown_session" || code == "unknown_dataset" || code == "unknown_model" || code == "unknown_image" ||
      code == "not_found") {
    return 404;
  }
  if (code == "out_of_order" || code == "conflicting_duplicate" || code == "session_complete" ||
      code == "incomplete_session") {
    return 409;
  }
  if (code == "invalid_request" || code == "not_a_test_subset" || code == "malformed_json") return 400;
  if (code == "unauthorized") return 401;
  return 500;
}

namespace http_detail {

inline void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline void send_error(httplib::Response& res, const std::string& code, const std::string& message) {
  send_json(res, {{"code", code}, {"message", message}}, http_status(code));
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  try {
    auto body = nlohmann::json::parse(req.body);
    if (!body.is_object()) throw Error("invalid_request", "request body must be a JSON object");
    return body;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("invalid_request", std::string("malformed JSON body: ") + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& body, const char* name) {
  if (!body.contains(name)) throw Error("invalid_request", std::string("missing field '") + name + "'");
  try {
    return body.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error("invalid_request", std::string("field '") + name + "' has the wrong type");
  }
}

template <typename F>
httplib::Server::Handler guarded(F handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, "internal_error", e.what());
    }
  };
}

}  // namespace http_detail

/// Registers the reader-study API on `server`. The service must outlive it.
inline void install_routes(httplib::Server& server, ReaderService& service) {
  using namespace http_detail;
  const auto token = service.config().api_token;

  server.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Cache-Control", "no-store");
    if (req.method == "OPTIONS") {
      res.status = 204;
      return httplib::Server::HandlerResponse::Handled;
    }
    if (token && req.path != "/healthz" && req.path.rfind("/images/", 0) != 0 &&
        (req.path.rfind("/sessions", 0) == 0 || req.path.rfind("/models", 0) == 0)) {
      if (req.get_header_value("Authorization") != "Bearer " + *token) {
        send_error(res, "unauthorized", "missing or invalid API token");
        return httplib::Server::HandlerResponse::Handled;
      }
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, {{"status", "ok"}}); });

  server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto session = service.create_session(field<std::string>(body, "reader_id"),
                                                body.value("reader_role", std::string()),
                                                field<std::string>(body, "dataset_ref"),
                                                body.value("seed", std::uint64_t{0}));
    send_json(res, ReaderService::session_json(session), 201);
  }));

  server.Get(R"(/sessions/([^/]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, ReaderService::session_json(service.get_session(req.matches[1])));
  }));

  server.Get(R"(/sessions/([^/]+)/next)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, service.next_case(req.matches[1]));
  }));

  server.Post(R"(/sessions/([^/]+)/responses)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    std::optional<std::int64_t> elapsed;
    if (body.contains("elapsed_ms") && !body["elapsed_ms"].is_null()) elapsed = field<std::int64_t>(body, "elapsed_ms");
    send_json(res, service.submit_diagnosis(req.matches[1], field<std::string>(body, "patient_id"),
                                            field<std::string>(body, "diagnosis"), elapsed));
  }));

  server.Get(R"(/sessions/([^/]+)/report)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, service.session_report(req.matches[1]));
  }));

  server.Get(R"(/models/([^/]+)/predictions)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("dataset")) throw Error("invalid_request", "query parameter 'dataset' is required");
    const bool force = req.get_param_value("force") == "1" || req.get_param_value("force") == "true";
    const auto records = service.model_predict(req.get_param_value("dataset"), req.matches[1], force);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : records) out.push_back(to_json(r));
    send_json(res, {{"model_ref", std::string(req.matches[1])}, {"dataset_ref", req.get_param_value("dataset")},
                    {"predictions", out}});
  }));

  server.Get(R"(/images/([0-9a-f]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto path = service.image_path(req.matches[1]);
    if (!path) throw Error("unknown_image", "no such image");
    res.set_content(io::read_file(*path), "image/png");
  }));

  if (service.config().static_dir) server.set_mount_point("/", service.config().static_dir->string());

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty() && res.status == 404) send_error(res, "not_found", "no such route");
  });
}

}  // namespace cartimark
