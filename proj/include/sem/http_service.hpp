#pragma once

#include <httplib.h>

#include <string>

#include "sem/service.hpp"

namespace sem {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_spec:
    case ErrorCode::invalid_argument: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict:
    case ErrorCode::terminated: return 409;
    case ErrorCode::not_converged: return 422;
    case ErrorCode::infeasible:
    case ErrorCode::numerical:
    case ErrorCode::io: return 500;
  }
  return 500;
}

inline json error_body(ErrorCode code, const std::string& message, const std::string& path = {}) {
  json e{{"code", std::string(to_string(code))}, {"message", message}};
  if (!path.empty()) e["path"] = path;
  return {{"error", std::move(e)}};
}

/// HTTP front end for a SessionManager. With a non-empty token every request
/// must carry "Authorization: Bearer <token>".
class HttpService {
 public:
  explicit HttpService(SessionManager& sessions, std::string token = {}) : sessions_(sessions), token_(std::move(token)) {
    routes();
  }

  httplib::Server& server() { return server_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

 private:
  using Handler = std::function<json(const httplib::Request&)>;

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::invalid_argument, std::string("malformed request body: ") + e.what(), "$");
    }
  }

  auto wrap(Handler h, int ok_status = 200) {
    return [this, h = std::move(h), ok_status](const httplib::Request& req, httplib::Response& res) {
      json out;
      int status = ok_status;
      if (!token_.empty() && req.get_header_value("Authorization") != "Bearer " + token_) {
        status = 401;
        out = {{"error", {{"code", "unauthorized"}, {"message", "missing or wrong bearer token"}}}};
      } else {
        try {
          out = h(req);
        } catch (const Error& e) {
          status = http_status(e.code());
          out = error_body(e.code(), e.what(), e.path());
        } catch (const json::exception& e) {
          status = 400;
          out = error_body(ErrorCode::invalid_argument, e.what());
        } catch (const std::exception& e) {
          status = 500;
          out = {{"error", {{"code", "internal"}, {"message", e.what()}}}};
        }
      }
      res.status = status;
      res.set_content(out.dump(), "application/json");
    };
  }

  void routes() {
    server_.Get("/health", wrap([](const httplib::Request&) { return json{{"status", "ok"}}; }));
    server_.Get("/sessions", wrap([this](const httplib::Request&) { return json{{"sessions", sessions_.ids()}}; }));
    server_.Post("/sessions", wrap([this](const httplib::Request& r) { return sessions_.create(body_of(r)); }, 201));
    server_.Get(R"(/sessions/([A-Za-z0-9_-]+))",
                wrap([this](const httplib::Request& r) { return sessions_.view(r.matches[1]); }));
    server_.Post(R"(/sessions/([A-Za-z0-9_-]+)/arrivals)", wrap([this](const httplib::Request& r) {
                   return sessions_.post_arrivals(r.matches[1], body_of(r));
                 }));
    server_.Post(R"(/sessions/([A-Za-z0-9_-]+)/realize)",
                 wrap([this](const httplib::Request& r) { return sessions_.realize(r.matches[1]); }));
    server_.Post(R"(/sessions/([A-Za-z0-9_-]+)/whatif)", wrap([this](const httplib::Request& r) {
                   return sessions_.whatif(r.matches[1], body_of(r));
                 }));
    server_.Get(R"(/sessions/([A-Za-z0-9_-]+)/trace)",
                wrap([this](const httplib::Request& r) { return sessions_.trace(r.matches[1]); }));
  }

  SessionManager& sessions_;
  std::string token_;
  httplib::Server server_;
};

}  // namespace sem
