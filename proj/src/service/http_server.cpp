#include "triage/service/http_server.hpp"

#include "httplib.h"
#include "triage/error.hpp"
#include "triage/util/log.hpp"

namespace triage::service {

int status_for(const std::exception& e) {
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const ConflictError*>(&e)) return 409;
  if (dynamic_cast<const IncompatibleVersionError*>(&e)) return 409;
  if (dynamic_cast<const GoneError*>(&e)) return 410;
  if (dynamic_cast<const PreconditionError*>(&e)) return 412;
  if (dynamic_cast<const ValidationError*>(&e)) return 400;
  if (dynamic_cast<const SchemaError*>(&e)) return 400;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return 400;
  return 500;
}

util::Json error_body(const std::exception& e) {
  const int status = status_for(e);
  const char* kind = "internal";
  switch (status) {
    case 400: kind = "validation"; break;
    case 404: kind = "not_found"; break;
    case 409: kind = "conflict"; break;
    case 410: kind = "gone"; break;
    case 412: kind = "precondition_failed"; break;
    default: break;
  }
  return {{"error", kind}, {"message", e.what()}};
}

struct HttpServer::Impl {
  SessionManager& sessions;
  httplib::Server server;

  explicit Impl(SessionManager& s) : sessions(s) {}

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      res.set_content(fn().dump(), "application/json");
      res.status = 200;
    } catch (const std::exception& e) {
      res.status = status_for(e);
      if (res.status == 500) util::log(util::LogLevel::kError, e.what());
      res.set_content(error_body(e).dump(), "application/json");
    }
  }

  static util::Json body_of(const httplib::Request& req) {
    if (req.body.empty()) return util::Json::object();
    try {
      return util::Json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("request body is not JSON: ") + e.what());
    }
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { return sessions.start_session(body_of(req)); });
    });
    server.Post(R"(/sessions/([^/]+)/answers)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] { return sessions.answer(req.matches[1], body_of(req)); });
                });
    server.Get(R"(/sessions/([^/]+)/assessment)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { return sessions.get_assessment(req.matches[1]); });
               });
    server.Post(R"(/sessions/([^/]+)/feedback)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] { return sessions.feedback(req.matches[1], body_of(req)); });
                });
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { return sessions.health(); });
    });
  }
};

HttpServer::HttpServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {
  impl_->routes();
}

HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int HttpServer::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace triage::service
