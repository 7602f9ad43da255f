#pragma once

#include <memory>
#include <string>

#include "triage/service/session_manager.hpp"
#include "triage/util/json_io.hpp"

namespace triage::service {

// HTTP status for a library error: NotFound 404, Conflict 409, Gone 410,
// Precondition 412, Validation/Schema 400, IncompatibleVersion 409, anything
// else 500.
int status_for(const std::exception& e);
util::Json error_body(const std::exception& e);

// JSON API over a SessionManager:
//   POST /sessions, POST /sessions/{id}/answers, GET /sessions/{id}/assessment,
//   POST /sessions/{id}/feedback, GET /healthz.
class HttpServer {
 public:
  explicit HttpServer(SessionManager& sessions);
  ~HttpServer();

  // Blocks until stop(). Returns false when the address cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace triage::service
