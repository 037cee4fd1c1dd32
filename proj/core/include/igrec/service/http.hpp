#pragma once

#include <memory>
#include <string>

#include "igrec/service/session.hpp"

namespace igrec::service {

/// HTTP front end over a SessionManager.
///
///   POST /sessions                {top_id, mode, user_tag?, seed?}   201
///   POST /sessions/{id}/feedback  {score?, idempotency_key?}
///   GET  /sessions/{id}
///   GET  /catalog/tops?offset=&limit=
///   GET  /healthz
///
/// Errors are JSON {code, message} with the matching HTTP status.
class HttpService {
 public:
  explicit HttpService(SessionManager& sessions);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds to host:port (port 0 picks a free port) and returns the bound port.
  /// Throws Error when the address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace igrec::service
