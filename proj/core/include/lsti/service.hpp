#pragma once

#include <memory>
#include <string>

#include "lsti/session.hpp"

namespace lsti {

/// JSON-over-HTTP front end of a SessionStore. Every body carries "v": 1.
///
///   POST /sessions                  create
///   GET  /sessions/{id}/state
///   POST /sessions/{id}/actions     {action, object, room, intention, duration}
///   GET  /sessions/{id}/predictions
///   GET  /sessions/{id}/conflicts
///   POST /sessions/{id}/resume
///   GET  /sessions/{id}/export      ObservationLog
///   GET  /config                    WorldConfig
///
/// Errors: {"v":1,"error":{"kind","rule"?,"message"}} with 400 (request),
/// 404 (not found), 422 (validation) or 500.
class HttpService {
 public:
  explicit HttpService(SessionStore& store);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds and returns the port; 0 picks a free one. Throws Error.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lsti
