#pragma once

#include <memory>
#include <string>
#include <thread>

#include "lesion_triage/error.hpp"
#include "lesion_triage/service/service.hpp"

namespace httplib {
class Server;
}

namespace lt::service {

int http_status(ErrorKind kind);

/// Routes:
///   POST /v1/scans                    multipart image + questionnaire
///   GET  /v1/scans/{id}
///   GET  /v1/scans/{id}/saliency.png
///   GET  /v1/analytics/summary?from=&to=
///   GET  /v1/education/{class}
///   GET  /v1/review/queue?offset=&limit=   bearer
///   POST /v1/review/{id}                   bearer, {verdict, reviewer, note}
///   GET  /v1/records/{id}/image            bearer
///   GET  /v1/records/{id}/base-image       bearer
///   GET  /v1/health
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Binds and returns the port (an ephemeral one when port is 0).
  int bind(const std::string& host, int port);
  /// Serves until stop().
  void listen();
  /// bind() plus listen() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  void routes();

  Service& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace lt::service
