#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "spe/service.hpp"

namespace spe {

struct ListenAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// "host:port", ":port" or "port". Port 0 picks a free port.
ListenAddress parse_listen(std::string_view text);

// Maps an error code to its HTTP status (400, 404, 409, 504 or 500).
int http_status_for(std::string_view code);

// JSON-over-HTTP front end for an AnnotationService.
class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds without serving; returns the bound port. Throws IoError on failure.
  int bind(const ListenAddress& address);
  // Serves until stop() is called.
  void serve();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace spe
