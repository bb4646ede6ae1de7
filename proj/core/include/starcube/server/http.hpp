#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "starcube/server/service.hpp"

namespace starcube::server {

struct HttpOptions {
  std::string host = "0.0.0.0";
  int port = 8750;  // 0 picks a free port
  std::string cors_origin = "*";  // empty disables CORS headers
  std::filesystem::path ui_dir;   // served at / when set
  // When set, warehouse.json there is polled and a newer version is
  // rebuilt and swapped in.
  std::filesystem::path data_dir;
  std::chrono::milliseconds poll_interval{2000};
  std::function<void(const std::string&)> log;
};

class HttpServer {
 public:
  HttpServer(Service& service, HttpOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Throws Error(IoError) when the address cannot be bound. Returns the port.
  int bind();
  // Serves until stop(). bind() must have succeeded.
  void run();
  // Safe from any thread, including signal-watcher threads.
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace starcube::server
