#include "starcube/server/http.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "starcube/error.hpp"
#include "starcube/etl/warehouse.hpp"

namespace starcube::server {

struct HttpServer::Impl {
  Service& service;
  HttpOptions options;
  httplib::Server http;
  int port = -1;

  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopping = false;

  Impl(Service& s, HttpOptions o) : service(s), options(std::move(o)) {}

  void log(const std::string& line) const {
    if (options.log) options.log(line);
  }

  void send(httplib::Response& res, const ApiResponse& r) const {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  }

  void routes() {
    // No SO_REUSEPORT: a second server on a taken port must fail to bind.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    http.Get("/api/cubes", [this](const httplib::Request&, httplib::Response& res) {
      send(res, service.cubes());
    });
    http.Get(R"(/api/cubes/([^/]+)/metadata)",
             [this](const httplib::Request& req, httplib::Response& res) {
               send(res, service.metadata(req.matches[1].str()));
             });
    http.Get(R"(/api/cubes/([^/]+)/members)",
             [this](const httplib::Request& req, httplib::Response& res) {
               std::map<std::string, std::string> params;
               for (const auto& [k, v] : req.params) params[k] = v;
               send(res, service.members(req.matches[1].str(), params));
             });
    http.Post("/api/query", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.query(req.body));
    });
    http.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      send(res, service.health());
    });
    http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    http.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
      if (!options.cors_origin.empty()) {
        res.set_header("Access-Control-Allow-Origin", options.cors_origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Expose-Headers", "X-Total-Count, X-Build-Stamp");
      }
    });
    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty() || req.path.rfind("/api/", 0) != 0) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      ApiResponse r = error_response({res.status, res.status == 404 ? "NotFound" : "InvalidArgument",
                                      "no endpoint " + req.method + " " + req.path, std::nullopt});
      res.set_content(r.body, r.content_type);
      return httplib::Server::HandlerResponse::Handled;
    });
    http.set_exception_handler(
        [this](const httplib::Request& req, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "unknown failure";
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          log("error serving " + req.path + ": " + what);
          send(res, error_response({500, "InternalError", what, std::nullopt}));
        });
    if (!options.ui_dir.empty()) {
      if (!http.set_mount_point("/", options.ui_dir.string())) {
        throw Error(ErrorCode::IoError, "UI directory not found: " + options.ui_dir.string());
      }
    }
  }

  void poll() {
    std::unique_lock lock(stop_mutex);
    while (!stopping) {
      stop_cv.wait_for(lock, options.poll_interval, [this] { return stopping; });
      if (stopping) break;
      lock.unlock();
      try {
        if (etl::Warehouse::exists(options.data_dir) && service.reload(options.data_dir)) {
          log("published warehouse version " +
              std::to_string(service.warehouse_version().value_or(0)));
        }
      } catch (const std::exception& e) {
        log(std::string("reload failed, keeping current cubes: ") + e.what());
      }
      lock.lock();
    }
  }
};

HttpServer::HttpServer(Service& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(o.host);
  } else {
    impl_->port = impl_->http.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) {
    throw Error(ErrorCode::IoError, "cannot listen on " + o.host + ":" + std::to_string(o.port));
  }
  return impl_->port;
}

void HttpServer::run() {
  {
    std::lock_guard lock(impl_->stop_mutex);
    if (impl_->stopping) return;
  }
  std::thread poller;
  if (!impl_->options.data_dir.empty()) poller = std::thread([this] { impl_->poll(); });
  impl_->http.listen_after_bind();
  {
    std::lock_guard lock(impl_->stop_mutex);
    impl_->stopping = true;
  }
  impl_->stop_cv.notify_all();
  if (poller.joinable()) poller.join();
}

void HttpServer::stop() {
  {
    std::lock_guard lock(impl_->stop_mutex);
    impl_->stopping = true;
  }
  impl_->stop_cv.notify_all();
  impl_->http.stop();
}

int HttpServer::port() const { return impl_->port; }

}  // namespace starcube::server
