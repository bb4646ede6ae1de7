#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "starcube/cube/cube.hpp"
#include "starcube/error.hpp"
#include "starcube/etl/warehouse.hpp"

namespace starcube::server {

struct ApiError {
  int status = 500;
  std::string code;
  std::string message;
  std::optional<SourcePosition> position;
};

// 400 client faults, 404 unknown names, 409 StaleCube, 500 consistency and
// I/O failures. One status per code, whatever the endpoint.
int http_status(ErrorCode code);
ApiError to_api_error(const Error& error);

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

ApiResponse error_response(const ApiError& error);

struct ServiceOptions {
  std::size_t max_cells = 100000;
};

// The /api surface without a transport: every handler is a pure function of
// the published snapshot and its arguments. Handlers never modify the
// warehouse.
class Service {
 public:
  explicit Service(ServiceOptions options = {});

  // Builds every catalog cube from `warehouse` and swaps the result in.
  // Requests already running keep the snapshot they started with. Throws on
  // build failure and leaves the previous snapshot published.
  void publish(std::shared_ptr<const etl::Warehouse> warehouse);

  // Loads `dir` and publishes it when its version differs from the
  // published one. Returns true when a new snapshot went live.
  bool reload(const std::filesystem::path& dir);

  bool ready() const;
  std::optional<std::int64_t> warehouse_version() const;
  std::shared_ptr<const cube::Cube> cube(std::string_view name) const;

  ApiResponse cubes() const;
  ApiResponse metadata(std::string_view cube_name) const;
  // params: role, hierarchy, parent (a member unique name), offset, limit.
  ApiResponse members(std::string_view cube_name,
                      const std::map<std::string, std::string>& params) const;
  // body: {"cube"?, "mdx", "format"?: "json"|"csv"|"table", "build_stamp"?}
  ApiResponse query(std::string_view body) const;
  ApiResponse health() const;

 private:
  struct Snapshot {
    std::shared_ptr<const etl::Warehouse> warehouse;
    std::vector<std::shared_ptr<const cube::Cube>> cubes;  // catalog order
  };

  std::shared_ptr<const Snapshot> snapshot() const;
  static std::shared_ptr<const cube::Cube> find(const Snapshot& s, std::string_view name);

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace starcube::server
