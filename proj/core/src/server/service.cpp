#include "starcube/server/service.hpp"

#include <charconv>

#include "json.hpp"
#include "starcube/csv.hpp"
#include "starcube/query/engine.hpp"
#include "starcube/query/mdx.hpp"
#include "starcube/value.hpp"

namespace starcube::server {

using nlohmann::ordered_json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownCube:
    case ErrorCode::UnknownRole:
    case ErrorCode::UnknownHierarchy:
    case ErrorCode::UnknownLevel:
    case ErrorCode::UnknownMember:
      return 404;
    case ErrorCode::StaleCube:
      return 409;
    case ErrorCode::OrphanFactRow:
    case ErrorCode::IoError:
    case ErrorCode::NotInitialized:
    case ErrorCode::CatalogMismatch:
    case ErrorCode::SourceNotFound:
      return 500;
    default:
      return 400;
  }
}

ApiError to_api_error(const Error& error) {
  return {http_status(error.code()), std::string(to_string(error.code())), error.what(),
          error.position()};
}

ApiResponse error_response(const ApiError& error) {
  ordered_json j;
  j["status"] = error.status;
  j["code"] = error.code;
  j["message"] = error.message;
  if (error.position) {
    j["position"] = {{"line", error.position->line}, {"column", error.position->column}};
  }
  ApiResponse r;
  r.status = error.status;
  r.body = j.dump() + "\n";
  return r;
}

namespace {

ApiResponse json_response(const ordered_json& j, int status = 200) {
  ApiResponse r;
  r.status = status;
  r.body = j.dump() + "\n";
  return r;
}

ApiResponse bad_request(std::string message) {
  return error_response({400, "InvalidArgument", std::move(message), std::nullopt});
}

std::optional<std::size_t> parse_size(const std::map<std::string, std::string>& params,
                                      const std::string& name, std::size_t fallback,
                                      std::string& problem) {
  auto it = params.find(name);
  if (it == params.end() || it->second.empty()) return fallback;
  std::size_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    problem = name + " must be a non-negative integer, got \"" + s + "\"";
    return std::nullopt;
  }
  return v;
}

ordered_json member_json(const cube::Hierarchy& h, const cube::Member& m) {
  ordered_json j;
  j["caption"] = m.caption;
  j["unique_name"] = h.unique_name(m.id);
  j["level"] = h.level_name(m.level);
  j["depth"] = m.level;
  j["child_count"] = m.child_count;
  return j;
}

}  // namespace

Service::Service(ServiceOptions options) : options_(options) {}

std::shared_ptr<const Service::Snapshot> Service::snapshot() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

void Service::publish(std::shared_ptr<const etl::Warehouse> warehouse) {
  auto next = std::make_shared<Snapshot>();
  for (const auto& def : warehouse->catalog().cubes) {
    next->cubes.push_back(cube::build_cube(*warehouse, def.name));
  }
  next->warehouse = std::move(warehouse);
  std::lock_guard lock(mutex_);
  snapshot_ = std::move(next);
}

bool Service::reload(const std::filesystem::path& dir) {
  auto current = snapshot();
  if (current) {
    // Cheap check first: only warehouse.json, not the tables.
    try {
      auto j = ordered_json::parse(csv::read_file(dir / "warehouse.json"));
      if (j.value("version", std::int64_t{-1}) == current->warehouse->version()) return false;
    } catch (const ordered_json::exception&) {
    }
  }
  auto loaded = std::make_shared<const etl::Warehouse>(etl::Warehouse::load(dir));
  if (current && current->warehouse->version() == loaded->version()) return false;
  publish(std::move(loaded));
  return true;
}

bool Service::ready() const { return snapshot() != nullptr; }

std::optional<std::int64_t> Service::warehouse_version() const {
  auto s = snapshot();
  if (!s) return std::nullopt;
  return s->warehouse->version();
}

std::shared_ptr<const cube::Cube> Service::find(const Snapshot& s, std::string_view name) {
  for (const auto& c : s.cubes) {
    if (iequals(c->name(), name)) return c;
  }
  return nullptr;
}

std::shared_ptr<const cube::Cube> Service::cube(std::string_view name) const {
  auto s = snapshot();
  return s ? find(*s, name) : nullptr;
}

ApiResponse Service::cubes() const {
  ordered_json out = ordered_json::array();
  auto s = snapshot();
  if (!s) return json_response(out);
  for (const auto& c : s->cubes) {
    ordered_json j;
    j["name"] = c->name();
    j["measures"] = ordered_json::array();
    for (const auto& m : c->measures()) j["measures"].push_back(m.name);
    j["roles"] = ordered_json::array();
    for (const auto& r : c->roles()) j["roles"].push_back(r.name);
    j["build_stamp"] = c->build_stamp();
    out.push_back(std::move(j));
  }
  return json_response(out);
}

ApiResponse Service::metadata(std::string_view cube_name) const {
  auto s = snapshot();
  auto c = s ? find(*s, cube_name) : nullptr;
  if (!c) {
    return error_response(
        to_api_error(Error(ErrorCode::UnknownCube, "unknown cube " + query::quote_ident(cube_name))));
  }
  ordered_json j;
  j["name"] = c->name();
  j["fact"] = c->def().fact;
  j["build_stamp"] = c->build_stamp();
  j["warehouse_version"] = s->warehouse->version();
  j["measures"] = ordered_json::array();
  for (const auto& m : c->measures()) {
    j["measures"].push_back({{"name", m.name},
                             {"unique_name", "[Measures]." + query::quote_ident(m.name)},
                             {"aggregator", schema::to_string(m.aggregator)},
                             {"kind", to_string(m.kind)}});
  }
  j["roles"] = ordered_json::array();
  for (const auto& r : c->roles()) {
    ordered_json role;
    role["name"] = r.name;
    role["dimension"] = r.dimension;
    role["hierarchies"] = ordered_json::array();
    for (const auto& h : r.hierarchies) {
      ordered_json hj;
      hj["name"] = h.name();
      hj["unique_name"] = query::quote_ident(r.name) + "." + query::quote_ident(h.name());
      hj["levels"] = ordered_json::array();
      for (int l = 0; l < h.level_count(); ++l) {
        hj["levels"].push_back({{"name", h.level_name(l)},
                                {"depth", l},
                                {"member_count", h.level_members(l).size()}});
      }
      role["hierarchies"].push_back(std::move(hj));
    }
    j["roles"].push_back(std::move(role));
  }
  j["stats"] = {{"fact_rows", c->stats().fact_rows},
                {"base_cells", c->stats().base_cells},
                {"build_millis", c->stats().build_millis}};
  return json_response(j);
}

ApiResponse Service::members(std::string_view cube_name,
                             const std::map<std::string, std::string>& params) const {
  auto s = snapshot();
  auto c = s ? find(*s, cube_name) : nullptr;
  if (!c) {
    return error_response(
        to_api_error(Error(ErrorCode::UnknownCube, "unknown cube " + query::quote_ident(cube_name))));
  }
  std::string problem;
  auto offset = parse_size(params, "offset", 0, problem);
  auto limit = parse_size(params, "limit", 500, problem);
  if (!offset || !limit) return bad_request(problem);

  auto get = [&](const char* k) {
    auto it = params.find(k);
    return it == params.end() ? std::string() : it->second;
  };
  std::string parent = get("parent");
  if (parent.empty()) {
    const std::string role = get("role");
    if (role.empty()) return bad_request("members needs a role or a parent");
    parent = query::quote_ident(role);
    if (const std::string h = get("hierarchy"); !h.empty()) parent += "." + query::quote_ident(h);
  }

  try {
    auto ast = query::parse("SELECT " + parent + ".Children ON COLUMNS FROM " +
                            query::quote_ident(c->name()));
    auto bound = query::bind(ast, c);
    const auto& tuples = bound.axes.at(0).tuples;
    ordered_json list = ordered_json::array();
    for (std::size_t i = *offset; i < tuples.size() && i - *offset < *limit; ++i) {
      const auto& m = tuples[i].at(0);
      if (m.is_measure()) {
        const auto& name = c->measures()[static_cast<std::size_t>(m.member)].name;
        list.push_back({{"caption", name},
                        {"unique_name", "[Measures]." + query::quote_ident(name)},
                        {"level", "Measures"},
                        {"depth", 1},
                        {"child_count", 0}});
      } else {
        const auto& h = c->hierarchy(m.role, m.hierarchy);
        list.push_back(member_json(h, h.member(m.member)));
      }
    }
    ordered_json j;
    j["total"] = tuples.size();
    j["offset"] = *offset;
    j["limit"] = *limit;
    j["members"] = std::move(list);
    auto r = json_response(j);
    r.headers.emplace_back("X-Total-Count", std::to_string(tuples.size()));
    return r;
  } catch (const Error& e) {
    return error_response(to_api_error(e));
  }
}

ApiResponse Service::query(std::string_view body) const {
  ordered_json req;
  try {
    req = ordered_json::parse(body);
  } catch (const ordered_json::parse_error& e) {
    return bad_request(std::string("request body is not JSON: ") + e.what());
  }
  if (!req.is_object() || !req.contains("mdx") || !req["mdx"].is_string()) {
    return bad_request("request body needs an \"mdx\" string");
  }
  auto format = query::Format::Json;
  if (req.contains("format")) {
    auto f = req["format"].is_string() ? query::parse_format(req["format"].get<std::string>())
                                       : std::nullopt;
    if (!f) return bad_request("format must be json, csv or table");
    format = *f;
  }
  query::EvaluateOptions options;
  options.max_cells = options_.max_cells;
  if (req.contains("build_stamp")) {
    if (!req["build_stamp"].is_number_integer()) return bad_request("build_stamp must be an integer");
    options.expected_build_stamp = req["build_stamp"].get<std::int64_t>();
  }

  auto s = snapshot();
  try {
    auto ast = query::parse(req["mdx"].get<std::string>());
    if (req.contains("cube")) {
      if (!req["cube"].is_string()) return bad_request("cube must be a string");
      if (!iequals(req["cube"].get<std::string>(), ast.cube)) {
        return bad_request("body names cube \"" + req["cube"].get<std::string>() +
                           "\" but the query reads FROM " + query::quote_ident(ast.cube));
      }
    }
    auto c = s ? find(*s, ast.cube) : nullptr;
    if (!c) throw Error(ErrorCode::UnknownCube, "unknown cube " + query::quote_ident(ast.cube));
    auto bound = query::bind(ast, c);
    auto cs = query::evaluate(bound, *c, options);
    ApiResponse r;
    r.body = query::format_cellset(cs, format);
    if (format == query::Format::Csv) r.content_type = "text/csv; charset=utf-8";
    if (format == query::Format::Table) r.content_type = "text/plain; charset=utf-8";
    r.headers.emplace_back("X-Build-Stamp", std::to_string(c->build_stamp()));
    return r;
  } catch (const Error& e) {
    return error_response(to_api_error(e));
  }
}

ApiResponse Service::health() const {
  auto s = snapshot();
  ordered_json j;
  if (!s) {
    j["status"] = "loading";
    j["warehouse_version"] = nullptr;
    j["cube_build_stamp"] = nullptr;
    return json_response(j, 503);
  }
  j["status"] = "ok";
  j["warehouse_version"] = s->warehouse->version();
  if (s->cubes.empty()) {
    j["cube_build_stamp"] = nullptr;
  } else {
    j["cube_build_stamp"] = s->cubes.front()->build_stamp();
  }
  j["cubes"] = ordered_json::object();
  for (const auto& c : s->cubes) j["cubes"][c->name()] = c->build_stamp();
  return json_response(j);
}

}  // namespace starcube::server
