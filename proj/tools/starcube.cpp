// starcube: operator CLI over a data directory holding one warehouse.
//
//   init      create the warehouse skeleton from a catalog
//   etl       run a pipeline batch, print the report, keep quarantine files
//   build     build cubes and print their shape
//   query     evaluate MDX and print the cellset
//   serve     HTTP API (and optional static UI)
//   gen-data  write a synthetic source dataset plus its manifest
//
// Exit codes: 0 ok, 2 validation or user error, 3 environment or I/O,
// 4 fatal pipeline step.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "starcube/csv.hpp"
#include "starcube/cube/cube.hpp"
#include "starcube/error.hpp"
#include "starcube/etl/generator.hpp"
#include "starcube/etl/pipeline.hpp"
#include "starcube/etl/warehouse.hpp"
#include "starcube/query/engine.hpp"
#include "starcube/schema/catalog.hpp"
#include "starcube/server/http.hpp"
#include "starcube/server/service.hpp"

namespace fs = std::filesystem;
using namespace starcube;

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 2;
constexpr int kEnvError = 3;
constexpr int kPipelineFatal = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::SourceNotFound:
      return kEnvError;
    default:
      return kUserError;
  }
}

int report_error(const Error& e) {
  std::cerr << "starcube: " << to_string(e.code()) << ": " << e.what();
  if (e.position()) std::cerr << " (line " << e.position()->line << ", column " << e.position()->column << ")";
  std::cerr << "\n";
  return exit_code_for(e.code());
}

// Prints the offending line of `text` with a caret under the error column.
void print_caret(std::string_view text, const SourcePosition& pos) {
  std::istringstream in{std::string(text)};
  std::string line;
  for (int i = 0; i < pos.line && std::getline(in, line); ++i) {
  }
  std::cerr << "  " << line << "\n  " << std::string(static_cast<std::size_t>(std::max(0, pos.column - 1)), ' ')
            << "^\n";
}

std::vector<std::string> catalog_diff(const schema::SchemaCatalog& have,
                                      const schema::SchemaCatalog& want) {
  std::vector<std::string> out;
  auto compare = [&](const char* what, const auto& a, const auto& b) {
    for (const auto& x : a) {
      auto it = std::find_if(b.begin(), b.end(), [&](const auto& y) { return iequals(x.name, y.name); });
      if (it == b.end()) {
        out.push_back(std::string("- ") + what + " " + x.name);
      } else if (!(x == *it)) {
        out.push_back(std::string("~ ") + what + " " + x.name);
      }
    }
    for (const auto& y : b) {
      if (std::none_of(a.begin(), a.end(), [&](const auto& x) { return iequals(x.name, y.name); })) {
        out.push_back(std::string("+ ") + what + " " + y.name);
      }
    }
  };
  compare("dimension", have.dimensions, want.dimensions);
  compare("fact", have.facts, want.facts);
  compare("cube", have.cubes, want.cubes);
  return out;
}

int cmd_init(const fs::path& data_dir, const std::string& catalog_path) {
  auto catalog = catalog_path.empty() ? schema::reference_schema()
                                      : schema::load_catalog_file(catalog_path);
  if (etl::Warehouse::exists(data_dir)) {
    auto existing = etl::Warehouse::load(data_dir);
    auto diff = catalog_diff(existing.catalog(), catalog);
    if (diff.empty()) {
      std::cout << "warehouse at " << data_dir.string() << " already initialized with this catalog\n";
      return kOk;
    }
    std::cerr << "starcube: CatalogMismatch: " << data_dir.string()
              << " holds a different catalog:\n";
    for (const auto& d : diff) std::cerr << "  " << d << "\n";
    return kUserError;
  }
  etl::Warehouse warehouse(catalog);
  warehouse.save(data_dir);
  std::cout << "initialized " << data_dir.string() << ": " << catalog.dimensions.size()
            << " dimensions, " << catalog.facts.size() << " facts, " << catalog.cubes.size()
            << " cubes\n";
  return kOk;
}

int cmd_etl(const fs::path& data_dir, const std::string& pipeline_path,
            const std::string& batch_id, const std::string& batch_date,
            const std::string& source_dir) {
  auto warehouse = etl::Warehouse::load(data_dir);
  auto config = etl::load_pipeline_file(pipeline_path);
  if (!source_dir.empty()) config.base_dir = source_dir;
  if (!batch_id.empty()) {
    config.batch_id = batch_id;
    for (auto& load : config.loads) load.batch_id.reset();
  }
  if (!batch_date.empty()) {
    auto d = Date::parse(batch_date);
    if (!d) throw Error(ErrorCode::InvalidArgument, "batch date must be YYYY-MM-DD, got " + batch_date);
    config.batch_date = *d;
  }
  etl::validate_pipeline(config, warehouse.catalog());

  const auto version_before = warehouse.version();
  etl::PipelineReport report;
  try {
    report = etl::run_pipeline(config, warehouse);
  } catch (const Error& e) {
    if (warehouse.version() != version_before) warehouse.save(data_dir);
    report_error(e);
    return e.code() == ErrorCode::SourceNotFound || e.code() == ErrorCode::IoError ? kEnvError
                                                                                     : kPipelineFatal;
  }
  warehouse.save(data_dir);

  const fs::path qdir = data_dir / "quarantine";
  csv::write_file(qdir / (report.batch_id + ".csv"), etl::quarantine_to_csv(report.quarantine));
  csv::write_file(qdir / (report.batch_id + ".report.json"), etl::report_to_json(report));
  std::cout << etl::report_to_table(report);
  std::cout << "warehouse version " << warehouse.version() << "; "
            << report.quarantine.size() << " rows quarantined -> "
            << (qdir / (report.batch_id + ".csv")).string() << "\n";
  return kOk;
}

int cmd_build(const fs::path& data_dir, const std::string& cube_name) {
  auto warehouse = etl::Warehouse::load(data_dir);
  std::vector<std::string> names;
  if (cube_name.empty()) {
    for (const auto& c : warehouse.catalog().cubes) names.push_back(c.name);
  } else {
    names.push_back(cube_name);
  }
  for (const auto& name : names) {
    auto c = cube::build_cube(warehouse, name);
    std::cout << "cube " << c->name() << " (build " << c->build_stamp() << "): "
              << c->stats().fact_rows << " facts, " << c->stats().base_cells << " base cells, "
              << c->stats().build_millis << " ms\n";
    for (const auto& role : c->roles()) {
      for (const auto& h : role.hierarchies) {
        std::cout << "  [" << role.name << "].[" << h.name() << "]";
        for (int l = 1; l < h.level_count(); ++l) {
          std::cout << " " << h.level_name(l) << "=" << h.level_members(l).size();
        }
        std::cout << "\n";
      }
    }
  }
  return kOk;
}

int cmd_query(const fs::path& data_dir, std::string mdx, const std::string& file,
              const std::string& format_text) {
  auto format = query::parse_format(format_text);
  if (!format) throw Error(ErrorCode::InvalidArgument, "format must be table, csv or json");
  if (!file.empty()) mdx = csv::read_file(file);
  if (mdx.empty()) throw Error(ErrorCode::InvalidArgument, "no query given");
  query::QueryAst ast;
  try {
    ast = query::parse(mdx);
  } catch (const Error& e) {
    int rc = report_error(e);
    if (e.position()) print_caret(mdx, *e.position());
    return rc;
  }
  auto warehouse = etl::Warehouse::load(data_dir);
  auto c = cube::build_cube(warehouse, ast.cube);
  auto bound = query::bind(ast, c);
  std::cout << query::format_cellset(query::evaluate(bound, *c), *format);
  return kOk;
}

int cmd_serve(const fs::path& data_dir, server::HttpOptions options) {
  // SIGINT/SIGTERM go to a watcher thread rather than an async handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto log = [](const std::string& line) { std::cerr << "starcube serve: " << line << std::endl; };
  options.data_dir = data_dir;
  options.log = log;
  server::Service service;
  server::HttpServer http(service, options);
  const int port = http.bind();
  log("listening on " + options.host + ":" + std::to_string(port));

  std::thread loader([&] {
    if (!etl::Warehouse::exists(data_dir)) {
      log("no warehouse at " + data_dir.string() + " yet; waiting for one");
      return;
    }
    try {
      service.reload(data_dir);
      log("published warehouse version " + std::to_string(service.warehouse_version().value_or(0)));
    } catch (const std::exception& e) {
      log(std::string("initial load failed: ") + e.what());
    }
  });
  std::atomic<bool> signalled{false};
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    signalled = true;
    http.stop();
  });
  http.run();
  loader.join();
  // Wake the watcher if the server stopped for another reason.
  if (!signalled) pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  log("stopped");
  return kOk;
}

int cmd_gen_data(const etl::GeneratorOptions& options, const fs::path& out) {
  auto ds = etl::generate_synthetic(options);
  etl::write_dataset(ds, out);
  for (const auto& f : ds.files) {
    std::cout << (out / f.name).string() << " (" << f.content.size() << " bytes)\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"starcube: star-schema warehouse, ETL and OLAP cube engine"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string data_dir = "starcube-data";
  app.add_option("--data-dir", data_dir, "Warehouse directory")
      ->envname("STARCUBE_DATA_DIR")
      ->capture_default_str();

  auto* init = app.add_subcommand("init", "Create the warehouse skeleton from a catalog");
  std::string catalog_path;
  init->add_option("--catalog", catalog_path, "catalog.json (default: built-in cancer schema)");

  auto* etl_cmd = app.add_subcommand("etl", "Run an ETL batch");
  std::string pipeline_path, batch_id, batch_date, source_dir;
  etl_cmd->add_option("--pipeline", pipeline_path, "pipeline.json")->required();
  etl_cmd->add_option("--batch-id", batch_id, "Override the pipeline's batch id");
  etl_cmd->add_option("--batch-date", batch_date, "SCD validity date, YYYY-MM-DD");
  etl_cmd->add_option("--source-dir", source_dir,
                      "Resolve source paths here instead of next to the pipeline file");

  auto* build = app.add_subcommand("build", "Build cubes and print their shape");
  std::string cube_name;
  build->add_option("cube", cube_name, "Cube name (default: every cube)");

  auto* query_cmd = app.add_subcommand("query", "Evaluate an MDX query");
  std::string mdx, mdx_file, format = "table";
  query_cmd->add_option("mdx", mdx, "Query text");
  query_cmd->add_option("--file", mdx_file, "Read the query from a file");
  query_cmd->add_option("--format", format, "table, csv or json")->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  server::HttpOptions http;
  std::string ui_dir;
  int poll_ms = 2000;
  serve->add_option("--port", http.port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--host", http.host, "Bind address")->capture_default_str();
  serve->add_option("--cors-origin", http.cors_origin, "Access-Control-Allow-Origin; empty disables")
      ->capture_default_str();
  serve->add_option("--ui-dir", ui_dir, "Static UI assets served at /");
  serve->add_option("--poll-ms", poll_ms, "Warehouse change poll interval")->capture_default_str();

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic source dataset");
  etl::GeneratorOptions gen_options;
  std::string out_dir = "generated";
  gen->add_option("--seed", gen_options.seed)->capture_default_str();
  gen->add_option("--patients", gen_options.patients)->capture_default_str();
  gen->add_option("--facts", gen_options.facts)->capture_default_str();
  gen->add_option("--typo-rate", gen_options.typo_rate)->capture_default_str();
  gen->add_option("--out", out_dir)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUserError;
  }

  try {
    const fs::path dir = fs::absolute(data_dir);
    if (*init) return cmd_init(dir, catalog_path);
    if (*etl_cmd) return cmd_etl(dir, pipeline_path, batch_id, batch_date, source_dir);
    if (*build) return cmd_build(dir, cube_name);
    if (*query_cmd) return cmd_query(dir, mdx, mdx_file, format);
    if (*serve) {
      if (!ui_dir.empty()) http.ui_dir = ui_dir;
      http.poll_interval = std::chrono::milliseconds(poll_ms);
      return cmd_serve(dir, http);
    }
    if (*gen) return cmd_gen_data(gen_options, out_dir);
  } catch (const Error& e) {
    return report_error(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "starcube: IoError: " << e.what() << "\n";
    return kEnvError;
  } catch (const std::exception& e) {
    std::cerr << "starcube: " << e.what() << "\n";
    return kEnvError;
  }
  return kUserError;
}
