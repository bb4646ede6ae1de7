#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "starcube/etl/warehouse.hpp"

namespace starcube::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& prefix) {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto p = fs::temp_directory_path() / (prefix + "-" + std::to_string(rd()));
    if (fs::create_directories(p)) {
      path_ = p;
      return;
    }
  }
  throw std::runtime_error("cannot create a temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

schema::SchemaCatalog extended_catalog() {
  auto c = schema::reference_schema();
  auto& fact = c.facts.at(0);
  fact.measures.push_back({"CostMin", "Cost", schema::Aggregator::Min, ValueKind::Decimal});
  fact.measures.push_back({"CostMax", "Cost", schema::Aggregator::Max, ValueKind::Decimal});
  fact.measures.push_back({"CostAvg", "Cost", schema::Aggregator::Avg, ValueKind::Decimal});
  fact.measures.push_back({"QuantityAvg", "Quantity", schema::Aggregator::Avg, ValueKind::Integer});
  fact.measures.push_back({"FactCount", "Quantity", schema::Aggregator::Count, ValueKind::Integer});
  auto& cube = c.cubes.at(0);
  for (const char* m : {"CostMin", "CostMax", "CostAvg", "QuantityAvg", "FactCount"}) {
    cube.included_measures.push_back(m);
  }
  return c;
}

BuiltWarehouse build_reference_warehouse(const fs::path& root, const etl::GeneratorOptions& options,
                                         const schema::SchemaCatalog& catalog) {
  BuiltWarehouse out;
  out.source_dir = root / "src";
  out.warehouse_dir = root / "wh";
  auto ds = etl::generate_synthetic(options);
  etl::write_dataset(ds, out.source_dir);
  out.manifest = nlohmann::json::parse(ds.manifest());
  auto config = etl::reference_pipeline();
  config.base_dir = out.source_dir;
  config.batch_date = kBatchDate;
  etl::Warehouse wh(catalog);
  out.report = etl::run_pipeline(config, wh);
  wh.save(out.warehouse_dir);
  return out;
}

std::vector<std::string> key_path(const cube::Hierarchy& h, cube::MemberId id) {
  std::vector<std::string> path;
  for (auto cur = id; cur > 0; cur = h.member(cur).parent) {
    const auto& m = h.member(cur);
    path.push_back(m.unknown ? kUnknownSegment : m.key.to_string());
  }
  return {path.rbegin(), path.rend()};
}

bool matches(const cube::CellValue& engine, const OracleValue* oracle, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg + " (engine " + (engine.empty() ? "Empty" : engine.to_string()) + ")";
    return false;
  };
  const auto& s = engine.storage();
  if (!oracle) return engine.empty() ? true : fail("oracle has no rows");
  switch (oracle->kind) {
    case OracleValue::Kind::Integer: {
      auto v = std::get_if<std::int64_t>(&s);
      if (!v) return fail("expected an integer");
      return *v == oracle->exact ? true : fail("oracle " + std::to_string(oracle->exact));
    }
    case OracleValue::Kind::Fixed4: {
      auto v = std::get_if<Decimal>(&s);
      if (!v) return fail("expected a decimal");
      return v->raw() == oracle->exact ? true
                                       : fail("oracle raw " + std::to_string(oracle->exact));
    }
    case OracleValue::Kind::Real: {
      auto v = std::get_if<double>(&s);
      if (!v) return fail("expected a real");
      const long double diff = std::fabs(static_cast<long double>(*v) - oracle->real);
      const long double scale = std::max<long double>(std::fabs(oracle->real), 1e-300L);
      if (diff / scale <= 1e-9L) return true;
      std::ostringstream os;
      os.precision(17);
      os << "oracle " << static_cast<double>(oracle->real);
      return fail(os.str());
    }
  }
  return fail("unreachable");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace starcube::testing
