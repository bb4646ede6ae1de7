#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracle.hpp"
#include "starcube/cube/cube.hpp"
#include "starcube/etl/generator.hpp"
#include "starcube/etl/pipeline.hpp"
#include "starcube/schema/catalog.hpp"

namespace starcube::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "starcube-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// reference_schema() plus CostMin, CostMax, CostAvg and FactCount so every
// aggregator is exercised.
schema::SchemaCatalog extended_catalog();

struct BuiltWarehouse {
  std::filesystem::path source_dir;     // generated CSVs + manifest.json
  std::filesystem::path warehouse_dir;  // saved warehouse
  nlohmann::json manifest;
  etl::PipelineReport report;
};

inline const Date kBatchDate = *Date::parse("2013-01-15");

// generate -> write -> reference pipeline -> save, under `root`.
BuiltWarehouse build_reference_warehouse(const std::filesystem::path& root,
                                         const etl::GeneratorOptions& options = {},
                                         const schema::SchemaCatalog& catalog = extended_catalog());

// Engine-side member path in the oracle's vocabulary.
std::vector<std::string> key_path(const cube::Hierarchy& h, cube::MemberId id);

// Exact for integer and fixed-point values, relative 1e-9 for real ones. An
// absent oracle value must be an Empty cell.
bool matches(const cube::CellValue& engine, const OracleValue* oracle, std::string* why = nullptr);

std::string read_text(const std::filesystem::path& path);

}  // namespace starcube::testing
