#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "starcube/etl/warehouse.hpp"
#include "starcube/schema/catalog.hpp"
#include "starcube/value.hpp"

namespace starcube::etl {

struct SourceDef {
  std::string name;
  std::filesystem::path path;  // relative paths resolve against the config's base_dir
  char delimiter = ',';
  std::string encoding = "UTF-8";
  bool has_header = true;
};

enum class OnError { Quarantine, Abort };
enum class LateArriving { Quarantine, UnknownMember };
enum class DeriveRule { AgeBand, DateParts };

struct RenameColumns {
  std::vector<std::pair<std::string, std::string>> map;  // source -> target
};

struct ConvertTypes {
  std::vector<std::pair<std::string, ValueKind>> types;
  OnError on_error = OnError::Quarantine;
};

struct FuzzyLookup {
  std::string column;
  std::string reference_dimension;
  std::string reference_attribute;
  double threshold = 0.8;
  // A miss keeps the value unless quarantine_misses is set.
  bool quarantine_misses = false;
};

struct DeriveColumn {
  std::string target;
  DeriveRule rule = DeriveRule::AgeBand;
  std::string source;  // age column for AgeBand, date column for DateParts
};

struct SortDedupe {
  std::vector<std::string> keys;
};

using TransformStep =
    std::variant<RenameColumns, ConvertTypes, FuzzyLookup, DeriveColumn, SortDedupe>;

std::string step_name(const TransformStep& step);

struct LoadDef {
  std::string target;  // dimension or fact name in the catalog
  std::string source;
  std::vector<TransformStep> transforms;
  std::optional<std::string> batch_id;  // defaults to the pipeline batch
  LateArriving late_arriving = LateArriving::Quarantine;
};

struct PipelineConfig {
  std::vector<SourceDef> sources;
  std::vector<LoadDef> loads;
  std::string batch_id = "batch-1";
  std::optional<Date> batch_date;  // SCD validity date; today when absent
  bool calendar_full_years = true;
  std::filesystem::path base_dir;
};

PipelineConfig parse_pipeline(std::string_view document,
                              const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_file(const std::filesystem::path& path);
std::string serialize_pipeline(const PipelineConfig& config);

// Static checks that need no I/O: targets and sources exist, fuzzy lookups
// reference real attributes. Throws ConfigError.
void validate_pipeline(const PipelineConfig& config, const schema::SchemaCatalog& catalog);

// ------------------------------------------------------------------ rows

struct Provenance {
  std::string source;
  int line = 0;
};

struct Row {
  std::vector<Value> values;  // aligned with RowSet::columns
  Provenance provenance;
  std::string raw;  // the source record as read
};

struct RowSet {
  std::vector<std::string> columns;
  std::vector<Row> rows;

  std::optional<std::size_t> column_index(std::string_view name) const;
};

struct QuarantineRecord {
  Provenance provenance;
  std::string raw_row;
  std::string step;
  std::string reason;
};

struct ExtractResult {
  RowSet rows;
  std::vector<QuarantineRecord> quarantine;
  std::size_t records = 0;  // data records read, quarantined ones included
};

// Reads a delimited UTF-8 source. Ragged rows are quarantined; a missing file
// throws SourceNotFound and invalid UTF-8 throws EncodingError.
ExtractResult extract(const SourceDef& source, const std::filesystem::path& base_dir = {});

struct TransformResult {
  RowSet rows;
  std::vector<QuarantineRecord> quarantine;
  std::size_t deduped = 0;
};

// Applies `steps` in order; a row rejected at step k is never seen by k+1.
// Fuzzy lookups draw references from the attribute's declared domain and the
// current rows of the reference dimension in `warehouse`.
TransformResult apply_transforms(RowSet rows, const std::vector<TransformStep>& steps,
                                 const schema::SchemaCatalog& catalog,
                                 const Warehouse& warehouse);

std::string age_band(std::int64_t age);

// ------------------------------------------------------------------ loads

struct DimensionLoadReport {
  std::size_t inserted = 0;
  std::size_t updated_type1 = 0;
  std::size_t versioned_type2 = 0;
  std::size_t unchanged = 0;
  std::size_t deduped = 0;
  std::size_t quarantined = 0;
};

// Sort by natural key, drop exact duplicates, then apply SCD1/SCD2 per key.
// The returned table is the staged replacement; commit it to publish.
DimensionTable load_dimension(const RowSet& rows, const DimensionTable& current,
                              Date batch_date, DimensionLoadReport& report,
                              std::vector<QuarantineRecord>& quarantine);

struct FactLoadReport {
  std::size_t inserted = 0;
  std::size_t quarantined = 0;
  std::size_t replaced = 0;  // rows of the same batch removed first
};

// Resolves natural keys to current surrogate keys and replaces the batch.
// Duplicate rows are kept. Missing measure columns throw UnknownMeasureColumn.
FactTable load_fact(const RowSet& rows, const FactTable& current, const Warehouse& warehouse,
                    const std::string& batch_id, LateArriving late_arriving,
                    FactLoadReport& report, std::vector<QuarantineRecord>& quarantine);

// Adds calendar rows for every date in [first, last] not yet present.
// Surrogate keys are yyyymmdd. Returns the number of rows added.
std::size_t populate_calendar(DimensionTable& table, Date first, Date last, Date batch_date);

// ------------------------------------------------------------------ pipeline

struct TableReport {
  std::string table;
  std::string kind;  // dimension | fact | calendar
  std::string source;
  std::size_t extracted = 0;
  std::size_t inserted = 0;
  std::size_t updated_type1 = 0;
  std::size_t versioned_type2 = 0;
  std::size_t unchanged = 0;
  std::size_t deduped = 0;
  std::size_t quarantined = 0;
  std::size_t replaced = 0;
};

struct PipelineReport {
  std::string batch_id;
  Date batch_date;
  std::vector<TableReport> tables;
  std::vector<QuarantineRecord> quarantine;
  std::int64_t warehouse_version = 0;

  const TableReport* find(std::string_view table) const;
};

// Loads dimensions first, then calendar rows, then facts. Each table commits
// on its own; a fatal error leaves earlier tables committed and rethrows.
PipelineReport run_pipeline(const PipelineConfig& config, Warehouse& warehouse);

std::string report_to_json(const PipelineReport& report);
std::string report_to_table(const PipelineReport& report);
std::string quarantine_to_csv(const std::vector<QuarantineRecord>& records);

}  // namespace starcube::etl
