#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "starcube/schema/catalog.hpp"
#include "starcube/value.hpp"

namespace starcube::etl {

// Surrogate key 0 is the Unknown member; real rows start at 1.
inline constexpr std::int64_t kUnknownKey = 0;

struct DimensionRowStored {
  std::int64_t surrogate_key = 0;
  std::vector<Value> attributes;  // in DimensionDef::attributes order
  Date valid_from;
  std::optional<Date> valid_to;  // nullopt = open
  bool is_current = true;
  int version = 1;

  friend bool operator==(const DimensionRowStored&, const DimensionRowStored&) = default;
};

class DimensionTable {
 public:
  DimensionTable() = default;
  explicit DimensionTable(schema::DimensionDef def);

  const schema::DimensionDef& def() const { return def_; }
  const std::vector<DimensionRowStored>& rows() const { return rows_; }
  std::size_t natural_key_index() const { return nk_index_; }

  const DimensionRowStored* find_by_key(std::int64_t surrogate) const;
  const DimensionRowStored* current(const Value& natural_key) const;
  // Every version of a natural key, oldest first.
  std::vector<std::size_t> versions(const Value& natural_key) const;

  std::int64_t next_key() const { return next_key_; }

  // Mutators used by the loaders. `append` assigns the next surrogate key
  // unless `surrogate` is given (calendar rows use yyyymmdd).
  DimensionRowStored& append(DimensionRowStored row,
                             std::optional<std::int64_t> surrogate = std::nullopt);
  DimensionRowStored& row_at(std::size_t i) { return rows_[i]; }
  void reindex();

  std::string to_csv() const;
  static DimensionTable from_csv(schema::DimensionDef def, std::string_view csv,
                                 std::int64_t next_key);

 private:
  static std::string nk_text(const Value& v) { return v.to_string(); }

  schema::DimensionDef def_;
  std::size_t nk_index_ = 0;
  std::vector<DimensionRowStored> rows_;
  std::int64_t next_key_ = 1;
  std::unordered_map<std::int64_t, std::size_t> by_key_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_nk_;
};

// Columnar fact storage: one surrogate column per role, one column per
// measure (integers as-is, decimals as raw fixed-point), a batch id per row.
class FactTable {
 public:
  FactTable() = default;
  explicit FactTable(schema::FactDef def);

  const schema::FactDef& def() const { return def_; }
  std::size_t size() const { return batch_.size(); }

  std::int64_t fk(std::size_t role, std::size_t row) const { return fks_[role][row]; }
  std::int64_t measure_raw(std::size_t measure, std::size_t row) const {
    return measures_[measure][row];
  }
  const std::vector<std::int64_t>& fk_column(std::size_t role) const { return fks_[role]; }
  const std::vector<std::int64_t>& measure_column(std::size_t m) const {
    return measures_[m];
  }
  const std::string& batch_of(std::size_t row) const { return batch_names_[batch_[row]]; }
  Value measure_value(std::size_t measure, std::size_t row) const;

  struct PendingRows {
    std::vector<std::vector<std::int64_t>> fks;
    std::vector<std::vector<std::int64_t>> measures;
    std::size_t size() const { return fks.empty() ? 0 : fks[0].size(); }
  };
  PendingRows make_pending() const;

  // Replaces every row tagged `batch_id` with `rows`, keeping the batch at
  // the position it previously occupied. Returns the number of rows removed.
  std::size_t replace_batch(const std::string& batch_id, const PendingRows& rows);
  std::size_t count_batch(const std::string& batch_id) const;

  std::string to_csv() const;
  static FactTable from_csv(schema::FactDef def, std::string_view csv);

 private:
  std::uint32_t batch_index(const std::string& batch_id);

  schema::FactDef def_;
  std::vector<std::vector<std::int64_t>> fks_;
  std::vector<std::vector<std::int64_t>> measures_;
  std::vector<std::uint32_t> batch_;
  std::vector<std::string> batch_names_;
};

struct TableInfo {
  std::string name;
  std::string kind;  // "dimension" | "fact"
  std::size_t rows = 0;
  std::string hash;
};

// The committed star schema: catalog snapshot plus one table per dimension
// and fact. On disk: warehouse.json + tables/<name>.csv.
class Warehouse {
 public:
  Warehouse() = default;
  explicit Warehouse(schema::SchemaCatalog catalog);

  const schema::SchemaCatalog& catalog() const { return catalog_; }
  std::int64_t version() const { return version_; }
  void bump_version() { ++version_; }

  const DimensionTable& dimension(std::string_view name) const;
  const FactTable& fact(std::string_view name) const;
  bool has_dimension(std::string_view name) const;
  bool has_fact(std::string_view name) const;

  // Per-table commit: the whole table is swapped in.
  void commit(DimensionTable table);
  void commit(FactTable table);

  std::vector<TableInfo> table_infos() const;
  // name -> sha256 of the table's CSV image
  std::map<std::string, std::string> content_hashes() const;

  void save(const std::filesystem::path& dir) const;
  static Warehouse load(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

 private:
  schema::SchemaCatalog catalog_;
  std::int64_t version_ = 0;
  std::map<std::string, DimensionTable> dims_;  // keyed by casefolded name
  std::map<std::string, FactTable> facts_;
};

}  // namespace starcube::etl
