#include "starcube/etl/warehouse.hpp"

#include <algorithm>
#include <charconv>

#include "json.hpp"
#include "starcube/csv.hpp"
#include "starcube/error.hpp"
#include "starcube/hash.hpp"

namespace starcube::etl {

using nlohmann::json;

namespace {

std::int64_t parse_i64(std::string_view text, const std::string& ctx) {
  std::int64_t v = 0;
  auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::IoError, "corrupt warehouse table " + ctx + ": bad integer '" +
                                        std::string(text) + "'");
  }
  return v;
}

Date parse_date_or_throw(std::string_view text, const std::string& ctx) {
  auto d = Date::parse(text);
  if (!d) throw Error(ErrorCode::IoError, "corrupt warehouse table " + ctx + ": bad date");
  return *d;
}

}  // namespace

// ------------------------------------------------------------ DimensionTable

DimensionTable::DimensionTable(schema::DimensionDef def) : def_(std::move(def)) {
  nk_index_ = def_.attribute_index(def_.natural_key).value_or(0);
}

const DimensionRowStored* DimensionTable::find_by_key(std::int64_t surrogate) const {
  auto it = by_key_.find(surrogate);
  return it == by_key_.end() ? nullptr : &rows_[it->second];
}

const DimensionRowStored* DimensionTable::current(const Value& natural_key) const {
  auto it = by_nk_.find(nk_text(natural_key));
  if (it == by_nk_.end()) return nullptr;
  for (auto idx : it->second) {
    if (rows_[idx].is_current) return &rows_[idx];
  }
  return nullptr;
}

std::vector<std::size_t> DimensionTable::versions(const Value& natural_key) const {
  auto it = by_nk_.find(nk_text(natural_key));
  if (it == by_nk_.end()) return {};
  auto out = it->second;
  std::sort(out.begin(), out.end(),
            [&](std::size_t a, std::size_t b) { return rows_[a].version < rows_[b].version; });
  return out;
}

DimensionRowStored& DimensionTable::append(DimensionRowStored row,
                                           std::optional<std::int64_t> surrogate) {
  row.surrogate_key = surrogate ? *surrogate : next_key_;
  next_key_ = std::max(next_key_, row.surrogate_key + 1);
  by_key_[row.surrogate_key] = rows_.size();
  by_nk_[nk_text(row.attributes[nk_index_])].push_back(rows_.size());
  rows_.push_back(std::move(row));
  return rows_.back();
}

void DimensionTable::reindex() {
  by_key_.clear();
  by_nk_.clear();
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    by_key_[rows_[i].surrogate_key] = i;
    by_nk_[nk_text(rows_[i].attributes[nk_index_])].push_back(i);
  }
}

std::string DimensionTable::to_csv() const {
  std::vector<std::string> header{"surrogate_key"};
  for (const auto& a : def_.attributes) header.push_back(a.name);
  for (const char* c : {"valid_from", "valid_to", "is_current", "version"}) header.push_back(c);
  std::string out = csv::join(header) + "\n";
  std::vector<std::string> fields;
  for (const auto& row : rows_) {
    fields.clear();
    fields.push_back(std::to_string(row.surrogate_key));
    for (const auto& v : row.attributes) fields.push_back(v.to_string());
    fields.push_back(row.valid_from.to_string());
    fields.push_back(row.valid_to ? row.valid_to->to_string() : "");
    fields.push_back(row.is_current ? "true" : "false");
    fields.push_back(std::to_string(row.version));
    out += csv::join(fields);
    out += '\n';
  }
  return out;
}

DimensionTable DimensionTable::from_csv(schema::DimensionDef def, std::string_view text,
                                        std::int64_t next_key) {
  DimensionTable table(std::move(def));
  const std::string& name = table.def_.name;
  const std::size_t n_attr = table.def_.attributes.size();
  csv::Reader reader(text);
  csv::Record rec;
  bool header = true;
  while (reader.next(rec)) {
    if (header) {
      header = false;
      if (rec.fields.size() != n_attr + 5) {
        throw Error(ErrorCode::CatalogMismatch,
                    "table " + name + " does not match its catalog definition");
      }
      continue;
    }
    if (rec.fields.size() != n_attr + 5) {
      throw Error(ErrorCode::IoError, "corrupt warehouse table " + name);
    }
    DimensionRowStored row;
    row.surrogate_key = parse_i64(rec.fields[0], name);
    for (std::size_t i = 0; i < n_attr; ++i) {
      auto v = Value::parse(table.def_.attributes[i].kind, rec.fields[i + 1]);
      if (!v) throw Error(ErrorCode::IoError, "corrupt warehouse table " + name);
      row.attributes.push_back(std::move(*v));
    }
    row.valid_from = parse_date_or_throw(rec.fields[n_attr + 1], name);
    if (!rec.fields[n_attr + 2].empty()) {
      row.valid_to = parse_date_or_throw(rec.fields[n_attr + 2], name);
    }
    row.is_current = rec.fields[n_attr + 3] == "true";
    row.version = static_cast<int>(parse_i64(rec.fields[n_attr + 4], name));
    table.rows_.push_back(std::move(row));
  }
  table.reindex();
  table.next_key_ = next_key;
  for (const auto& r : table.rows_) {
    table.next_key_ = std::max(table.next_key_, r.surrogate_key + 1);
  }
  return table;
}

// ------------------------------------------------------------ FactTable

FactTable::FactTable(schema::FactDef def) : def_(std::move(def)) {
  fks_.resize(def_.roles.size());
  measures_.resize(def_.measures.size());
}

Value FactTable::measure_value(std::size_t measure, std::size_t row) const {
  std::int64_t raw = measures_[measure][row];
  if (def_.measures[measure].kind == ValueKind::Decimal) return Value{Decimal::from_raw(raw)};
  return Value{raw};
}

FactTable::PendingRows FactTable::make_pending() const {
  PendingRows p;
  p.fks.resize(def_.roles.size());
  p.measures.resize(def_.measures.size());
  return p;
}

std::uint32_t FactTable::batch_index(const std::string& batch_id) {
  auto it = std::find(batch_names_.begin(), batch_names_.end(), batch_id);
  if (it != batch_names_.end()) return static_cast<std::uint32_t>(it - batch_names_.begin());
  batch_names_.push_back(batch_id);
  return static_cast<std::uint32_t>(batch_names_.size() - 1);
}

std::size_t FactTable::count_batch(const std::string& batch_id) const {
  auto it = std::find(batch_names_.begin(), batch_names_.end(), batch_id);
  if (it == batch_names_.end()) return 0;
  auto idx = static_cast<std::uint32_t>(it - batch_names_.begin());
  return static_cast<std::size_t>(std::count(batch_.begin(), batch_.end(), idx));
}

std::size_t FactTable::replace_batch(const std::string& batch_id, const PendingRows& rows) {
  const std::uint32_t idx = batch_index(batch_id);
  std::size_t insert_at = batch_.size();
  std::size_t removed = 0;
  std::size_t write = 0;
  for (std::size_t read = 0; read < batch_.size(); ++read) {
    if (batch_[read] == idx) {
      if (removed == 0) insert_at = write;
      ++removed;
      continue;
    }
    if (write != read) {
      for (auto& col : fks_) col[write] = col[read];
      for (auto& col : measures_) col[write] = col[read];
      batch_[write] = batch_[read];
    }
    ++write;
  }
  for (auto& col : fks_) col.resize(write);
  for (auto& col : measures_) col.resize(write);
  batch_.resize(write);

  const std::size_t n = rows.size();
  for (std::size_t r = 0; r < fks_.size(); ++r) {
    fks_[r].insert(fks_[r].begin() + static_cast<std::ptrdiff_t>(insert_at),
                   rows.fks[r].begin(), rows.fks[r].end());
  }
  for (std::size_t m = 0; m < measures_.size(); ++m) {
    measures_[m].insert(measures_[m].begin() + static_cast<std::ptrdiff_t>(insert_at),
                        rows.measures[m].begin(), rows.measures[m].end());
  }
  batch_.insert(batch_.begin() + static_cast<std::ptrdiff_t>(insert_at), n, idx);
  return removed;
}

std::string FactTable::to_csv() const {
  std::vector<std::string> header;
  for (const auto& r : def_.roles) header.push_back(r.role_name);
  for (const auto& m : def_.measures) header.push_back(m.name);
  header.push_back("batch_id");
  std::string out = csv::join(header) + "\n";
  out.reserve(out.size() + size() * 64);
  for (std::size_t row = 0; row < size(); ++row) {
    for (std::size_t r = 0; r < fks_.size(); ++r) {
      out += std::to_string(fks_[r][row]);
      out += ',';
    }
    for (std::size_t m = 0; m < measures_.size(); ++m) {
      out += measure_value(m, row).to_string();
      out += ',';
    }
    out += csv::escape(batch_names_[batch_[row]]);
    out += '\n';
  }
  return out;
}

FactTable FactTable::from_csv(schema::FactDef def, std::string_view text) {
  FactTable table(std::move(def));
  const std::string& name = table.def_.name;
  const std::size_t n_roles = table.def_.roles.size();
  const std::size_t n_meas = table.def_.measures.size();
  csv::Reader reader(text);
  csv::Record rec;
  bool header = true;
  while (reader.next(rec)) {
    if (header) {
      header = false;
      if (rec.fields.size() != n_roles + n_meas + 1) {
        throw Error(ErrorCode::CatalogMismatch,
                    "table " + name + " does not match its catalog definition");
      }
      continue;
    }
    if (rec.fields.size() != n_roles + n_meas + 1) {
      throw Error(ErrorCode::IoError, "corrupt warehouse table " + name);
    }
    for (std::size_t r = 0; r < n_roles; ++r) {
      table.fks_[r].push_back(parse_i64(rec.fields[r], name));
    }
    for (std::size_t m = 0; m < n_meas; ++m) {
      const auto& field = rec.fields[n_roles + m];
      if (table.def_.measures[m].kind == ValueKind::Decimal) {
        auto d = Decimal::parse(field);
        if (!d) throw Error(ErrorCode::IoError, "corrupt warehouse table " + name);
        table.measures_[m].push_back(d->raw());
      } else {
        table.measures_[m].push_back(parse_i64(field, name));
      }
    }
    table.batch_.push_back(table.batch_index(rec.fields.back()));
  }
  return table;
}

// ------------------------------------------------------------ Warehouse

Warehouse::Warehouse(schema::SchemaCatalog catalog) : catalog_(std::move(catalog)) {
  for (const auto& d : catalog_.dimensions) dims_.emplace(casefold(d.name), DimensionTable(d));
  for (const auto& f : catalog_.facts) facts_.emplace(casefold(f.name), FactTable(f));
}

const DimensionTable& Warehouse::dimension(std::string_view name) const {
  auto it = dims_.find(casefold(name));
  if (it == dims_.end()) {
    throw Error(ErrorCode::UnknownReference, "no dimension table " + std::string(name));
  }
  return it->second;
}

const FactTable& Warehouse::fact(std::string_view name) const {
  auto it = facts_.find(casefold(name));
  if (it == facts_.end()) {
    throw Error(ErrorCode::UnknownReference, "no fact table " + std::string(name));
  }
  return it->second;
}

bool Warehouse::has_dimension(std::string_view name) const {
  return dims_.count(casefold(name)) != 0;
}
bool Warehouse::has_fact(std::string_view name) const {
  return facts_.count(casefold(name)) != 0;
}

void Warehouse::commit(DimensionTable table) {
  dims_[casefold(table.def().name)] = std::move(table);
}
void Warehouse::commit(FactTable table) {
  facts_[casefold(table.def().name)] = std::move(table);
}

std::vector<TableInfo> Warehouse::table_infos() const {
  std::vector<TableInfo> out;
  for (const auto& d : catalog_.dimensions) {
    const auto& t = dimension(d.name);
    out.push_back({d.name, "dimension", t.rows().size(), sha256_hex(t.to_csv())});
  }
  for (const auto& f : catalog_.facts) {
    const auto& t = fact(f.name);
    out.push_back({f.name, "fact", t.size(), sha256_hex(t.to_csv())});
  }
  return out;
}

std::map<std::string, std::string> Warehouse::content_hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& info : table_infos()) out[info.name] = info.hash;
  return out;
}

bool Warehouse::exists(const std::filesystem::path& dir) {
  return std::filesystem::is_regular_file(dir / "warehouse.json");
}

void Warehouse::save(const std::filesystem::path& dir) const {
  json j;
  j["format"] = 1;
  j["version"] = version_;
  j["catalog"] = json::parse(schema::serialize_catalog(catalog_));
  j["tables"] = json::object();
  for (const auto& d : catalog_.dimensions) {
    const auto& t = dimension(d.name);
    std::string body = t.to_csv();
    csv::write_file(dir / "tables" / (d.name + ".csv"), body);
    j["tables"][d.name] = {{"kind", "dimension"},
                           {"file", "tables/" + d.name + ".csv"},
                           {"rows", t.rows().size()},
                           {"next_key", t.next_key()},
                           {"hash", sha256_hex(body)}};
  }
  for (const auto& f : catalog_.facts) {
    const auto& t = fact(f.name);
    std::string body = t.to_csv();
    csv::write_file(dir / "tables" / (f.name + ".csv"), body);
    j["tables"][f.name] = {{"kind", "fact"},
                           {"file", "tables/" + f.name + ".csv"},
                           {"rows", t.size()},
                           {"hash", sha256_hex(body)}};
  }
  csv::write_file(dir / "warehouse.json", j.dump(2) + "\n");
}

Warehouse Warehouse::load(const std::filesystem::path& dir) {
  if (!exists(dir)) {
    throw Error(ErrorCode::NotInitialized,
                "no warehouse at " + dir.string() + " (run `starcube init` first)");
  }
  json j;
  try {
    j = json::parse(csv::read_file(dir / "warehouse.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("corrupt warehouse.json: ") + e.what());
  }
  Warehouse w(schema::define_catalog(j.at("catalog").dump()));
  w.version_ = j.value("version", std::int64_t{0});
  const auto& tables = j.at("tables");
  for (const auto& d : w.catalog_.dimensions) {
    if (!tables.contains(d.name)) continue;
    const auto& info = tables.at(d.name);
    auto body = csv::read_file(dir / info.at("file").get<std::string>());
    w.commit(DimensionTable::from_csv(d, body, info.value("next_key", std::int64_t{1})));
  }
  for (const auto& f : w.catalog_.facts) {
    if (!tables.contains(f.name)) continue;
    const auto& info = tables.at(f.name);
    auto body = csv::read_file(dir / info.at("file").get<std::string>());
    w.commit(FactTable::from_csv(f, body));
  }
  return w;
}

}  // namespace starcube::etl
