#include "starcube/etl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "starcube/csv.hpp"
#include "starcube/error.hpp"
#include "starcube/etl/fuzzy.hpp"

namespace starcube::etl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorCode::ConfigError, msg);
}

std::optional<Value> coerce(const Value& v, ValueKind kind) {
  if (v.is_null()) return v;
  if (v.kind() == kind) return v;
  return Value::parse(kind, v.to_string());
}

Date today() {
  auto now = std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now());
  return Date::from_days(static_cast<std::int32_t>(now.time_since_epoch().count()));
}

QuarantineRecord reject(const Row& row, std::string step, std::string reason) {
  return QuarantineRecord{row.provenance, row.raw, std::move(step), std::move(reason)};
}

}  // namespace

std::string step_name(const TransformStep& step) {
  struct Visitor {
    std::string operator()(const RenameColumns&) const { return "rename"; }
    std::string operator()(const ConvertTypes&) const { return "convert_types"; }
    std::string operator()(const FuzzyLookup&) const { return "fuzzy_lookup"; }
    std::string operator()(const DeriveColumn&) const { return "derive_column"; }
    std::string operator()(const SortDedupe&) const { return "sort_dedupe"; }
  };
  return std::visit(Visitor{}, step);
}

std::optional<std::size_t> RowSet::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (iequals(columns[i], name)) return i;
  }
  return std::nullopt;
}

const TableReport* PipelineReport::find(std::string_view table) const {
  for (const auto& t : tables) {
    if (iequals(t.table, table)) return &t;
  }
  return nullptr;
}

// ------------------------------------------------------------------ config

namespace {

TransformStep parse_step(const json& j) {
  if (!j.is_object() || !j.contains("step")) config_error("transform needs a \"step\" field");
  const auto kind = casefold(j.at("step").get<std::string>());
  if (kind == "rename" || kind == "rename_columns") {
    RenameColumns r;
    for (const auto& [from, to] : j.at("map").items()) r.map.emplace_back(from, to.get<std::string>());
    return r;
  }
  if (kind == "convert_types") {
    ConvertTypes c;
    for (const auto& [col, k] : j.at("types").items()) {
      auto vk = parse_value_kind(k.get<std::string>());
      if (!vk) config_error("convert_types: unknown kind " + k.get<std::string>());
      c.types.emplace_back(col, *vk);
    }
    auto on_error = casefold(j.value("on_error", std::string("quarantine")));
    if (on_error == "abort") {
      c.on_error = OnError::Abort;
    } else if (on_error != "quarantine") {
      config_error("convert_types: on_error must be quarantine or abort");
    }
    return c;
  }
  if (kind == "fuzzy_lookup") {
    FuzzyLookup f;
    f.column = j.at("column").get<std::string>();
    f.reference_dimension = j.at("reference_dimension").get<std::string>();
    f.reference_attribute = j.value("reference_attribute", f.column);
    f.threshold = j.value("threshold", 0.8);
    auto on_miss = casefold(j.value("on_miss", std::string("keep")));
    if (on_miss == "quarantine") {
      f.quarantine_misses = true;
    } else if (on_miss != "keep") {
      config_error("fuzzy_lookup: on_miss must be keep or quarantine");
    }
    if (!(f.threshold >= 0.0 && f.threshold <= 1.0)) {
      config_error("fuzzy_lookup: threshold must be within [0,1]");
    }
    return f;
  }
  if (kind == "derive_column") {
    DeriveColumn d;
    d.target = j.at("target").get<std::string>();
    auto rule = casefold(j.at("rule").get<std::string>());
    if (rule == "age_band") {
      d.rule = DeriveRule::AgeBand;
      d.source = j.value("source", std::string("age"));
    } else if (rule == "date_parts") {
      d.rule = DeriveRule::DateParts;
      d.source = j.at("source").get<std::string>();
    } else {
      config_error("derive_column: unknown rule " + rule);
    }
    return d;
  }
  if (kind == "sort_dedupe") {
    SortDedupe s;
    for (const auto& k : j.at("keys")) s.keys.push_back(k.get<std::string>());
    if (s.keys.empty()) config_error("sort_dedupe needs at least one key");
    return s;
  }
  config_error("unknown transform step \"" + kind + "\"");
}

ordered_json step_to_json(const TransformStep& step) {
  ordered_json j;
  j["step"] = step_name(step);
  if (auto r = std::get_if<RenameColumns>(&step)) {
    ordered_json m = ordered_json::object();
    for (const auto& [from, to] : r->map) m[from] = to;
    j["map"] = m;
  } else if (auto c = std::get_if<ConvertTypes>(&step)) {
    ordered_json m = ordered_json::object();
    for (const auto& [col, k] : c->types) m[col] = std::string(to_string(k));
    j["types"] = m;
    j["on_error"] = c->on_error == OnError::Abort ? "abort" : "quarantine";
  } else if (auto f = std::get_if<FuzzyLookup>(&step)) {
    j["column"] = f->column;
    j["reference_dimension"] = f->reference_dimension;
    j["reference_attribute"] = f->reference_attribute;
    j["threshold"] = f->threshold;
    j["on_miss"] = f->quarantine_misses ? "quarantine" : "keep";
  } else if (auto d = std::get_if<DeriveColumn>(&step)) {
    j["target"] = d->target;
    j["rule"] = d->rule == DeriveRule::AgeBand ? "age_band" : "date_parts";
    j["source"] = d->source;
  } else if (auto s = std::get_if<SortDedupe>(&step)) {
    j["keys"] = s->keys;
  }
  return j;
}

}  // namespace

PipelineConfig parse_pipeline(std::string_view document, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    config_error(std::string("pipeline document is not valid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  try {
    cfg.batch_id = j.value("batch_id", cfg.batch_id);
    if (j.contains("batch_date")) {
      auto d = Date::parse(j.at("batch_date").get<std::string>());
      if (!d) config_error("batch_date must be YYYY-MM-DD");
      cfg.batch_date = *d;
    }
    auto padding = casefold(j.value("calendar_padding", std::string("year")));
    if (padding == "none") {
      cfg.calendar_full_years = false;
    } else if (padding != "year") {
      config_error("calendar_padding must be year or none");
    }
    for (const auto& s : j.at("sources")) {
      SourceDef src;
      src.name = s.at("name").get<std::string>();
      src.path = s.at("path").get<std::string>();
      auto delim = s.value("delimiter", std::string(","));
      if (delim == "\\t") delim = "\t";
      if (delim.size() != 1) config_error("source " + src.name + ": delimiter must be one byte");
      src.delimiter = delim[0];
      src.encoding = s.value("encoding", std::string("UTF-8"));
      src.has_header = s.value("has_header", true);
      cfg.sources.push_back(std::move(src));
    }
    for (const auto& l : j.at("loads")) {
      LoadDef load;
      load.target = l.at("target").get<std::string>();
      load.source = l.at("source").get<std::string>();
      if (l.contains("batch_id")) load.batch_id = l.at("batch_id").get<std::string>();
      auto late = casefold(l.value("late_arriving", std::string("quarantine")));
      if (late == "unknown_member") {
        load.late_arriving = LateArriving::UnknownMember;
      } else if (late != "quarantine") {
        config_error("late_arriving must be quarantine or unknown_member");
      }
      if (l.contains("transforms")) {
        for (const auto& t : l.at("transforms")) load.transforms.push_back(parse_step(t));
      }
      cfg.loads.push_back(std::move(load));
    }
  } catch (const json::exception& e) {
    config_error(std::string("malformed pipeline document: ") + e.what());
  }
  return cfg;
}

PipelineConfig load_pipeline_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = csv::read_file(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SourceNotFound) {
      throw Error(ErrorCode::IoError, "pipeline file not found: " + path.string());
    }
    throw;
  }
  return parse_pipeline(text, path.parent_path());
}

std::string serialize_pipeline(const PipelineConfig& config) {
  ordered_json j;
  j["batch_id"] = config.batch_id;
  if (config.batch_date) j["batch_date"] = config.batch_date->to_string();
  j["calendar_padding"] = config.calendar_full_years ? "year" : "none";
  j["sources"] = ordered_json::array();
  for (const auto& s : config.sources) {
    j["sources"].push_back({{"name", s.name},
                            {"path", s.path.generic_string()},
                            {"delimiter", std::string(1, s.delimiter)},
                            {"encoding", s.encoding},
                            {"has_header", s.has_header}});
  }
  j["loads"] = ordered_json::array();
  for (const auto& l : config.loads) {
    ordered_json jl;
    jl["target"] = l.target;
    jl["source"] = l.source;
    if (l.batch_id) jl["batch_id"] = *l.batch_id;
    jl["late_arriving"] =
        l.late_arriving == LateArriving::UnknownMember ? "unknown_member" : "quarantine";
    jl["transforms"] = ordered_json::array();
    for (const auto& t : l.transforms) jl["transforms"].push_back(step_to_json(t));
    j["loads"].push_back(std::move(jl));
  }
  return j.dump(2) + "\n";
}

void validate_pipeline(const PipelineConfig& config, const schema::SchemaCatalog& catalog) {
  if (config.batch_id.empty()) config_error("batch_id must not be empty");
  std::set<std::string> source_names;
  for (const auto& s : config.sources) {
    if (!source_names.insert(casefold(s.name)).second) {
      config_error("duplicate source " + s.name);
    }
    auto enc = casefold(s.encoding);
    if (enc != "utf-8" && enc != "utf8") {
      config_error("source " + s.name + ": only UTF-8 sources are supported");
    }
  }
  for (const auto& l : config.loads) {
    const auto* dim = catalog.find_dimension(l.target);
    const auto* fact = catalog.find_fact(l.target);
    if (!dim && !fact) {
      config_error("load targets undeclared table \"" + l.target + "\"");
    }
    if (dim && dim->calendar) {
      config_error("calendar dimension " + dim->name + " is generated, not loaded");
    }
    if (!source_names.count(casefold(l.source))) {
      config_error("load " + l.target + " reads unknown source \"" + l.source + "\"");
    }
    if (l.batch_id && l.batch_id->empty()) config_error("load " + l.target + ": empty batch_id");
    for (const auto& step : l.transforms) {
      if (auto f = std::get_if<FuzzyLookup>(&step)) {
        const auto* ref = catalog.find_dimension(f->reference_dimension);
        if (!ref) {
          config_error("fuzzy_lookup references unknown dimension " + f->reference_dimension);
        }
        if (!ref->find_attribute(f->reference_attribute)) {
          config_error("fuzzy_lookup references unknown attribute " + f->reference_dimension +
                       "." + f->reference_attribute);
        }
      }
    }
  }
}

// ------------------------------------------------------------------ extract

ExtractResult extract(const SourceDef& source, const std::filesystem::path& base_dir) {
  auto path = source.path.is_absolute() || base_dir.empty() ? source.path
                                                             : base_dir / source.path;
  std::string content = csv::read_file(path);
  if (!csv::is_valid_utf8(content)) {
    throw Error(ErrorCode::EncodingError, "source " + source.name + " is not valid UTF-8");
  }
  ExtractResult out;
  csv::Reader reader(content, source.delimiter);
  csv::Record rec;
  bool need_header = source.has_header;
  while (reader.next(rec)) {
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // blank line
    if (need_header) {
      out.rows.columns = rec.fields;
      need_header = false;
      continue;
    }
    if (out.rows.columns.empty()) {
      for (std::size_t i = 0; i < rec.fields.size(); ++i) {
        out.rows.columns.push_back("column" + std::to_string(i + 1));
      }
    }
    ++out.records;
    std::string raw = csv::join(rec.fields, source.delimiter);
    if (rec.fields.size() != out.rows.columns.size()) {
      out.quarantine.push_back(
          {{source.name, rec.line}, std::move(raw), "extract",
           "RaggedRow: expected " + std::to_string(out.rows.columns.size()) +
               " fields, found " + std::to_string(rec.fields.size())});
      continue;
    }
    Row row;
    row.values.reserve(rec.fields.size());
    for (auto& f : rec.fields) {
      row.values.push_back(f.empty() ? Value{} : Value{std::move(f)});
    }
    row.provenance = {source.name, rec.line};
    row.raw = std::move(raw);
    out.rows.rows.push_back(std::move(row));
  }
  return out;
}

// ------------------------------------------------------------------ transform

std::string age_band(std::int64_t age) {
  if (age < 18) return "0-17";
  if (age < 40) return "18-39";
  if (age < 60) return "40-59";
  return "60+";
}

namespace {

std::size_t require_column(const RowSet& rows, std::string_view name, const std::string& step) {
  auto idx = rows.column_index(name);
  if (!idx) config_error(step + ": column \"" + std::string(name) + "\" is not present");
  return *idx;
}

std::size_t ensure_column(RowSet& rows, const std::string& name) {
  if (auto idx = rows.column_index(name)) return *idx;
  rows.columns.push_back(name);
  for (auto& r : rows.rows) r.values.emplace_back();
  return rows.columns.size() - 1;
}

class TransformRunner {
 public:
  TransformRunner(const schema::SchemaCatalog& catalog, const Warehouse& warehouse,
                  TransformResult& out)
      : catalog_(catalog), warehouse_(warehouse), out_(out) {}

  void operator()(const RenameColumns& step) {
    auto& rows = out_.rows;
    for (const auto& [from, to] : step.map) {
      auto idx = require_column(rows, from, "rename");
      auto existing = rows.column_index(to);
      if (existing && *existing != idx) {
        config_error("rename: target column \"" + to + "\" already exists");
      }
      rows.columns[idx] = to;
    }
  }

  void operator()(const ConvertTypes& step) {
    std::vector<std::pair<std::size_t, ValueKind>> cols;
    for (const auto& [col, kind] : step.types) {
      cols.emplace_back(require_column(out_.rows, col, "convert_types"), kind);
    }
    filter([&](Row& row) -> std::optional<std::string> {
      for (const auto& [idx, kind] : cols) {
        auto converted = coerce(row.values[idx], kind);
        if (!converted) {
          std::string reason = "ConvertTypes: column \"" + out_.rows.columns[idx] +
                               "\" value \"" + row.values[idx].to_string() +
                               "\" is not a valid " + std::string(to_string(kind));
          if (step.on_error == OnError::Abort) {
            throw Error(ErrorCode::InvalidArgument,
                        reason + " (line " + std::to_string(row.provenance.line) + ")");
          }
          return reason;
        }
        row.values[idx] = std::move(*converted);
      }
      return std::nullopt;
    }, "convert_types");
  }

  void operator()(const FuzzyLookup& step) {
    auto idx = require_column(out_.rows, step.column, "fuzzy_lookup");
    const auto* dim = catalog_.find_dimension(step.reference_dimension);
    if (!dim) config_error("fuzzy_lookup: unknown dimension " + step.reference_dimension);
    const auto* attr = dim->find_attribute(step.reference_attribute);
    if (!attr) config_error("fuzzy_lookup: unknown attribute " + step.reference_attribute);
    std::set<std::string> refs(attr->domain.begin(), attr->domain.end());
    if (warehouse_.has_dimension(dim->name)) {
      const auto& table = warehouse_.dimension(dim->name);
      auto ai = *dim->attribute_index(step.reference_attribute);
      for (const auto& r : table.rows()) {
        if (r.is_current && !r.attributes[ai].is_null()) refs.insert(r.attributes[ai].to_string());
      }
    }
    std::vector<std::string> references(refs.begin(), refs.end());
    if (references.empty()) {
      throw Error(ErrorCode::EmptyReferenceSet,
                  "fuzzy_lookup on " + step.column + ": " + dim->name + "." +
                      attr->name + " has no reference values");
    }
    std::unordered_map<std::string, std::optional<std::string>> memo;
    filter([&](Row& row) -> std::optional<std::string> {
      auto& v = row.values[idx];
      if (v.is_null()) return std::nullopt;
      auto text = v.to_string();
      auto it = memo.find(text);
      if (it == memo.end()) {
        auto m = fuzzy_match(text, references, step.threshold);
        it = memo.emplace(text, m ? std::optional<std::string>(m->value) : std::nullopt).first;
      }
      if (it->second) {
        v = Value{*it->second};
      } else if (step.quarantine_misses) {
        return "FuzzyLookup: no reference for \"" + text + "\" in column \"" +
               out_.rows.columns[idx] + "\"";
      }
      return std::nullopt;
    }, "fuzzy_lookup");
  }

  void operator()(const DeriveColumn& step) {
    auto src = require_column(out_.rows, step.source, "derive_column");
    if (step.rule == DeriveRule::AgeBand) {
      auto dst = ensure_column(out_.rows, step.target);
      filter([&](Row& row) -> std::optional<std::string> {
        const auto& v = row.values[src];
        if (v.is_null()) {
          row.values[dst] = Value{};
          return std::nullopt;
        }
        auto age = coerce(v, ValueKind::Integer);
        if (!age) return "DeriveColumn: age \"" + v.to_string() + "\" is not an integer";
        row.values[dst] = Value{age_band(*age->get_if<std::int64_t>())};
        return std::nullopt;
      }, "derive_column");
      return;
    }
    auto y = ensure_column(out_.rows, step.target + "_year");
    auto q = ensure_column(out_.rows, step.target + "_quarter");
    auto m = ensure_column(out_.rows, step.target + "_month");
    filter([&](Row& row) -> std::optional<std::string> {
      const auto& v = row.values[src];
      if (v.is_null()) return std::nullopt;
      auto d = coerce(v, ValueKind::Date);
      if (!d) return "DeriveColumn: \"" + v.to_string() + "\" is not a date";
      const Date date = *d->get_if<Date>();
      row.values[y] = Value{static_cast<std::int64_t>(date.year())};
      row.values[q] = Value{"Q" + std::to_string(date.quarter())};
      row.values[m] = Value{static_cast<std::int64_t>(date.month())};
      return std::nullopt;
    }, "derive_column");
  }

  void operator()(const SortDedupe& step) {
    std::vector<std::size_t> keys;
    for (const auto& k : step.keys) keys.push_back(require_column(out_.rows, k, "sort_dedupe"));
    auto& rows = out_.rows.rows;
    std::stable_sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
      for (auto k : keys) {
        auto c = compare_values(a.values[k], b.values[k]);
        if (c != 0) return c < 0;
      }
      return false;
    });
    std::vector<Row> kept;
    kept.reserve(rows.size());
    for (auto& r : rows) {
      bool dup = !kept.empty() && std::all_of(keys.begin(), keys.end(), [&](std::size_t k) {
        return kept.back().values[k] == r.values[k];
      });
      if (dup) {
        ++out_.deduped;
      } else {
        kept.push_back(std::move(r));
      }
    }
    rows = std::move(kept);
  }

 private:
  template <class Fn>
  void filter(Fn&& fn, const std::string& step) {
    auto& rows = out_.rows.rows;
    std::size_t write = 0;
    for (std::size_t read = 0; read < rows.size(); ++read) {
      if (auto reason = fn(rows[read])) {
        out_.quarantine.push_back(reject(rows[read], step, std::move(*reason)));
        continue;
      }
      if (write != read) rows[write] = std::move(rows[read]);
      ++write;
    }
    rows.resize(write);
  }

  const schema::SchemaCatalog& catalog_;
  const Warehouse& warehouse_;
  TransformResult& out_;
};

}  // namespace

TransformResult apply_transforms(RowSet rows, const std::vector<TransformStep>& steps,
                                 const schema::SchemaCatalog& catalog,
                                 const Warehouse& warehouse) {
  TransformResult out;
  out.rows = std::move(rows);
  TransformRunner runner(catalog, warehouse, out);
  for (const auto& step : steps) std::visit(runner, step);
  return out;
}

// ------------------------------------------------------------------ dimension load

DimensionTable load_dimension(const RowSet& rows, const DimensionTable& current,
                              Date batch_date, DimensionLoadReport& report,
                              std::vector<QuarantineRecord>& quarantine) {
  const auto& def = current.def();
  std::vector<std::size_t> column_of;
  for (const auto& attr : def.attributes) {
    auto idx = rows.column_index(attr.name);
    if (!idx) {
      config_error("rows for " + def.name + " lack attribute column \"" + attr.name + "\"");
    }
    column_of.push_back(*idx);
  }
  const std::size_t nk = current.natural_key_index();

  struct Candidate {
    std::vector<Value> attrs;
    const Row* row;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(rows.rows.size());
  for (const auto& row : rows.rows) {
    Candidate c{{}, &row};
    c.attrs.reserve(def.attributes.size());
    std::optional<std::string> failure;
    for (std::size_t i = 0; i < def.attributes.size(); ++i) {
      auto v = coerce(row.values[column_of[i]], def.attributes[i].kind);
      if (!v) {
        failure = "column \"" + def.attributes[i].name + "\" value \"" +
                  row.values[column_of[i]].to_string() + "\" is not a valid " +
                  std::string(to_string(def.attributes[i].kind));
        break;
      }
      c.attrs.push_back(std::move(*v));
    }
    if (failure) {
      ++report.quarantined;
      quarantine.push_back(reject(row, "load_dimension", "TypeMismatch: " + *failure));
      continue;
    }
    if (c.attrs[nk].is_null()) {
      ++report.quarantined;
      quarantine.push_back(reject(row, "load_dimension", "MissingNaturalKey"));
      continue;
    }
    candidates.push_back(std::move(c));
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [nk](const Candidate& a, const Candidate& b) {
                     return compare_values(a.attrs[nk], b.attrs[nk]) < 0;
                   });

  DimensionTable staged = current;
  std::size_t i = 0;
  while (i < candidates.size()) {
    std::size_t j = i + 1;
    while (j < candidates.size() && candidates[j].attrs[nk] == candidates[i].attrs[nk]) ++j;
    const Candidate& kept = candidates[i];
    for (std::size_t k = i + 1; k < j; ++k) {
      if (candidates[k].attrs == kept.attrs) {
        ++report.deduped;
      } else {
        ++report.quarantined;
        quarantine.push_back(reject(*candidates[k].row, "load_dimension",
                                    "ConflictingDuplicates: natural key \"" +
                                        kept.attrs[nk].to_string() +
                                        "\" appears with different attributes in one batch"));
      }
    }

    auto versions = staged.versions(kept.attrs[nk]);
    if (versions.empty()) {
      DimensionRowStored row;
      row.attributes = kept.attrs;
      row.valid_from = batch_date;
      staged.append(std::move(row));
      ++report.inserted;
    } else {
      std::size_t cur_idx = versions.back();
      for (auto v : versions) {
        if (staged.rows()[v].is_current) cur_idx = v;
      }
      const auto& cur = staged.rows()[cur_idx];
      bool type1_changed = false, type2_changed = false;
      for (std::size_t a = 0; a < def.attributes.size(); ++a) {
        if (cur.attributes[a] == kept.attrs[a]) continue;
        if (def.scd_type(def.attributes[a].name) == schema::ScdType::Type2) {
          type2_changed = true;
        } else {
          type1_changed = true;
        }
      }
      if (type1_changed) {
        for (auto v : versions) {
          auto& r = staged.row_at(v);
          for (std::size_t a = 0; a < def.attributes.size(); ++a) {
            if (def.scd_type(def.attributes[a].name) == schema::ScdType::Type1) {
              r.attributes[a] = kept.attrs[a];
            }
          }
        }
      }
      if (type2_changed) {
        auto& old = staged.row_at(cur_idx);
        old.is_current = false;
        old.valid_to = batch_date;
        DimensionRowStored next;
        next.attributes = kept.attrs;
        next.valid_from = batch_date;
        next.version = old.version + 1;
        staged.append(std::move(next));
        ++report.versioned_type2;
      } else if (type1_changed) {
        ++report.updated_type1;
      } else {
        ++report.unchanged;
      }
    }
    i = j;
  }
  return staged;
}

// ------------------------------------------------------------------ fact load

FactTable load_fact(const RowSet& rows, const FactTable& current, const Warehouse& warehouse,
                    const std::string& batch_id, LateArriving late_arriving,
                    FactLoadReport& report, std::vector<QuarantineRecord>& quarantine) {
  const auto& def = current.def();
  struct RoleBinding {
    std::size_t column;
    const DimensionTable* dim;
    ValueKind nk_kind;
  };
  std::vector<RoleBinding> roles;
  for (const auto& role : def.roles) {
    auto idx = rows.column_index(role.role_name);
    if (!idx) config_error("rows for " + def.name + " lack role column \"" + role.role_name + "\"");
    const auto& dim = warehouse.dimension(role.dimension_name);
    roles.push_back({*idx, &dim, dim.def().attributes[dim.natural_key_index()].kind});
  }
  std::vector<std::size_t> measure_cols;
  for (const auto& m : def.measures) {
    auto idx = rows.column_index(m.source_column);
    if (!idx) {
      throw Error(ErrorCode::UnknownMeasureColumn,
                  def.name + ": measure " + m.name + " needs column \"" + m.source_column +
                      "\" which the source does not provide");
    }
    measure_cols.push_back(*idx);
  }

  auto pending = current.make_pending();
  for (auto& col : pending.fks) col.reserve(rows.rows.size());
  for (auto& col : pending.measures) col.reserve(rows.rows.size());
  std::vector<std::int64_t> fks(roles.size());
  std::vector<std::int64_t> measures(measure_cols.size());

  for (const auto& row : rows.rows) {
    std::optional<std::string> failure;
    for (std::size_t r = 0; r < roles.size() && !failure; ++r) {
      const auto& b = roles[r];
      const Value& raw = row.values[b.column];
      std::optional<std::int64_t> key;
      if (b.dim->def().calendar) {
        if (auto d = coerce(raw, ValueKind::Date); d && !d->is_null()) {
          auto k = d->get_if<Date>()->yyyymmdd();
          if (b.dim->find_by_key(k)) key = k;
        }
      } else if (auto nk = coerce(raw, b.nk_kind); nk && !nk->is_null()) {
        if (const auto* cur = b.dim->current(*nk)) key = cur->surrogate_key;
      }
      if (!key) {
        if (late_arriving == LateArriving::UnknownMember) {
          key = kUnknownKey;
        } else {
          failure = "LateArriving: role " + def.roles[r].role_name + " key \"" +
                    raw.to_string() + "\" not found in " + b.dim->def().name;
        }
      }
      if (key) fks[r] = *key;
    }
    for (std::size_t m = 0; m < measure_cols.size() && !failure; ++m) {
      const auto& mdef = def.measures[m];
      auto v = coerce(row.values[measure_cols[m]], mdef.kind);
      if (!v || v->is_null()) {
        failure = "InvalidMeasure: column \"" + mdef.source_column + "\" value \"" +
                  row.values[measure_cols[m]].to_string() + "\"";
        break;
      }
      measures[m] = mdef.kind == ValueKind::Decimal ? v->get_if<Decimal>()->raw()
                                                    : *v->get_if<std::int64_t>();
    }
    if (failure) {
      ++report.quarantined;
      quarantine.push_back(reject(row, "load_fact", std::move(*failure)));
      continue;
    }
    for (std::size_t r = 0; r < fks.size(); ++r) pending.fks[r].push_back(fks[r]);
    for (std::size_t m = 0; m < measures.size(); ++m) pending.measures[m].push_back(measures[m]);
  }

  FactTable staged = current;
  report.replaced = staged.replace_batch(batch_id, pending);
  report.inserted = pending.size();
  return staged;
}

std::size_t populate_calendar(DimensionTable& table, Date first, Date last, Date batch_date) {
  const auto& def = table.def();
  std::size_t added = 0;
  for (auto days = first.days(); days <= last.days(); ++days) {
    const Date d = Date::from_days(days);
    const auto key = d.yyyymmdd();
    if (table.find_by_key(key)) continue;
    DimensionRowStored row;
    for (const auto& attr : def.attributes) {
      const auto name = casefold(attr.name);
      Value v;
      if (name == def.natural_key || name == "date") {
        v = Value{d};
      } else if (name == "year") {
        v = Value{static_cast<std::int64_t>(d.year())};
      } else if (name == "quarter") {
        v = attr.kind == ValueKind::Integer ? Value{static_cast<std::int64_t>(d.quarter())}
                                            : Value{"Q" + std::to_string(d.quarter())};
      } else if (name == "month") {
        v = Value{static_cast<std::int64_t>(d.month())};
      } else if (name == "day") {
        v = Value{static_cast<std::int64_t>(d.day())};
      }
      row.attributes.push_back(std::move(v));
    }
    row.valid_from = batch_date;
    table.append(std::move(row), key);
    ++added;
  }
  return added;
}

// ------------------------------------------------------------------ pipeline

PipelineReport run_pipeline(const PipelineConfig& config, Warehouse& warehouse) {
  const auto& catalog = warehouse.catalog();
  validate_pipeline(config, catalog);

  PipelineReport report;
  report.batch_id = config.batch_id;
  report.batch_date = config.batch_date.value_or(today());

  auto find_source = [&](const std::string& name) -> const SourceDef& {
    for (const auto& s : config.sources) {
      if (iequals(s.name, name)) return s;
    }
    config_error("unknown source " + name);
  };

  bool committed = false;
  try {
    for (const auto& load : config.loads) {
      const auto* dim = catalog.find_dimension(load.target);
      if (!dim) continue;
      TableReport tr{dim->name, "dimension", load.source};
      auto ex = extract(find_source(load.source), config.base_dir);
      tr.extracted = ex.records;
      auto tx = apply_transforms(std::move(ex.rows), load.transforms, catalog, warehouse);
      DimensionLoadReport dr;
      std::vector<QuarantineRecord> lq;
      auto staged = load_dimension(tx.rows, warehouse.dimension(dim->name), report.batch_date,
                                   dr, lq);
      warehouse.commit(std::move(staged));
      committed = true;
      tr.inserted = dr.inserted;
      tr.updated_type1 = dr.updated_type1;
      tr.versioned_type2 = dr.versioned_type2;
      tr.unchanged = dr.unchanged;
      tr.deduped = dr.deduped + tx.deduped;
      tr.quarantined = ex.quarantine.size() + tx.quarantine.size() + lq.size();
      for (auto* q : {&ex.quarantine, &tx.quarantine, &lq}) {
        report.quarantine.insert(report.quarantine.end(), q->begin(), q->end());
      }
      report.tables.push_back(std::move(tr));
    }

    struct StagedFact {
      const LoadDef* load;
      const schema::FactDef* def;
      TableReport report;
      TransformResult rows;
      std::vector<QuarantineRecord> extract_quarantine;
    };
    std::vector<StagedFact> facts;
    for (const auto& load : config.loads) {
      const auto* fact = catalog.find_fact(load.target);
      if (!fact) continue;
      StagedFact sf{&load, fact, TableReport{fact->name, "fact", load.source}, {}, {}};
      auto ex = extract(find_source(load.source), config.base_dir);
      sf.report.extracted = ex.records;
      sf.extract_quarantine = std::move(ex.quarantine);
      sf.rows = apply_transforms(std::move(ex.rows), load.transforms, catalog, warehouse);
      facts.push_back(std::move(sf));
    }

    // Calendar dimensions cover every date a fact row references.
    for (const auto& dim : catalog.dimensions) {
      if (!dim.calendar) continue;
      std::optional<Date> lo, hi;
      for (const auto& sf : facts) {
        for (const auto& role : sf.def->roles) {
          if (!iequals(role.dimension_name, dim.name)) continue;
          auto col = sf.rows.rows.column_index(role.role_name);
          if (!col) continue;
          for (const auto& row : sf.rows.rows.rows) {
            auto d = coerce(row.values[*col], ValueKind::Date);
            if (!d || d->is_null()) continue;
            Date date = *d->get_if<Date>();
            if (!lo || date < *lo) lo = date;
            if (!hi || date > *hi) hi = date;
          }
        }
      }
      if (!lo) continue;
      if (config.calendar_full_years) {
        lo = Date::from_ymd(lo->year(), 1, 1);
        hi = Date::from_ymd(hi->year(), 12, 31);
      }
      DimensionTable staged = warehouse.dimension(dim.name);
      auto added = populate_calendar(staged, *lo, *hi, report.batch_date);
      warehouse.commit(std::move(staged));
      committed = true;
      TableReport tr{dim.name, "calendar", ""};
      tr.extracted = static_cast<std::size_t>(hi->days() - lo->days() + 1);
      tr.inserted = added;
      tr.unchanged = tr.extracted - added;
      report.tables.push_back(std::move(tr));
    }

    for (auto& sf : facts) {
      FactLoadReport fr;
      std::vector<QuarantineRecord> lq;
      const auto& batch = sf.load->batch_id ? *sf.load->batch_id : config.batch_id;
      auto staged = load_fact(sf.rows.rows, warehouse.fact(sf.def->name), warehouse, batch,
                              sf.load->late_arriving, fr, lq);
      warehouse.commit(std::move(staged));
      committed = true;
      sf.report.inserted = fr.inserted;
      sf.report.replaced = fr.replaced;
      sf.report.deduped = sf.rows.deduped;
      sf.report.quarantined = sf.extract_quarantine.size() + sf.rows.quarantine.size() + lq.size();
      for (auto* q : {&sf.extract_quarantine, &sf.rows.quarantine, &lq}) {
        report.quarantine.insert(report.quarantine.end(), q->begin(), q->end());
      }
      report.tables.push_back(std::move(sf.report));
    }
  } catch (...) {
    if (committed) warehouse.bump_version();
    throw;
  }
  warehouse.bump_version();
  report.warehouse_version = warehouse.version();
  return report;
}

// ------------------------------------------------------------------ output

std::string report_to_json(const PipelineReport& report) {
  ordered_json j;
  j["batch_id"] = report.batch_id;
  j["batch_date"] = report.batch_date.to_string();
  j["warehouse_version"] = report.warehouse_version;
  j["tables"] = ordered_json::array();
  for (const auto& t : report.tables) {
    j["tables"].push_back({{"table", t.table},
                           {"kind", t.kind},
                           {"source", t.source},
                           {"extracted", t.extracted},
                           {"inserted", t.inserted},
                           {"updated_type1", t.updated_type1},
                           {"versioned_type2", t.versioned_type2},
                           {"unchanged", t.unchanged},
                           {"deduped", t.deduped},
                           {"quarantined", t.quarantined},
                           {"replaced", t.replaced}});
  }
  j["quarantined_rows"] = report.quarantine.size();
  return j.dump(2) + "\n";
}

std::string report_to_table(const PipelineReport& report) {
  const std::vector<std::string> header{"table",     "kind",     "extracted", "inserted",
                                        "type1",     "type2",    "unchanged", "deduped",
                                        "quarantined", "replaced"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : report.tables) {
    rows.push_back({t.table, t.kind, std::to_string(t.extracted), std::to_string(t.inserted),
                    std::to_string(t.updated_type1), std::to_string(t.versioned_type2),
                    std::to_string(t.unchanged), std::to_string(t.deduped),
                    std::to_string(t.quarantined), std::to_string(t.replaced)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  out << "batch " << report.batch_id << " (" << report.batch_date.to_string()
      << "), warehouse version " << report.warehouse_version << "\n";
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out << "  ";
      if (c < 2) {
        out << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      } else {
        out << std::right << std::setw(static_cast<int>(width[c])) << r[c];
      }
    }
    out << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  out << "quarantined rows: " << report.quarantine.size() << "\n";
  return out.str();
}

std::string quarantine_to_csv(const std::vector<QuarantineRecord>& records) {
  std::string out = "source,line,step,reason,raw_row\n";
  for (const auto& q : records) {
    out += csv::join({q.provenance.source, std::to_string(q.provenance.line), q.step, q.reason,
                      q.raw_row});
    out += '\n';
  }
  return out;
}

}  // namespace starcube::etl
