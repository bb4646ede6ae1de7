#include "starcube/schema/catalog.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "json.hpp"
#include "starcube/csv.hpp"
#include "starcube/error.hpp"

namespace starcube::schema {

using nlohmann::json;

std::string_view to_string(ScdType t) {
  return t == ScdType::Type2 ? "Type2" : "Type1";
}

std::string_view to_string(Aggregator a) {
  switch (a) {
    case Aggregator::Sum: return "SUM";
    case Aggregator::Count: return "COUNT";
    case Aggregator::Min: return "MIN";
    case Aggregator::Max: return "MAX";
    case Aggregator::Avg: return "AVG";
  }
  return "SUM";
}

std::optional<Aggregator> parse_aggregator(std::string_view text) {
  auto t = casefold(text);
  if (t == "sum") return Aggregator::Sum;
  if (t == "count") return Aggregator::Count;
  if (t == "min") return Aggregator::Min;
  if (t == "max") return Aggregator::Max;
  if (t == "avg") return Aggregator::Avg;
  return std::nullopt;
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::DuplicateName: return "DuplicateName";
    case ViolationKind::UnknownReference: return "UnknownReference";
    case ViolationKind::EmptyHierarchy: return "EmptyHierarchy";
    case ViolationKind::MissingElement: return "MissingElement";
  }
  return "MissingElement";
}

namespace {

template <class Range, class Proj>
auto find_by_name(const Range& items, std::string_view name, Proj proj)
    -> decltype(&*std::begin(items)) {
  for (const auto& item : items) {
    if (iequals(proj(item), name)) return &item;
  }
  return nullptr;
}

template <class Range, class Proj>
std::optional<std::size_t> index_by_name(const Range& items, std::string_view name,
                                         Proj proj) {
  std::size_t i = 0;
  for (const auto& item : items) {
    if (iequals(proj(item), name)) return i;
    ++i;
  }
  return std::nullopt;
}

constexpr auto kName = [](const auto& x) -> const std::string& { return x.name; };

}  // namespace

const LevelDef* HierarchyDef::find_level(std::string_view level_name) const {
  return find_by_name(levels, level_name, kName);
}
std::optional<std::size_t> HierarchyDef::level_index(std::string_view level_name) const {
  return index_by_name(levels, level_name, kName);
}

const AttributeDef* DimensionDef::find_attribute(std::string_view attr) const {
  return find_by_name(attributes, attr, kName);
}
std::optional<std::size_t> DimensionDef::attribute_index(std::string_view attr) const {
  return index_by_name(attributes, attr, kName);
}
const HierarchyDef* DimensionDef::find_hierarchy(std::string_view h) const {
  return find_by_name(hierarchies, h, kName);
}
std::optional<std::size_t> DimensionDef::hierarchy_index(std::string_view h) const {
  return index_by_name(hierarchies, h, kName);
}
ScdType DimensionDef::scd_type(std::string_view attr) const {
  for (const auto& [name, type] : scd_policy) {
    if (iequals(name, attr)) return type;
  }
  return ScdType::Type1;
}
bool DimensionDef::has_type2() const {
  return std::any_of(scd_policy.begin(), scd_policy.end(),
                     [](const auto& kv) { return kv.second == ScdType::Type2; });
}

const RoleDef* FactDef::find_role(std::string_view role) const {
  return find_by_name(roles, role, [](const RoleDef& r) -> const std::string& {
    return r.role_name;
  });
}
std::optional<std::size_t> FactDef::role_index(std::string_view role) const {
  return index_by_name(roles, role, [](const RoleDef& r) -> const std::string& {
    return r.role_name;
  });
}
const MeasureDef* FactDef::find_measure(std::string_view measure) const {
  return find_by_name(measures, measure, kName);
}
std::optional<std::size_t> FactDef::measure_index(std::string_view measure) const {
  return index_by_name(measures, measure, kName);
}

const DimensionDef* SchemaCatalog::find_dimension(std::string_view name) const {
  return find_by_name(dimensions, name, kName);
}
const FactDef* SchemaCatalog::find_fact(std::string_view name) const {
  return find_by_name(facts, name, kName);
}
const CubeDef* SchemaCatalog::find_cube(std::string_view name) const {
  return find_by_name(cubes, name, kName);
}

// ------------------------------------------------------------- validation

namespace {

class ViolationSink {
 public:
  void add(ViolationKind kind, std::string element, std::string detail) {
    out_.push_back({kind, std::move(element), std::move(detail)});
  }

  template <class Range, class Proj>
  void check_unique(const Range& items, Proj proj, const std::string& where) {
    std::set<std::string> seen;
    std::set<std::string> reported;
    for (const auto& item : items) {
      const std::string& name = proj(item);
      auto key = casefold(name);
      if (!seen.insert(key).second && reported.insert(key).second) {
        add(ViolationKind::DuplicateName, name, where);
      }
    }
  }

  std::vector<Violation> finish() && {
    std::stable_sort(out_.begin(), out_.end(), [](const Violation& a, const Violation& b) {
      return std::make_tuple(casefold(a.element), a.element, a.kind, a.detail) <
             std::make_tuple(casefold(b.element), b.element, b.kind, b.detail);
    });
    return std::move(out_);
  }

 private:
  std::vector<Violation> out_;
};

void validate_dimension(const DimensionDef& dim, ViolationSink& sink) {
  const std::string where = "dimension " + dim.name;
  sink.check_unique(dim.attributes, kName, where + " attributes");
  sink.check_unique(dim.hierarchies, kName, where + " hierarchies");
  if (dim.attributes.empty()) {
    sink.add(ViolationKind::MissingElement, dim.name, where + " has no attributes");
  }
  if (!dim.find_attribute(dim.natural_key)) {
    sink.add(ViolationKind::UnknownReference,
             dim.natural_key.empty() ? "(natural_key)" : dim.natural_key,
             where + " natural_key");
  } else if (dim.calendar && dim.find_attribute(dim.natural_key)->kind != ValueKind::Date) {
    sink.add(ViolationKind::MissingElement, dim.natural_key,
             where + " calendar natural_key must be a date");
  }
  if (dim.hierarchies.empty()) {
    sink.add(ViolationKind::EmptyHierarchy, dim.name, where + " has no hierarchy");
  }
  for (const auto& h : dim.hierarchies) {
    const std::string hwhere = where + " hierarchy " + h.name;
    if (h.levels.empty()) {
      sink.add(ViolationKind::EmptyHierarchy, h.name, hwhere + " has no levels");
    }
    sink.check_unique(h.levels, kName, hwhere + " levels");
    for (const auto& level : h.levels) {
      if (iequals(level.name, "All")) {
        sink.add(ViolationKind::DuplicateName, level.name,
                 hwhere + " level collides with the implicit All level");
      }
      if (!dim.find_attribute(level.source_attribute)) {
        sink.add(ViolationKind::UnknownReference, level.source_attribute,
                 hwhere + " level " + level.name);
      }
    }
  }
  for (const auto& [attr, type] : dim.scd_policy) {
    if (!dim.find_attribute(attr)) {
      sink.add(ViolationKind::UnknownReference, attr, where + " scd_policy");
    }
  }
}

}  // namespace

std::vector<Violation> validate_catalog(const SchemaCatalog& catalog) {
  ViolationSink sink;
  sink.check_unique(catalog.dimensions, kName, "dimensions");
  sink.check_unique(catalog.facts, kName, "facts");
  sink.check_unique(catalog.cubes, kName, "cubes");

  for (const auto& dim : catalog.dimensions) validate_dimension(dim, sink);

  for (const auto& fact : catalog.facts) {
    const std::string where = "fact " + fact.name;
    sink.check_unique(fact.roles,
                      [](const RoleDef& r) -> const std::string& { return r.role_name; },
                      where + " roles");
    sink.check_unique(fact.measures, kName, where + " measures");
    if (fact.roles.empty()) {
      sink.add(ViolationKind::MissingElement, fact.name, where + " has no roles");
    }
    if (fact.measures.empty()) {
      sink.add(ViolationKind::MissingElement, fact.name, where + " has no measures");
    }
    for (const auto& role : fact.roles) {
      if (!catalog.find_dimension(role.dimension_name)) {
        sink.add(ViolationKind::UnknownReference, role.dimension_name,
                 where + " role " + role.role_name);
      }
    }
  }

  for (const auto& cube : catalog.cubes) {
    const std::string where = "cube " + cube.name;
    const FactDef* fact = catalog.find_fact(cube.fact);
    if (!fact) {
      sink.add(ViolationKind::UnknownReference, cube.fact, where + " fact");
      continue;
    }
    for (const auto& role : cube.included_roles) {
      if (!fact->find_role(role)) {
        sink.add(ViolationKind::UnknownReference, role, where + " included_roles");
      }
    }
    for (const auto& m : cube.included_measures) {
      if (!fact->find_measure(m)) {
        sink.add(ViolationKind::UnknownReference, m, where + " included_measures");
      }
    }
  }
  return std::move(sink).finish();
}

// ------------------------------------------------------------- documents

namespace {

[[noreturn]] void bad_document(const std::string& what) {
  throw Error(ErrorCode::InvalidDocument, "invalid catalog document: " + what);
}

const json& require(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key)) {
    bad_document(ctx + " is missing \"" + key + "\"");
  }
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_string()) bad_document(ctx + "." + key + " must be a string");
  return v.get<std::string>();
}

const json& require_array(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_array()) bad_document(ctx + "." + key + " must be an array");
  return v;
}

ValueKind parse_kind(const json& obj, const std::string& ctx) {
  auto text = require_string(obj, "kind", ctx);
  auto kind = parse_value_kind(text);
  if (!kind) bad_document(ctx + " has unknown kind \"" + text + "\"");
  return *kind;
}

DimensionDef parse_dimension(const json& j) {
  DimensionDef dim;
  dim.name = require_string(j, "name", "dimension");
  const std::string ctx = "dimension " + dim.name;
  dim.natural_key = require_string(j, "natural_key", ctx);
  for (const auto& a : require_array(j, "attributes", ctx)) {
    AttributeDef attr;
    attr.name = require_string(a, "name", ctx + " attribute");
    attr.kind = parse_kind(a, ctx + " attribute " + attr.name);
    if (a.contains("domain")) {
      if (!a.at("domain").is_array()) bad_document(ctx + " domain must be an array");
      for (const auto& v : a.at("domain")) {
        if (!v.is_string()) bad_document(ctx + " domain values must be strings");
        attr.domain.push_back(v.get<std::string>());
      }
    }
    dim.attributes.push_back(std::move(attr));
  }
  for (const auto& h : require_array(j, "hierarchies", ctx)) {
    HierarchyDef hier;
    hier.name = require_string(h, "name", ctx + " hierarchy");
    for (const auto& l : require_array(h, "levels", ctx + " hierarchy " + hier.name)) {
      LevelDef level;
      level.name = require_string(l, "name", ctx + " level");
      level.source_attribute = require_string(l, "source_attribute", ctx + " level");
      hier.levels.push_back(std::move(level));
    }
    if (h.contains("has_all") && !h.at("has_all").get<bool>()) {
      bad_document(ctx + " hierarchy " + hier.name + ": has_all must be true");
    }
    dim.hierarchies.push_back(std::move(hier));
  }
  if (j.contains("scd_policy")) {
    const auto& p = j.at("scd_policy");
    if (!p.is_object()) bad_document(ctx + ".scd_policy must be an object");
    for (const auto& [attr, type] : p.items()) {
      if (!type.is_string()) bad_document(ctx + ".scd_policy values must be strings");
      auto t = casefold(type.get<std::string>());
      if (t == "type1") {
        dim.scd_policy[attr] = ScdType::Type1;
      } else if (t == "type2") {
        dim.scd_policy[attr] = ScdType::Type2;
      } else {
        bad_document(ctx + ".scd_policy has unknown type " + type.get<std::string>());
      }
    }
  }
  if (j.contains("calendar")) dim.calendar = j.at("calendar").get<bool>();
  return dim;
}

FactDef parse_fact(const json& j) {
  FactDef fact;
  fact.name = require_string(j, "name", "fact");
  const std::string ctx = "fact " + fact.name;
  for (const auto& r : require_array(j, "roles", ctx)) {
    fact.roles.push_back({require_string(r, "role_name", ctx + " role"),
                          require_string(r, "dimension_name", ctx + " role")});
  }
  for (const auto& m : require_array(j, "measures", ctx)) {
    MeasureDef measure;
    measure.name = require_string(m, "name", ctx + " measure");
    measure.source_column = m.contains("source_column")
                                ? require_string(m, "source_column", ctx)
                                : measure.name;
    auto agg_text = require_string(m, "aggregator", ctx + " measure " + measure.name);
    auto agg = parse_aggregator(agg_text);
    if (!agg) bad_document(ctx + " measure has unknown aggregator " + agg_text);
    measure.aggregator = *agg;
    measure.kind = parse_kind(m, ctx + " measure " + measure.name);
    if (measure.kind != ValueKind::Integer && measure.kind != ValueKind::Decimal) {
      bad_document(ctx + " measure " + measure.name + " must be integer or decimal");
    }
    fact.measures.push_back(std::move(measure));
  }
  return fact;
}

CubeDef parse_cube(const json& j, const std::vector<FactDef>& facts) {
  CubeDef cube;
  cube.name = require_string(j, "name", "cube");
  cube.fact = require_string(j, "fact", "cube " + cube.name);
  auto strings = [&](const char* key) {
    std::vector<std::string> out;
    if (j.contains(key)) {
      for (const auto& v : j.at(key)) {
        if (!v.is_string()) bad_document("cube " + cube.name + "." + key);
        out.push_back(v.get<std::string>());
      }
    }
    return out;
  };
  cube.included_roles = strings("included_roles");
  cube.included_measures = strings("included_measures");
  // An omitted list means "everything on the fact".
  for (const auto& f : facts) {
    if (!iequals(f.name, cube.fact)) continue;
    if (!j.contains("included_roles")) {
      for (const auto& r : f.roles) cube.included_roles.push_back(r.role_name);
    }
    if (!j.contains("included_measures")) {
      for (const auto& m : f.measures) cube.included_measures.push_back(m.name);
    }
  }
  return cube;
}

ErrorCode error_code_for(ViolationKind k) {
  switch (k) {
    case ViolationKind::DuplicateName: return ErrorCode::DuplicateName;
    case ViolationKind::UnknownReference: return ErrorCode::UnknownReference;
    case ViolationKind::EmptyHierarchy: return ErrorCode::EmptyHierarchy;
    case ViolationKind::MissingElement: return ErrorCode::InvalidDocument;
  }
  return ErrorCode::InvalidDocument;
}

}  // namespace

SchemaCatalog define_catalog(std::string_view document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    bad_document(e.what());
  }
  if (!j.is_object()) bad_document("top level must be an object");

  SchemaCatalog catalog;
  try {
    for (const auto& d : require_array(j, "dimensions", "catalog")) {
      catalog.dimensions.push_back(parse_dimension(d));
    }
    for (const auto& f : require_array(j, "facts", "catalog")) {
      catalog.facts.push_back(parse_fact(f));
    }
    if (j.contains("cubes")) {
      for (const auto& c : require_array(j, "cubes", "catalog")) {
        catalog.cubes.push_back(parse_cube(c, catalog.facts));
      }
    }
    if (j.contains("version")) catalog.version = j.at("version").get<int>();
  } catch (const json::exception& e) {
    bad_document(e.what());
  }

  auto violations = validate_catalog(catalog);
  if (!violations.empty()) {
    const auto& first = violations.front();
    std::string msg = std::string(to_string(first.kind)) + "(\"" + first.element +
                      "\"): " + first.detail;
    for (std::size_t i = 1; i < violations.size(); ++i) {
      msg += "; " + std::string(to_string(violations[i].kind)) + "(\"" +
             violations[i].element + "\")";
    }
    throw Error(error_code_for(first.kind), msg);
  }
  return catalog;
}

SchemaCatalog load_catalog_file(const std::string& path) {
  return define_catalog(csv::read_file(path));
}

std::string serialize_catalog(const SchemaCatalog& catalog) {
  json j;
  j["version"] = catalog.version;
  j["dimensions"] = json::array();
  for (const auto& dim : catalog.dimensions) {
    json d;
    d["name"] = dim.name;
    d["natural_key"] = dim.natural_key;
    if (dim.calendar) d["calendar"] = true;
    d["attributes"] = json::array();
    for (const auto& a : dim.attributes) {
      json ja{{"name", a.name}, {"kind", std::string(to_string(a.kind))}};
      if (!a.domain.empty()) ja["domain"] = a.domain;
      d["attributes"].push_back(std::move(ja));
    }
    d["hierarchies"] = json::array();
    for (const auto& h : dim.hierarchies) {
      json jh{{"name", h.name}, {"has_all", h.has_all}, {"levels", json::array()}};
      for (const auto& l : h.levels) {
        jh["levels"].push_back({{"name", l.name}, {"source_attribute", l.source_attribute}});
      }
      d["hierarchies"].push_back(std::move(jh));
    }
    d["scd_policy"] = json::object();
    for (const auto& [attr, type] : dim.scd_policy) {
      d["scd_policy"][attr] = std::string(to_string(type));
    }
    j["dimensions"].push_back(std::move(d));
  }
  j["facts"] = json::array();
  for (const auto& fact : catalog.facts) {
    json f{{"name", fact.name}, {"roles", json::array()}, {"measures", json::array()}};
    for (const auto& r : fact.roles) {
      f["roles"].push_back({{"role_name", r.role_name}, {"dimension_name", r.dimension_name}});
    }
    for (const auto& m : fact.measures) {
      f["measures"].push_back({{"name", m.name},
                               {"source_column", m.source_column},
                               {"aggregator", std::string(to_string(m.aggregator))},
                               {"kind", std::string(to_string(m.kind))}});
    }
    j["facts"].push_back(std::move(f));
  }
  j["cubes"] = json::array();
  for (const auto& c : catalog.cubes) {
    j["cubes"].push_back({{"name", c.name},
                          {"fact", c.fact},
                          {"included_roles", c.included_roles},
                          {"included_measures", c.included_measures}});
  }
  return j.dump(2) + "\n";
}

// ------------------------------------------------------------- reference

SchemaCatalog reference_schema() {
  SchemaCatalog c;

  DimensionDef patient;
  patient.name = "DimPatient";
  patient.natural_key = "patient_id";
  patient.attributes = {
      {"patient_id", ValueKind::String, {}},
      {"name", ValueKind::String, {}},
      {"gender", ValueKind::String, {"Female", "Male"}},
      {"age", ValueKind::Integer, {}},
      {"age_band", ValueKind::String, {"0-17", "18-39", "40-59", "60+"}},
      {"address", ValueKind::String, {}},
      {"phone", ValueKind::String, {}},
      {"hio_law", ValueKind::String,
       {"Decree 380/1997", "Law 23/2012", "Law 32/1975", "Law 79/1975", "Law 99/1992"}},
  };
  patient.hierarchies = {
      {"Gender", {{"Gender", "gender"}}, true},
      {"AgeBand", {{"AgeBand", "age_band"}}, true},
      {"HioLaw", {{"HioLaw", "hio_law"}}, true},
  };
  patient.scd_policy = {{"address", ScdType::Type2}, {"hio_law", ScdType::Type2}};

  DimensionDef procedure;
  procedure.name = "DimProcedure";
  procedure.natural_key = "procedure_id";
  procedure.attributes = {
      {"procedure_id", ValueKind::String, {}},
      {"procedure_name", ValueKind::String,
       {"Biopsy", "CT Scan", "Complete Blood Count", "Liver Function Test",
        "Mammography", "MRI Scan", "PET Scan", "Tumor Markers", "Ultrasound",
        "Urine Analysis", "X-Ray"}},
      {"procedure_type", ValueKind::String, {"medical tests", "rays"}},
  };
  procedure.hierarchies = {
      {"ByType",
       {{"ProcedureType", "procedure_type"}, {"Procedure", "procedure_name"}},
       true},
  };

  DimensionDef treatment;
  treatment.name = "DimTreatment";
  treatment.natural_key = "treatment_id";
  treatment.attributes = {
      {"treatment_id", ValueKind::String, {}},
      {"treatment_name", ValueKind::String, {}},
      {"treatment_kind", ValueKind::String,
       {"Chemotherapy", "Hormone Therapy", "Immunotherapy", "Radiotherapy", "Surgery"}},
      {"disease", ValueKind::String,
       {"Bladder Cancer", "Breast Cancer", "Leukemia", "Liver Cancer", "Lung Cancer",
        "Lymphoma"}},
  };
  treatment.hierarchies = {
      {"ByDisease",
       {{"Disease", "disease"},
        {"TreatmentKind", "treatment_kind"},
        {"Treatment", "treatment_name"}},
       true},
  };

  DimensionDef date;
  date.name = "DimDate";
  date.natural_key = "date";
  date.calendar = true;
  date.attributes = {
      {"date", ValueKind::Date, {}},
      {"year", ValueKind::Integer, {}},
      {"quarter", ValueKind::String, {}},
      {"month", ValueKind::Integer, {}},
      {"day", ValueKind::Integer, {}},
  };
  date.hierarchies = {
      {"Calendar",
       {{"Year", "year"}, {"Quarter", "quarter"}, {"Month", "month"}, {"Day", "date"}},
       true},
  };

  c.dimensions = {patient, procedure, treatment, date};

  FactDef fact;
  fact.name = "FactMedical";
  fact.roles = {
      {"PaID", "DimPatient"},         {"ProID", "DimProcedure"},
      {"TrID", "DimTreatment"},       {"DiagnoseDate", "DimDate"},
      {"ProcedureDate", "DimDate"},   {"TreatmentDate", "DimDate"},
  };
  fact.measures = {
      {"Cost", "Cost", Aggregator::Sum, ValueKind::Decimal},
      {"Quantity", "Quantity", Aggregator::Sum, ValueKind::Integer},
  };
  c.facts = {fact};

  CubeDef cube;
  cube.name = "Cancer";
  cube.fact = "FactMedical";
  for (const auto& r : fact.roles) cube.included_roles.push_back(r.role_name);
  for (const auto& m : fact.measures) cube.included_measures.push_back(m.name);
  c.cubes = {cube};
  return c;
}

}  // namespace starcube::schema
