#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "starcube/value.hpp"

namespace starcube::schema {

enum class ScdType { Type1, Type2 };
enum class Aggregator { Sum, Count, Min, Max, Avg };

std::string_view to_string(ScdType t);
std::string_view to_string(Aggregator a);
std::optional<Aggregator> parse_aggregator(std::string_view text);

struct AttributeDef {
  std::string name;
  ValueKind kind = ValueKind::String;
  // Canonical values, when the attribute is categorical. Fuzzy lookup uses
  // them as the reference set before the dimension holds any rows.
  std::vector<std::string> domain;

  friend bool operator==(const AttributeDef&, const AttributeDef&) = default;
};

struct LevelDef {
  std::string name;
  std::string source_attribute;

  friend bool operator==(const LevelDef&, const LevelDef&) = default;
};

// Levels are ordered coarsest first; an implicit "All" level sits above
// levels[0].
struct HierarchyDef {
  std::string name;
  std::vector<LevelDef> levels;
  bool has_all = true;

  const LevelDef* find_level(std::string_view level_name) const;
  std::optional<std::size_t> level_index(std::string_view level_name) const;

  friend bool operator==(const HierarchyDef&, const HierarchyDef&) = default;
};

struct DimensionDef {
  std::string name;
  std::string natural_key;
  std::vector<AttributeDef> attributes;
  std::vector<HierarchyDef> hierarchies;
  std::map<std::string, ScdType> scd_policy;  // absent attribute = Type1
  // Calendar dimensions are generated from the dates facts reference rather
  // than loaded from a source.
  bool calendar = false;

  const AttributeDef* find_attribute(std::string_view attr) const;
  std::optional<std::size_t> attribute_index(std::string_view attr) const;
  const HierarchyDef* find_hierarchy(std::string_view hierarchy) const;
  std::optional<std::size_t> hierarchy_index(std::string_view hierarchy) const;
  ScdType scd_type(std::string_view attr) const;
  bool has_type2() const;

  friend bool operator==(const DimensionDef&, const DimensionDef&) = default;
};

struct RoleDef {
  std::string role_name;
  std::string dimension_name;

  friend bool operator==(const RoleDef&, const RoleDef&) = default;
};

// AVG is never stored: it is computed as SUM/COUNT when a cell is read.
struct MeasureDef {
  std::string name;
  std::string source_column;
  Aggregator aggregator = Aggregator::Sum;
  ValueKind kind = ValueKind::Decimal;

  friend bool operator==(const MeasureDef&, const MeasureDef&) = default;
};

struct FactDef {
  std::string name;
  std::vector<RoleDef> roles;
  std::vector<MeasureDef> measures;

  const RoleDef* find_role(std::string_view role) const;
  std::optional<std::size_t> role_index(std::string_view role) const;
  const MeasureDef* find_measure(std::string_view measure) const;
  std::optional<std::size_t> measure_index(std::string_view measure) const;

  friend bool operator==(const FactDef&, const FactDef&) = default;
};

struct CubeDef {
  std::string name;
  std::string fact;
  std::vector<std::string> included_roles;
  std::vector<std::string> included_measures;

  friend bool operator==(const CubeDef&, const CubeDef&) = default;
};

struct SchemaCatalog {
  std::vector<DimensionDef> dimensions;
  std::vector<FactDef> facts;
  std::vector<CubeDef> cubes;
  int version = 1;

  const DimensionDef* find_dimension(std::string_view name) const;
  const FactDef* find_fact(std::string_view name) const;
  const CubeDef* find_cube(std::string_view name) const;

  friend bool operator==(const SchemaCatalog&, const SchemaCatalog&) = default;
};

enum class ViolationKind {
  DuplicateName,
  UnknownReference,
  EmptyHierarchy,
  MissingElement,
};

std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::string element;  // the offending name
  std::string detail;   // where it was found

  friend bool operator==(const Violation&, const Violation&) = default;
};

// Every invariant violation, ordered by element name.
std::vector<Violation> validate_catalog(const SchemaCatalog& catalog);

// Parses a catalog JSON document and validates it. Throws starcube::Error:
// InvalidDocument for malformed input, otherwise the code of the first
// violation (DuplicateName, UnknownReference, EmptyHierarchy).
SchemaCatalog define_catalog(std::string_view document);
SchemaCatalog load_catalog_file(const std::string& path);

std::string serialize_catalog(const SchemaCatalog& catalog);

// The cancer-registry warehouse: FactMedical with DimPatient, DimProcedure,
// DimTreatment and a role-playing DimDate.
SchemaCatalog reference_schema();

}  // namespace starcube::schema
