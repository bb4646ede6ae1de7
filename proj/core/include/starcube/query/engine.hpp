#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "starcube/cube/cube.hpp"
#include "starcube/query/mdx.hpp"

namespace starcube::query {

inline constexpr std::size_t kMeasuresRole = std::numeric_limits<std::size_t>::max();

// One coordinate component: a member of (role, hierarchy), or a measure when
// role == kMeasuresRole (member is then the measure index).
struct BoundMember {
  std::size_t role = 0;
  std::size_t hierarchy = 0;
  cube::MemberId member = cube::kNoMember;

  bool is_measure() const { return role == kMeasuresRole; }
  friend bool operator==(const BoundMember&, const BoundMember&) = default;
};

using BoundTuple = std::vector<BoundMember>;

struct BoundAxis {
  AxisName name = AxisName::Columns;
  bool non_empty = false;
  std::vector<BoundTuple> tuples;
};

struct BoundQuery {
  std::shared_ptr<const cube::Cube> cube;
  std::int64_t build_stamp = 0;
  std::vector<BoundAxis> axes;  // columns first, then rows
  BoundTuple slicer;
  std::vector<std::size_t> measures;  // cube measure indexes the cells use
  std::size_t default_measure = 0;
};

// Resolves names against `cube`. Throws UnknownCube (name mismatch),
// UnknownRole, UnknownHierarchy, UnknownLevel, UnknownMember, AmbiguousPath,
// NonUniformSet, HierarchyReusedAcrossAxes.
BoundQuery bind(const QueryAst& ast, std::shared_ptr<const cube::Cube> cube);

struct PositionMember {
  std::string caption;
  std::string unique_name;
  friend bool operator==(const PositionMember&, const PositionMember&) = default;
};
using Position = std::vector<PositionMember>;

struct Cell {
  std::size_t measure = 0;  // index into CellSet::measures
  cube::CellValue value;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Cells are row-major with axis 1 (rows) outer. A single-axis result has one
// implicit row.
struct CellSet {
  std::vector<std::vector<Position>> axes;
  std::vector<std::string> measures;
  std::vector<Cell> cells;
  std::int64_t build_stamp = 0;

  std::size_t columns() const { return axes.empty() ? 1 : axes[0].size(); }
  std::size_t rows() const { return axes.size() < 2 ? 1 : axes[1].size(); }
  const Cell& at(std::size_t row, std::size_t column) const {
    return cells.at(row * columns() + column);
  }
  friend bool operator==(const CellSet&, const CellSet&) = default;
};

struct EvaluateOptions {
  std::size_t max_cells = 100000;
  // When set, evaluation fails with StaleCube unless the cube matches.
  std::optional<std::int64_t> expected_build_stamp;
};

// Throws StaleCube when `cube` is not the cube `bound` was bound against, and
// ResultTooLarge past max_cells.
CellSet evaluate(const BoundQuery& bound, const cube::Cube& cube,
                 const EvaluateOptions& options = {});

// tokenize -> parse -> bind -> evaluate.
CellSet execute(std::string_view mdx, std::shared_ptr<const cube::Cube> cube,
                const EvaluateOptions& options = {});

enum class Format { Table, Csv, Json };

std::optional<Format> parse_format(std::string_view text);
std::string_view to_string(Format format);

// csv: header row of column captions then one row per row position, members
// of a tuple joined by " | "; table: aligned grid; json: the HTTP wire schema.
// Empty cells are "" in csv/table and null in json.
std::string format_cellset(const CellSet& cs, Format format);

}  // namespace starcube::query
