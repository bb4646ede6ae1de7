#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "starcube/etl/warehouse.hpp"
#include "starcube/schema/catalog.hpp"
#include "starcube/value.hpp"

namespace starcube::cube {

using MemberId = std::int32_t;
inline constexpr MemberId kNoMember = -1;

// Level 0 is "All". Children of one parent have consecutive ids and members
// of one level are contiguous, both in display order.
struct Member {
  MemberId id = kNoMember;
  int level = 0;
  MemberId parent = kNoMember;
  Value key;  // null for All and Unknown
  std::string caption;
  int ordinal = 0;  // position among siblings
  bool unknown = false;
  MemberId first_child = kNoMember;
  std::int32_t child_count = 0;
};

class Hierarchy {
 public:
  const std::string& name() const { return name_; }
  const std::string& role() const { return role_; }
  bool has_all() const { return has_all_; }

  // Level count including All.
  int level_count() const { return static_cast<int>(level_names_.size()); }
  const std::string& level_name(int level) const { return level_names_.at(level); }
  const std::string& level_attribute(int level) const { return level_attributes_.at(level); }
  std::optional<int> level_index(std::string_view name) const;

  std::size_t member_count() const { return members_.size(); }
  const Member& member(MemberId id) const;
  MemberId all() const { return 0; }
  std::span<const Member> level_members(int level) const;
  std::span<const Member> children(MemberId id) const;
  bool is_ancestor_or_self(MemberId ancestor, MemberId member) const;

  // [Role].[Hierarchy].[k1].[k2]... with "]" doubled; [..].[All] for the root.
  std::string unique_name(MemberId id) const;

  // Member at `level` for a dimension row index; the Unknown row is
  // rows().size() of the dimension table.
  MemberId ancestor(std::size_t dim_row, int level) const {
    return ancestors_[dim_row * static_cast<std::size_t>(level_count()) +
                      static_cast<std::size_t>(level)];
  }

 private:
  friend class CubeBuilder;

  std::string name_;
  std::string role_;
  bool has_all_ = true;
  std::vector<std::string> level_names_;
  std::vector<std::string> level_attributes_;
  std::vector<Member> members_;
  std::vector<MemberId> level_begin_;  // level_count()+1 offsets into members_
  std::vector<MemberId> ancestors_;    // (dim rows + 1) x level_count()
};

struct Role {
  std::string name;
  std::string dimension;
  std::size_t fact_role = 0;  // index into FactDef::roles
  std::size_t dimension_rows = 0;
  std::vector<Hierarchy> hierarchies;

  std::optional<std::size_t> hierarchy_index(std::string_view name) const;
};

struct MeasureInfo {
  std::string name;
  schema::Aggregator aggregator = schema::Aggregator::Sum;
  ValueKind kind = ValueKind::Decimal;  // kind of the source column
  std::size_t fact_measure = 0;
};

// A measure value of one cell. Empty means no contributing fact rows and is
// distinct from zero.
class CellValue {
 public:
  using Storage = std::variant<std::monostate, std::int64_t, Decimal, double>;

  CellValue() = default;
  explicit CellValue(Storage v) : v_(v) {}

  bool empty() const { return std::holds_alternative<std::monostate>(v_); }
  const Storage& storage() const { return v_; }
  double to_double() const;
  // Integers and decimals exactly; doubles in shortest round-trip form.
  std::string to_string() const;

  friend bool operator==(const CellValue&, const CellValue&) = default;

 private:
  Storage v_;
};

struct LevelRef {
  std::size_t role = 0;
  std::size_t hierarchy = 0;
  int level = 0;

  friend bool operator==(const LevelRef&, const LevelRef&) = default;
};

// Keeps facts whose member in this hierarchy descends from (or is) any of
// `members`. Several constraints combine with AND.
struct MemberFilter {
  std::size_t role = 0;
  std::size_t hierarchy = 0;
  std::vector<MemberId> members;
};

class AggregateResult {
 public:
  const std::vector<LevelRef>& group_by() const { return group_by_; }
  std::size_t size() const { return counts_.size(); }
  std::size_t arity() const { return group_by_.size(); }

  std::span<const MemberId> coordinate(std::size_t cell) const {
    return {coords_.data() + cell * arity(), arity()};
  }
  std::optional<std::size_t> find(std::span<const MemberId> coordinate) const;

  std::int64_t count(std::size_t cell) const { return counts_[cell]; }
  CellValue value(std::size_t cell, std::size_t measure) const;
  // Empty when the coordinate has no facts.
  CellValue value_at(std::span<const MemberId> coordinate, std::size_t measure) const;

 private:
  friend class Cube;

  std::vector<LevelRef> group_by_;
  std::vector<MeasureInfo> measures_;
  std::vector<MemberId> coords_;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> sums_;  // cell x measure
  std::vector<std::int64_t> mins_;
  std::vector<std::int64_t> maxs_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct BuildStats {
  std::size_t fact_rows = 0;
  std::size_t base_cells = 0;
  double build_millis = 0.0;
};

class Cube {
 public:
  const schema::CubeDef& def() const { return def_; }
  const std::string& name() const { return def_.name; }
  std::int64_t build_stamp() const { return build_stamp_; }
  const BuildStats& stats() const { return stats_; }

  const std::vector<Role>& roles() const { return roles_; }
  const std::vector<MeasureInfo>& measures() const { return measures_; }
  std::optional<std::size_t> role_index(std::string_view name) const;
  std::optional<std::size_t> measure_index(std::string_view name) const;
  const Hierarchy& hierarchy(std::size_t role, std::size_t hierarchy) const {
    return roles_.at(role).hierarchies.at(hierarchy);
  }

  std::size_t base_cell_count() const { return base_counts_.size(); }
  std::int64_t base_cell_fact_count(std::size_t cell) const { return base_counts_[cell]; }

  // Group-by/filter aggregation over the base cells, memoized by signature.
  // At most one hierarchy per role may appear across group_by and filters.
  // Throws UnknownLevel / UnknownMember for out-of-range references.
  std::shared_ptr<const AggregateResult> aggregate(const std::vector<LevelRef>& group_by,
                                                   const std::vector<MemberFilter>& filters) const;

  void clear_cache() const;
  std::size_t cache_size() const;

 private:
  friend class CubeBuilder;

  std::shared_ptr<const AggregateResult> compute(const std::vector<LevelRef>& group_by,
                                                 const std::vector<MemberFilter>& filters) const;

  schema::CubeDef def_;
  std::int64_t build_stamp_ = 0;
  BuildStats stats_;
  std::vector<Role> roles_;
  std::vector<MeasureInfo> measures_;

  // Base cells: one per distinct tuple of dimension rows (one per role).
  std::vector<std::vector<std::int32_t>> base_rows_;  // role x cell
  std::vector<std::int64_t> base_counts_;
  std::vector<std::vector<std::int64_t>> base_sums_;  // measure x cell
  std::vector<std::vector<std::int64_t>> base_mins_;
  std::vector<std::vector<std::int64_t>> base_maxs_;

  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, std::shared_ptr<const AggregateResult>> cache_;
};

// Throws UnknownCube, OrphanFactRow.
std::shared_ptr<const Cube> build_cube(const etl::Warehouse& warehouse, std::string_view cube_name);

// Published cubes by name. Readers take a snapshot pointer and keep using it
// while a rebuild is swapped in.
class CubeRegistry {
 public:
  std::shared_ptr<const Cube> get(std::string_view name) const;
  std::vector<std::string> names() const;
  void publish(std::shared_ptr<const Cube> cube);
  void clear();

  // Rebuilds `name` from `warehouse` when its build stamp differs from the
  // warehouse version; otherwise returns the published cube unchanged.
  std::shared_ptr<const Cube> invalidate(const etl::Warehouse& warehouse, std::string_view name);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const Cube>> cubes_;  // casefolded name
};

}  // namespace starcube::cube
