#include "starcube/cube/cube.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstring>
#include <limits>
#include <numeric>

#include "starcube/error.hpp"

namespace starcube::cube {

namespace {

std::string bracket(std::string_view s) {
  std::string out = "[";
  for (char c : s) {
    out += c;
    if (c == ']') out += ']';
  }
  out += ']';
  return out;
}

std::string coordinate_key(std::span<const MemberId> coord) {
  std::string key(coord.size() * sizeof(MemberId), '\0');
  if (!coord.empty()) std::memcpy(key.data(), coord.data(), key.size());
  return key;
}

CellValue typed(std::int64_t raw, ValueKind kind) {
  if (kind == ValueKind::Decimal) return CellValue{Decimal::from_raw(raw)};
  return CellValue{raw};
}

}  // namespace

// ------------------------------------------------------------------ Hierarchy

std::optional<int> Hierarchy::level_index(std::string_view name) const {
  for (int i = 0; i < level_count(); ++i) {
    if (iequals(level_names_[i], name)) return i;
  }
  return std::nullopt;
}

const Member& Hierarchy::member(MemberId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= members_.size()) {
    throw Error(ErrorCode::UnknownMember,
                "member id " + std::to_string(id) + " is not in hierarchy " + name_);
  }
  return members_[static_cast<std::size_t>(id)];
}

std::span<const Member> Hierarchy::level_members(int level) const {
  if (level < 0 || level >= level_count()) {
    throw Error(ErrorCode::UnknownLevel,
                "hierarchy " + name_ + " has no level " + std::to_string(level));
  }
  auto b = static_cast<std::size_t>(level_begin_[level]);
  auto e = static_cast<std::size_t>(level_begin_[level + 1]);
  return {members_.data() + b, e - b};
}

std::span<const Member> Hierarchy::children(MemberId id) const {
  const auto& m = member(id);
  if (m.child_count == 0) return {};
  return {members_.data() + m.first_child, static_cast<std::size_t>(m.child_count)};
}

bool Hierarchy::is_ancestor_or_self(MemberId ancestor, MemberId id) const {
  while (id != kNoMember) {
    if (id == ancestor) return true;
    id = member(id).parent;
  }
  return false;
}

std::string Hierarchy::unique_name(MemberId id) const {
  std::vector<const Member*> chain;
  for (MemberId cur = id; cur > 0; cur = member(cur).parent) chain.push_back(&member(cur));
  std::string out = bracket(role_) + "." + bracket(name_);
  if (chain.empty()) return out + ".[All]";
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    out += "." + bracket((*it)->unknown ? "Unknown" : (*it)->key.to_string());
  }
  return out;
}

std::optional<std::size_t> Role::hierarchy_index(std::string_view n) const {
  for (std::size_t i = 0; i < hierarchies.size(); ++i) {
    if (iequals(hierarchies[i].name(), n)) return i;
  }
  return std::nullopt;
}

// ------------------------------------------------------------------ CellValue

double CellValue::to_double() const {
  if (auto i = std::get_if<std::int64_t>(&v_)) return static_cast<double>(*i);
  if (auto d = std::get_if<Decimal>(&v_)) return d->to_double();
  if (auto f = std::get_if<double>(&v_)) return *f;
  return 0.0;
}

std::string CellValue::to_string() const {
  if (auto i = std::get_if<std::int64_t>(&v_)) return std::to_string(*i);
  if (auto d = std::get_if<Decimal>(&v_)) return d->to_string();
  if (auto f = std::get_if<double>(&v_)) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, *f);
    return std::string(buf, r.ptr);
  }
  return "";
}

// ------------------------------------------------------------------ AggregateResult

std::optional<std::size_t> AggregateResult::find(std::span<const MemberId> coordinate) const {
  auto it = index_.find(coordinate_key(coordinate));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

CellValue AggregateResult::value(std::size_t cell, std::size_t measure) const {
  const auto& m = measures_.at(measure);
  const std::int64_t n = counts_[cell];
  if (n == 0) return {};
  const std::size_t i = cell * measures_.size() + measure;
  switch (m.aggregator) {
    case schema::Aggregator::Sum:
      return typed(sums_[i], m.kind);
    case schema::Aggregator::Count:
      return CellValue{n};
    case schema::Aggregator::Min:
      return typed(mins_[i], m.kind);
    case schema::Aggregator::Max:
      return typed(maxs_[i], m.kind);
    case schema::Aggregator::Avg: {
      double avg = static_cast<double>(sums_[i]) / static_cast<double>(n);
      if (m.kind == ValueKind::Decimal) avg /= static_cast<double>(Decimal::kScale);
      return CellValue{avg};
    }
  }
  return {};
}

CellValue AggregateResult::value_at(std::span<const MemberId> coordinate,
                                    std::size_t measure) const {
  auto cell = find(coordinate);
  if (!cell) return {};
  return value(*cell, measure);
}

// ------------------------------------------------------------------ Cube

std::optional<std::size_t> Cube::role_index(std::string_view n) const {
  for (std::size_t i = 0; i < roles_.size(); ++i) {
    if (iequals(roles_[i].name, n)) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Cube::measure_index(std::string_view n) const {
  for (std::size_t i = 0; i < measures_.size(); ++i) {
    if (iequals(measures_[i].name, n)) return i;
  }
  return std::nullopt;
}

void Cube::clear_cache() const {
  std::lock_guard lock(cache_mutex_);
  cache_.clear();
}

std::size_t Cube::cache_size() const {
  std::lock_guard lock(cache_mutex_);
  return cache_.size();
}

std::shared_ptr<const AggregateResult> Cube::aggregate(
    const std::vector<LevelRef>& group_by, const std::vector<MemberFilter>& filters) const {
  std::vector<std::optional<std::size_t>> hierarchy_of_role(roles_.size());
  auto claim = [&](std::size_t role, std::size_t hierarchy) {
    if (role >= roles_.size()) {
      throw Error(ErrorCode::UnknownRole, "cube " + name() + " has no role #" + std::to_string(role));
    }
    if (hierarchy >= roles_[role].hierarchies.size()) {
      throw Error(ErrorCode::UnknownHierarchy,
                  "role " + roles_[role].name + " has no hierarchy #" + std::to_string(hierarchy));
    }
    auto& h = hierarchy_of_role[role];
    if (h && *h != hierarchy) {
      throw Error(ErrorCode::HierarchyReusedAcrossAxes,
                  "role " + roles_[role].name + " is used through two hierarchies");
    }
    h = hierarchy;
  };

  std::string signature = "G";
  for (const auto& g : group_by) {
    claim(g.role, g.hierarchy);
    const auto& h = hierarchy(g.role, g.hierarchy);
    if (g.level < 0 || g.level >= h.level_count()) {
      throw Error(ErrorCode::UnknownLevel,
                  "hierarchy " + h.name() + " has no level #" + std::to_string(g.level));
    }
    signature += std::to_string(g.role) + "." + std::to_string(g.hierarchy) + "." +
                 std::to_string(g.level) + ";";
  }
  std::vector<std::string> filter_sigs;
  for (const auto& f : filters) {
    claim(f.role, f.hierarchy);
    const auto& h = hierarchy(f.role, f.hierarchy);
    auto members = f.members;
    for (auto m : members) h.member(m);
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    std::string s = std::to_string(f.role) + "." + std::to_string(f.hierarchy) + ":";
    for (auto m : members) s += std::to_string(m) + ",";
    filter_sigs.push_back(std::move(s));
  }
  std::sort(filter_sigs.begin(), filter_sigs.end());
  signature += "F";
  for (const auto& s : filter_sigs) signature += s + ";";

  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(signature);
    if (it != cache_.end()) return it->second;
  }
  auto result = compute(group_by, filters);
  std::lock_guard lock(cache_mutex_);
  return cache_.emplace(signature, std::move(result)).first->second;
}

std::shared_ptr<const AggregateResult> Cube::compute(
    const std::vector<LevelRef>& group_by, const std::vector<MemberFilter>& filters) const {
  const std::size_t cells = base_counts_.size();
  const std::size_t nm = measures_.size();

  // Row masks per role: dimension row -> passes every filter on that role.
  std::vector<std::vector<std::uint8_t>> masks(roles_.size());
  for (const auto& f : filters) {
    const auto& role = roles_[f.role];
    const auto& h = role.hierarchies[f.hierarchy];
    auto& mask = masks[f.role];
    if (mask.empty()) mask.assign(role.dimension_rows + 1, 1);
    for (std::size_t r = 0; r <= role.dimension_rows; ++r) {
      if (!mask[r]) continue;
      bool hit = std::any_of(f.members.begin(), f.members.end(), [&](MemberId m) {
        return h.ancestor(r, h.member(m).level) == m;
      });
      if (!hit) mask[r] = 0;
    }
  }
  std::vector<std::size_t> masked_roles;
  for (std::size_t r = 0; r < masks.size(); ++r) {
    if (!masks[r].empty()) masked_roles.push_back(r);
  }

  // Dimension row -> position of its member within the grouped level.
  std::vector<std::vector<std::int32_t>> local(group_by.size());
  std::vector<std::uint64_t> radix(group_by.size());
  std::vector<MemberId> level_first(group_by.size());
  bool fits = true;
  std::uint64_t product = 1;
  for (std::size_t g = 0; g < group_by.size(); ++g) {
    const auto& ref = group_by[g];
    const auto& role = roles_[ref.role];
    const auto& h = role.hierarchies[ref.hierarchy];
    auto level = h.level_members(ref.level);
    level_first[g] = level.empty() ? 0 : level.front().id;
    radix[g] = level.size();
    local[g].resize(role.dimension_rows + 1);
    for (std::size_t r = 0; r <= role.dimension_rows; ++r) {
      local[g][r] = h.ancestor(r, ref.level) - level_first[g];
    }
    if (radix[g] > 0 && product > std::numeric_limits<std::uint64_t>::max() / 2 / radix[g]) {
      fits = false;
    }
    product *= radix[g];
  }

  auto out = std::make_shared<AggregateResult>();
  out->group_by_ = group_by;
  out->measures_ = measures_;

  constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 22;
  const bool dense = fits && product <= kDenseLimit;
  std::vector<std::int32_t> dense_slot(dense ? product : 0, -1);
  std::unordered_map<std::uint64_t, std::int32_t> sparse_slot;
  std::unordered_map<std::string, std::int32_t> wide_slot;
  std::vector<MemberId> coord(group_by.size());

  auto new_slot = [&]() {
    auto slot = static_cast<std::int32_t>(out->counts_.size());
    for (std::size_t g = 0; g < group_by.size(); ++g) {
      out->coords_.push_back(coord[g] + level_first[g]);
    }
    out->counts_.push_back(0);
    out->sums_.resize(out->sums_.size() + nm, 0);
    out->mins_.resize(out->mins_.size() + nm, std::numeric_limits<std::int64_t>::max());
    out->maxs_.resize(out->maxs_.size() + nm, std::numeric_limits<std::int64_t>::min());
    return slot;
  };

  for (std::size_t c = 0; c < cells; ++c) {
    bool pass = true;
    for (auto r : masked_roles) {
      if (!masks[r][static_cast<std::size_t>(base_rows_[r][c])]) {
        pass = false;
        break;
      }
    }
    if (!pass) continue;
    std::uint64_t code = 0;
    for (std::size_t g = 0; g < group_by.size(); ++g) {
      coord[g] = local[g][static_cast<std::size_t>(base_rows_[group_by[g].role][c])];
      code = code * radix[g] + static_cast<std::uint64_t>(coord[g]);
    }
    std::int32_t slot;
    if (dense) {
      slot = dense_slot[code];
      if (slot < 0) slot = dense_slot[code] = new_slot();
    } else if (fits) {
      auto [it, inserted] = sparse_slot.try_emplace(code, 0);
      if (inserted) it->second = new_slot();
      slot = it->second;
    } else {
      auto [it, inserted] = wide_slot.try_emplace(coordinate_key(coord), 0);
      if (inserted) it->second = new_slot();
      slot = it->second;
    }
    const auto s = static_cast<std::size_t>(slot);
    out->counts_[s] += base_counts_[c];
    for (std::size_t m = 0; m < nm; ++m) {
      const std::size_t i = s * nm + m;
      out->sums_[i] += base_sums_[m][c];
      out->mins_[i] = std::min(out->mins_[i], base_mins_[m][c]);
      out->maxs_[i] = std::max(out->maxs_[i], base_maxs_[m][c]);
    }
  }

  out->index_.reserve(out->counts_.size());
  for (std::size_t cell = 0; cell < out->counts_.size(); ++cell) {
    out->index_.emplace(coordinate_key(out->coordinate(cell)), cell);
  }
  return out;
}

// ------------------------------------------------------------------ build

class CubeBuilder {
 public:
  static Hierarchy build_hierarchy(const std::string& role, const schema::HierarchyDef& def,
                                   const etl::DimensionTable& table, bool with_unknown);
  static std::shared_ptr<const Cube> build(const etl::Warehouse& warehouse,
                                           std::string_view cube_name);
};

Hierarchy CubeBuilder::build_hierarchy(const std::string& role, const schema::HierarchyDef& def,
                                       const etl::DimensionTable& table, bool with_unknown) {
  Hierarchy h;
  h.name_ = def.name;
  h.role_ = role;
  h.has_all_ = def.has_all;
  h.level_names_.push_back("All");
  h.level_attributes_.push_back("");
  std::vector<std::size_t> attr;
  for (const auto& level : def.levels) {
    h.level_names_.push_back(level.name);
    h.level_attributes_.push_back(level.source_attribute);
    attr.push_back(*table.def().attribute_index(level.source_attribute));
  }
  const std::size_t levels = h.level_names_.size();
  const std::size_t rows = table.rows().size();

  struct Node {
    int level;
    int parent;
    Value key;
    bool unknown;
    std::vector<int> children;
  };
  std::vector<Node> nodes;
  nodes.push_back({0, -1, Value{}, false, {}});
  std::unordered_map<std::string, int> lookup;
  auto child_of = [&](int parent, const Value& key, bool unknown) {
    std::string k = std::to_string(parent) + '\x1f' + (unknown ? 'U' : 'V') +
                    std::to_string(key.storage().index()) + '\x1f' + key.to_string();
    auto [it, inserted] = lookup.try_emplace(std::move(k), 0);
    if (inserted) {
      it->second = static_cast<int>(nodes.size());
      const int level = nodes[static_cast<std::size_t>(parent)].level + 1;
      nodes.push_back({level, parent, key, unknown, {}});
      nodes[static_cast<std::size_t>(parent)].children.push_back(it->second);
    }
    return it->second;
  };

  std::vector<int> anc((rows + 1) * levels, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    int cur = 0;
    for (std::size_t l = 1; l < levels; ++l) {
      cur = child_of(cur, table.rows()[r].attributes[attr[l - 1]], false);
      anc[r * levels + l] = cur;
    }
  }
  if (with_unknown) {
    int cur = 0;
    for (std::size_t l = 1; l < levels; ++l) {
      cur = child_of(cur, Value{}, true);
      anc[rows * levels + l] = cur;
    }
  }

  // Breadth-first renumbering with sorted siblings: each level and each
  // sibling group becomes a contiguous id range in display order.
  std::vector<int> order{0};
  std::vector<MemberId> new_id(nodes.size(), kNoMember);
  new_id[0] = 0;
  h.members_.push_back(Member{0, 0, kNoMember, Value{}, "All", 0, false, kNoMember, 0});
  h.level_begin_.assign(levels + 1, 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& node = nodes[static_cast<std::size_t>(order[i])];
    std::sort(node.children.begin(), node.children.end(), [&](int a, int b) {
      const auto& na = nodes[static_cast<std::size_t>(a)];
      const auto& nb = nodes[static_cast<std::size_t>(b)];
      if (na.unknown != nb.unknown) return nb.unknown;
      return compare_values(na.key, nb.key) < 0;
    });
    auto& parent = h.members_[static_cast<std::size_t>(new_id[static_cast<std::size_t>(order[i])])];
    parent.first_child = node.children.empty() ? kNoMember
                                               : static_cast<MemberId>(h.members_.size());
    parent.child_count = static_cast<std::int32_t>(node.children.size());
    const MemberId parent_id = parent.id;
    int ordinal = 0;
    for (int c : node.children) {
      const auto& child = nodes[static_cast<std::size_t>(c)];
      Member m;
      m.id = static_cast<MemberId>(h.members_.size());
      m.level = child.level;
      m.parent = parent_id;
      m.key = child.key;
      m.unknown = child.unknown;
      m.caption = child.unknown ? "Unknown" : child.key.is_null() ? "(blank)" : child.key.to_string();
      m.ordinal = ordinal++;
      new_id[static_cast<std::size_t>(c)] = m.id;
      h.members_.push_back(std::move(m));
      order.push_back(c);
    }
  }
  for (std::size_t l = 0; l <= levels; ++l) {
    auto it = std::find_if(h.members_.begin(), h.members_.end(),
                           [&](const Member& m) { return static_cast<std::size_t>(m.level) >= l; });
    h.level_begin_[l] = static_cast<MemberId>(it - h.members_.begin());
  }
  h.ancestors_.resize(anc.size());
  for (std::size_t i = 0; i < anc.size(); ++i) {
    h.ancestors_[i] = new_id[static_cast<std::size_t>(anc[i])];
  }
  return h;
}

std::shared_ptr<const Cube> CubeBuilder::build(const etl::Warehouse& warehouse,
                                               std::string_view cube_name) {
  const auto started = std::chrono::steady_clock::now();
  const auto& catalog = warehouse.catalog();
  const auto* def = catalog.find_cube(cube_name);
  if (!def) throw Error(ErrorCode::UnknownCube, "unknown cube \"" + std::string(cube_name) + "\"");
  const auto* fact_def = catalog.find_fact(def->fact);
  const auto& facts = warehouse.fact(fact_def->name);
  const std::size_t n = facts.size();

  auto cube = std::make_shared<Cube>();
  cube->def_ = *def;
  cube->build_stamp_ = warehouse.version();

  // Resolve every fact's surrogate keys to dimension row indexes.
  std::vector<std::vector<std::int32_t>> fact_rows;
  std::vector<const etl::DimensionTable*> tables;
  std::vector<bool> needs_unknown;
  for (const auto& role_name : def->included_roles) {
    const auto fr = *fact_def->role_index(role_name);
    const auto& role_def = fact_def->roles[fr];
    const auto& table = warehouse.dimension(role_def.dimension_name);
    Role role;
    role.name = role_def.role_name;
    role.dimension = table.def().name;
    role.fact_role = fr;
    role.dimension_rows = table.rows().size();
    std::unordered_map<std::int64_t, std::int32_t> row_of;
    row_of.reserve(table.rows().size());
    for (std::size_t r = 0; r < table.rows().size(); ++r) {
      row_of.emplace(table.rows()[r].surrogate_key, static_cast<std::int32_t>(r));
    }
    const auto unknown_row = static_cast<std::int32_t>(table.rows().size());
    std::vector<std::int32_t> rows(n);
    bool unknown = false;
    const auto& keys = facts.fk_column(fr);
    for (std::size_t f = 0; f < n; ++f) {
      if (keys[f] == etl::kUnknownKey) {
        rows[f] = unknown_row;
        unknown = true;
        continue;
      }
      auto it = row_of.find(keys[f]);
      if (it == row_of.end()) {
        throw Error(ErrorCode::OrphanFactRow,
                    fact_def->name + " row " + std::to_string(f + 1) + ": " + role.name +
                        " references missing surrogate key " + std::to_string(keys[f]) +
                        " of " + role.dimension);
      }
      rows[f] = it->second;
    }
    fact_rows.push_back(std::move(rows));
    tables.push_back(&table);
    needs_unknown.push_back(unknown);
    cube->roles_.push_back(std::move(role));
  }
  for (std::size_t r = 0; r < cube->roles_.size(); ++r) {
    for (const auto& hdef : tables[r]->def().hierarchies) {
      cube->roles_[r].hierarchies.push_back(
          build_hierarchy(cube->roles_[r].name, hdef, *tables[r], needs_unknown[r]));
    }
  }
  for (const auto& mname : def->included_measures) {
    const auto mi = *fact_def->measure_index(mname);
    const auto& m = fact_def->measures[mi];
    cube->measures_.push_back({m.name, m.aggregator, m.kind, mi});
  }

  // Base cells: facts sorted by their dimension-row tuple, equal tuples folded.
  const std::size_t nr = fact_rows.size();
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::sort(perm.begin(), perm.end(), [&](std::uint32_t a, std::uint32_t b) {
    for (std::size_t r = 0; r < nr; ++r) {
      if (fact_rows[r][a] != fact_rows[r][b]) return fact_rows[r][a] < fact_rows[r][b];
    }
    return a < b;
  });
  const std::size_t nm = cube->measures_.size();
  cube->base_rows_.assign(nr, {});
  cube->base_sums_.assign(nm, {});
  cube->base_mins_.assign(nm, {});
  cube->base_maxs_.assign(nm, {});
  std::vector<const std::vector<std::int64_t>*> columns;
  for (const auto& m : cube->measures_) columns.push_back(&facts.measure_column(m.fact_measure));
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = perm[i];
    bool same = i > 0 && std::all_of(fact_rows.begin(), fact_rows.end(), [&](const auto& col) {
      return col[f] == col[perm[i - 1]];
    });
    if (!same) {
      for (std::size_t r = 0; r < nr; ++r) cube->base_rows_[r].push_back(fact_rows[r][f]);
      cube->base_counts_.push_back(0);
      for (std::size_t m = 0; m < nm; ++m) {
        cube->base_sums_[m].push_back(0);
        cube->base_mins_[m].push_back(std::numeric_limits<std::int64_t>::max());
        cube->base_maxs_[m].push_back(std::numeric_limits<std::int64_t>::min());
      }
    }
    ++cube->base_counts_.back();
    for (std::size_t m = 0; m < nm; ++m) {
      const auto v = (*columns[m])[f];
      cube->base_sums_[m].back() += v;
      cube->base_mins_[m].back() = std::min(cube->base_mins_[m].back(), v);
      cube->base_maxs_[m].back() = std::max(cube->base_maxs_[m].back(), v);
    }
  }

  cube->stats_.fact_rows = n;
  cube->stats_.base_cells = cube->base_counts_.size();
  cube->stats_.build_millis =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return cube;
}

std::shared_ptr<const Cube> build_cube(const etl::Warehouse& warehouse,
                                       std::string_view cube_name) {
  return CubeBuilder::build(warehouse, cube_name);
}

// ------------------------------------------------------------------ registry

std::shared_ptr<const Cube> CubeRegistry::get(std::string_view name) const {
  std::lock_guard lock(mutex_);
  auto it = cubes_.find(casefold(name));
  return it == cubes_.end() ? nullptr : it->second;
}

std::vector<std::string> CubeRegistry::names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [k, c] : cubes_) out.push_back(c->name());
  return out;
}

void CubeRegistry::publish(std::shared_ptr<const Cube> cube) {
  std::lock_guard lock(mutex_);
  cubes_[casefold(cube->name())] = std::move(cube);
}

void CubeRegistry::clear() {
  std::lock_guard lock(mutex_);
  cubes_.clear();
}

std::shared_ptr<const Cube> CubeRegistry::invalidate(const etl::Warehouse& warehouse,
                                                     std::string_view name) {
  auto current = get(name);
  if (current && current->build_stamp() == warehouse.version()) return current;
  auto fresh = build_cube(warehouse, name);
  publish(fresh);
  return fresh;
}

}  // namespace starcube::cube
