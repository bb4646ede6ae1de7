#include "starcube/query/engine.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "starcube/csv.hpp"
#include "starcube/error.hpp"
#include "starcube/value.hpp"

namespace starcube::query {

namespace {

using cube::MemberId;

[[noreturn]] void bind_error(ErrorCode code, const std::string& msg, const Loc& loc) {
  std::optional<SourcePosition> pos;
  if (loc.line > 0) pos = SourcePosition{loc.line, loc.column};
  throw Error(code, msg, pos);
}

using Signature = std::vector<std::pair<std::size_t, std::size_t>>;

Signature signature_of(const BoundTuple& t) {
  Signature s;
  for (const auto& m : t) s.emplace_back(m.role, m.is_measure() ? 0 : m.hierarchy);
  return s;
}

class Binder {
 public:
  explicit Binder(const cube::Cube& cube) : cube_(cube) {}

  enum class Kind { Member, Level, Hierarchy, Measure, MeasuresRoot };
  struct Resolved {
    Kind kind = Kind::Member;
    std::size_t role = 0;
    std::size_t hierarchy = 0;
    MemberId member = cube::kNoMember;
    int level = 0;
    std::size_t measure = 0;
  };

  Resolved resolve(const Path& path) const {
    const auto& seg = path.segments;
    const std::string shown = to_mdx(path);
    Resolved r;
    if (iequals(seg[0], "Measures")) {
      if (seg.size() == 1) {
        r.kind = Kind::MeasuresRoot;
        return r;
      }
      auto m = cube_.measure_index(seg[1]);
      if (!m || seg.size() > 2) {
        bind_error(ErrorCode::UnknownMember, "unknown measure " + shown, path.loc);
      }
      r.kind = Kind::Measure;
      r.measure = *m;
      return r;
    }

    auto role = cube_.role_index(seg[0]);
    if (!role) {
      std::vector<std::size_t> by_dimension;
      for (std::size_t i = 0; i < cube_.roles().size(); ++i) {
        if (iequals(cube_.roles()[i].dimension, seg[0])) by_dimension.push_back(i);
      }
      if (by_dimension.size() > 1) {
        bind_error(ErrorCode::AmbiguousPath,
                   quote_ident(seg[0]) + " plays several roles in cube " + cube_.name() +
                       "; name the role instead",
                   path.loc);
      }
      if (by_dimension.empty()) {
        bind_error(ErrorCode::UnknownRole,
                   "unknown role or dimension " + quote_ident(seg[0]) + " in " + shown, path.loc);
      }
      role = by_dimension.front();
    }
    r.role = *role;
    const auto& role_ref = cube_.roles()[*role];

    std::size_t next = 1;
    if (seg.size() > 1) {
      if (auto h = role_ref.hierarchy_index(seg[1])) {
        r.hierarchy = *h;
        next = 2;
      } else if (role_ref.hierarchies.size() == 1) {
        r.hierarchy = 0;
      } else {
        bind_error(ErrorCode::UnknownHierarchy,
                   "role " + role_ref.name + " has no hierarchy " + quote_ident(seg[1]),
                   path.loc);
      }
    } else if (role_ref.hierarchies.size() == 1) {
      r.hierarchy = 0;
    } else {
      bind_error(ErrorCode::AmbiguousPath,
                 "role " + role_ref.name + " has several hierarchies; name one in " + shown,
                 path.loc);
    }
    if (role_ref.hierarchies.empty()) {
      bind_error(ErrorCode::UnknownHierarchy, "role " + role_ref.name + " has no hierarchies",
                 path.loc);
    }
    const auto& h = role_ref.hierarchies[r.hierarchy];
    if (next == seg.size()) {
      r.kind = Kind::Hierarchy;
      r.member = h.all();
      return r;
    }

    MemberId current = h.all();
    std::optional<int> level_context;
    for (std::size_t i = next; i < seg.size(); ++i) {
      const auto& s = seg[i];
      if (level_context) {
        r.member = match(h, h.level_members(*level_context), s, shown, path.loc);
        if (r.member == cube::kNoMember) {
          bind_error(ErrorCode::UnknownMember,
                     "level " + h.level_name(*level_context) + " has no member " +
                         quote_ident(s) + " (" + shown + ")",
                     path.loc);
        }
        current = r.member;
        level_context.reset();
        continue;
      }
      MemberId hit = match(h, h.children(current), s, shown, path.loc);
      if (hit != cube::kNoMember) {
        current = hit;
        continue;
      }
      if (current == h.all() && i == next && iequals(s, "All")) continue;
      auto lvl = h.level_index(s);
      if (lvl && *lvl > h.member(current).level) {
        level_context = *lvl;
        continue;
      }
      bind_error(ErrorCode::UnknownMember,
                 "no member " + quote_ident(s) + " under " + h.unique_name(current) + " (" +
                     shown + ")",
                 path.loc);
    }
    if (level_context) {
      r.kind = Kind::Level;
      r.level = *level_context;
      return r;
    }
    r.kind = Kind::Member;
    r.member = current;
    return r;
  }

  BoundMember as_member(const Path& path) const {
    auto r = resolve(path);
    switch (r.kind) {
      case Kind::Member:
      case Kind::Hierarchy:
        return {r.role, r.hierarchy, r.member};
      case Kind::Measure:
        return {kMeasuresRole, 0, static_cast<MemberId>(r.measure)};
      case Kind::Level:
        bind_error(ErrorCode::UnknownMember,
                   to_mdx(path) + " names a level, not a member; use .Members", path.loc);
      case Kind::MeasuresRoot:
        break;
    }
    bind_error(ErrorCode::UnknownMember, "[Measures] alone is not a member; name a measure",
               path.loc);
  }

  BoundTuple tuple(const TupleExpr& t) const {
    BoundTuple out;
    for (const auto& p : t.members) {
      auto m = as_member(p);
      for (const auto& prev : out) {
        if (prev.role == m.role) {
          bind_error(ErrorCode::HierarchyReusedAcrossAxes,
                     m.is_measure() ? "tuple names two measures"
                                    : "tuple uses role " + cube_.roles()[m.role].name + " twice",
                     p.loc);
        }
      }
      out.push_back(m);
    }
    return out;
  }

  std::vector<BoundTuple> set(const SetExpr& s) const {
    if (auto e = std::get_if<ExplicitSet>(&s.node)) {
      std::vector<BoundTuple> out;
      std::optional<Signature> sig;
      for (const auto& el : e->elements) {
        for (auto& t : set(el)) {
          auto ts = signature_of(t);
          if (sig && *sig != ts) {
            bind_error(ErrorCode::NonUniformSet,
                       "set mixes tuples of different hierarchies at " + to_mdx(el), el.loc);
          }
          sig = std::move(ts);
          out.push_back(std::move(t));
        }
      }
      return out;
    }
    if (auto m = std::get_if<MembersSet>(&s.node)) {
      auto r = resolve(m->path);
      std::vector<BoundTuple> out;
      switch (r.kind) {
        case Kind::MeasuresRoot:
          for (std::size_t i = 0; i < cube_.measures().size(); ++i) {
            out.push_back({{kMeasuresRole, 0, static_cast<MemberId>(i)}});
          }
          return out;
        case Kind::Hierarchy:
          r.level = 1;
          [[fallthrough]];
        case Kind::Level: {
          const auto& h = cube_.hierarchy(r.role, r.hierarchy);
          if (r.level >= h.level_count()) r.level = 0;
          for (const auto& mem : h.level_members(r.level)) {
            out.push_back({{r.role, r.hierarchy, mem.id}});
          }
          return out;
        }
        case Kind::Member:
        case Kind::Measure:
          break;
      }
      bind_error(ErrorCode::UnknownLevel,
                 to_mdx(m->path) + " is a member; .Members needs a level or hierarchy",
                 m->path.loc);
    }
    if (auto c = std::get_if<ChildrenSet>(&s.node)) {
      auto r = resolve(c->path);
      std::vector<BoundTuple> out;
      switch (r.kind) {
        case Kind::Member:
        case Kind::Hierarchy: {
          const auto& h = cube_.hierarchy(r.role, r.hierarchy);
          for (const auto& mem : h.children(r.member)) {
            out.push_back({{r.role, r.hierarchy, mem.id}});
          }
          return out;
        }
        case Kind::Measure:
          return out;
        case Kind::MeasuresRoot:
          for (std::size_t i = 0; i < cube_.measures().size(); ++i) {
            out.push_back({{kMeasuresRole, 0, static_cast<MemberId>(i)}});
          }
          return out;
        case Kind::Level:
          break;
      }
      bind_error(ErrorCode::UnknownMember,
                 to_mdx(c->path) + " names a level; .Children needs a member", c->path.loc);
    }
    if (auto x = std::get_if<CrossJoinSet>(&s.node)) {
      auto left = set(x->operands.at(0));
      auto right = set(x->operands.at(1));
      std::vector<BoundTuple> out;
      if (left.empty() || right.empty()) return out;
      for (const auto& l : left.front()) {
        for (const auto& r : right.front()) {
          if (l.role == r.role) {
            bind_error(ErrorCode::HierarchyReusedAcrossAxes,
                       "CROSSJOIN operands share " +
                           (l.is_measure() ? std::string("[Measures]")
                                           : "role " + cube_.roles()[l.role].name),
                       s.loc);
          }
        }
      }
      out.reserve(left.size() * right.size());
      for (const auto& l : left) {
        for (const auto& r : right) {
          BoundTuple t = l;
          t.insert(t.end(), r.begin(), r.end());
          out.push_back(std::move(t));
        }
      }
      return out;
    }
    return {tuple(std::get<TupleSet>(s.node).tuple)};
  }

 private:
  // Keys first (exact text), captions second (case-insensitive). Several
  // hits is an error, never a guess.
  static MemberId match(const cube::Hierarchy& h, std::span<const cube::Member> candidates,
                        const std::string& segment, const std::string& shown, const Loc& loc) {
    std::vector<MemberId> hits;
    for (const auto& m : candidates) {
      if (!m.unknown && !m.key.is_null() && m.key.to_string() == segment) hits.push_back(m.id);
    }
    if (hits.empty()) {
      for (const auto& m : candidates) {
        if (iequals(m.caption, segment)) hits.push_back(m.id);
      }
    }
    if (hits.size() > 1) {
      bind_error(ErrorCode::AmbiguousPath,
                 quote_ident(segment) + " matches " + std::to_string(hits.size()) +
                     " members (" + h.unique_name(hits[0]) + ", " + h.unique_name(hits[1]) +
                     ") in " + shown,
                 loc);
    }
    return hits.empty() ? cube::kNoMember : hits.front();
  }

  const cube::Cube& cube_;
};

std::string tuple_caption(const Position& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += " | ";
    out += p[i].caption;
  }
  return out;
}

}  // namespace

BoundQuery bind(const QueryAst& ast, std::shared_ptr<const cube::Cube> cube_ptr) {
  if (!cube_ptr) throw Error(ErrorCode::UnknownCube, "no cube to bind against");
  const auto& cube = *cube_ptr;
  if (!iequals(ast.cube, cube.name())) {
    throw Error(ErrorCode::UnknownCube, "unknown cube " + quote_ident(ast.cube));
  }
  if (cube.measures().empty()) {
    throw Error(ErrorCode::UnknownMember, "cube " + cube.name() + " has no measures");
  }
  Binder binder(cube);
  BoundQuery q;
  q.build_stamp = cube.build_stamp();

  std::vector<const AxisSpec*> order(ast.axes.size());
  for (std::size_t i = 0; i < ast.axes.size(); ++i) order[i] = &ast.axes[i];
  std::stable_sort(order.begin(), order.end(),
                   [](const AxisSpec* a, const AxisSpec* b) { return a->axis < b->axis; });
  if (!order.empty() && order.front()->axis != AxisName::Columns) {
    throw Error(ErrorCode::SyntaxError, "a ROWS axis needs a COLUMNS axis",
                SourcePosition{order.front()->loc.line, order.front()->loc.column});
  }

  // Which axis (or the slicer) claims each role; measures count as a role.
  std::map<std::size_t, std::string> owner;
  auto claim = [&](const BoundTuple& t, const std::string& where, const Loc& loc) {
    for (const auto& m : t) {
      auto [it, inserted] = owner.emplace(m.role, where);
      if (!inserted && it->second != where) {
        const std::string what =
            m.is_measure() ? "[Measures]" : "role " + cube.roles()[m.role].name;
        bind_error(ErrorCode::HierarchyReusedAcrossAxes,
                   what + " is used on both " + it->second + " and " + where, loc);
      }
    }
  };

  for (const auto* spec : order) {
    BoundAxis axis;
    axis.name = spec->axis;
    axis.non_empty = spec->non_empty;
    axis.tuples = binder.set(spec->set);
    const std::string where = spec->axis == AxisName::Columns ? "COLUMNS" : "ROWS";
    if (!axis.tuples.empty()) {
      const auto sig = signature_of(axis.tuples.front());
      for (const auto& t : axis.tuples) {
        if (signature_of(t) != sig) {
          bind_error(ErrorCode::NonUniformSet, where + " axis mixes hierarchies", spec->set.loc);
        }
      }
      claim(axis.tuples.front(), where, spec->set.loc);
    }
    q.axes.push_back(std::move(axis));
  }
  if (ast.slicer) {
    q.slicer = binder.tuple(*ast.slicer);
    claim(q.slicer, "WHERE", ast.slicer->loc);
  }

  auto note_measure = [&](std::size_t m) {
    if (std::find(q.measures.begin(), q.measures.end(), m) == q.measures.end()) {
      q.measures.push_back(m);
    }
  };
  for (const auto& axis : q.axes) {
    for (const auto& t : axis.tuples) {
      for (const auto& m : t) {
        if (m.is_measure()) note_measure(static_cast<std::size_t>(m.member));
      }
    }
  }
  for (const auto& m : q.slicer) {
    if (m.is_measure()) note_measure(static_cast<std::size_t>(m.member));
  }
  q.default_measure = 0;
  if (q.measures.empty()) q.measures.push_back(q.default_measure);
  q.cube = std::move(cube_ptr);
  return q;
}

CellSet evaluate(const BoundQuery& bound, const cube::Cube& cube, const EvaluateOptions& options) {
  if (bound.build_stamp != cube.build_stamp() ||
      (bound.cube && bound.cube.get() != &cube && bound.cube->build_stamp() != cube.build_stamp())) {
    throw Error(ErrorCode::StaleCube, "query was bound against build " +
                                          std::to_string(bound.build_stamp) + ", cube is build " +
                                          std::to_string(cube.build_stamp()));
  }
  if (options.expected_build_stamp && *options.expected_build_stamp != cube.build_stamp()) {
    throw Error(ErrorCode::StaleCube, "client pinned build " +
                                          std::to_string(*options.expected_build_stamp) +
                                          ", cube is build " + std::to_string(cube.build_stamp()));
  }

  static const std::vector<BoundTuple> kUnit{BoundTuple{}};
  const auto& cols = bound.axes.empty() ? kUnit : bound.axes[0].tuples;
  const auto& rows = bound.axes.size() < 2 ? kUnit : bound.axes[1].tuples;
  const std::size_t total = cols.size() * rows.size();
  if (total > options.max_cells) {
    throw Error(ErrorCode::ResultTooLarge,
                "query yields " + std::to_string(total) + " cells; the limit is " +
                    std::to_string(options.max_cells));
  }

  CellSet cs;
  cs.build_stamp = cube.build_stamp();
  for (auto m : bound.measures) cs.measures.push_back(cube.measures()[m].name);

  std::vector<cube::MemberFilter> filters;
  std::optional<std::size_t> slicer_measure;
  for (const auto& m : bound.slicer) {
    if (m.is_measure()) {
      slicer_measure = static_cast<std::size_t>(m.member);
    } else {
      filters.push_back({m.role, m.hierarchy, {m.member}});
    }
  }

  std::unordered_map<std::string, std::shared_ptr<const cube::AggregateResult>> results;
  std::vector<cube::LevelRef> group_by;
  std::vector<MemberId> coordinate;
  cs.cells.reserve(total);
  for (const auto& row : rows) {
    for (const auto& col : cols) {
      group_by.clear();
      coordinate.clear();
      std::optional<std::size_t> measure = slicer_measure;
      std::string sig;
      for (const auto* part : {&row, &col}) {
        for (const auto& m : *part) {
          if (m.is_measure()) {
            measure = static_cast<std::size_t>(m.member);
            continue;
          }
          const int level = cube.hierarchy(m.role, m.hierarchy).member(m.member).level;
          group_by.push_back({m.role, m.hierarchy, level});
          coordinate.push_back(m.member);
          sig += std::to_string(m.role) + "." + std::to_string(m.hierarchy) + "." +
                 std::to_string(level) + ";";
        }
      }
      auto& result = results[sig];
      if (!result) result = cube.aggregate(group_by, filters);
      const std::size_t mi = measure.value_or(bound.default_measure);
      const auto pos = static_cast<std::size_t>(
          std::find(bound.measures.begin(), bound.measures.end(), mi) - bound.measures.begin());
      cs.cells.push_back({pos, result->value_at(coordinate, mi)});
    }
  }

  auto position_of = [&](const BoundTuple& t) {
    Position p;
    for (const auto& m : t) {
      if (m.is_measure()) {
        const auto& name = cube.measures()[static_cast<std::size_t>(m.member)].name;
        p.push_back({name, "[Measures]." + quote_ident(name)});
      } else {
        const auto& h = cube.hierarchy(m.role, m.hierarchy);
        p.push_back({h.member(m.member).caption, h.unique_name(m.member)});
      }
    }
    return p;
  };
  for (const auto& axis : bound.axes) {
    std::vector<Position> positions;
    positions.reserve(axis.tuples.size());
    for (const auto& t : axis.tuples) positions.push_back(position_of(t));
    cs.axes.push_back(std::move(positions));
  }

  // NON EMPTY: columns first, then rows.
  auto nc = cols.size();
  auto nr = rows.size();
  if (!bound.axes.empty() && bound.axes[0].non_empty) {
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t r = 0; r < nr; ++r) {
        if (!cs.cells[r * nc + c].value.empty()) {
          keep.push_back(c);
          break;
        }
      }
    }
    std::vector<Cell> cells;
    std::vector<Position> positions;
    for (std::size_t r = 0; r < nr; ++r) {
      for (auto c : keep) cells.push_back(cs.cells[r * nc + c]);
    }
    for (auto c : keep) positions.push_back(cs.axes[0][c]);
    cs.cells = std::move(cells);
    cs.axes[0] = std::move(positions);
    nc = keep.size();
  }
  if (bound.axes.size() > 1 && bound.axes[1].non_empty) {
    std::vector<Cell> cells;
    std::vector<Position> positions;
    for (std::size_t r = 0; r < nr; ++r) {
      bool any = false;
      for (std::size_t c = 0; c < nc; ++c) any = any || !cs.cells[r * nc + c].value.empty();
      if (!any) continue;
      positions.push_back(cs.axes[1][r]);
      cells.insert(cells.end(), cs.cells.begin() + static_cast<std::ptrdiff_t>(r * nc),
                   cs.cells.begin() + static_cast<std::ptrdiff_t>((r + 1) * nc));
    }
    cs.cells = std::move(cells);
    cs.axes[1] = std::move(positions);
  }
  return cs;
}

CellSet execute(std::string_view mdx, std::shared_ptr<const cube::Cube> cube,
                const EvaluateOptions& options) {
  auto ast = parse(mdx);
  auto bound = query::bind(ast, cube);
  return evaluate(bound, *cube, options);
}

std::optional<Format> parse_format(std::string_view text) {
  if (iequals(text, "table")) return Format::Table;
  if (iequals(text, "csv")) return Format::Csv;
  if (iequals(text, "json")) return Format::Json;
  return std::nullopt;
}

std::string_view to_string(Format format) {
  switch (format) {
    case Format::Table: return "table";
    case Format::Csv: return "csv";
    case Format::Json: return "json";
  }
  return "?";
}

namespace {

std::vector<std::vector<std::string>> grid(const CellSet& cs) {
  std::vector<std::vector<std::string>> out;
  const bool two_axes = cs.axes.size() > 1;
  std::size_t row_header = 0;
  if (two_axes) {
    row_header = cs.axes[1].empty() ? 1 : std::max<std::size_t>(1, cs.axes[1].front().size());
  }
  std::vector<std::string> header(row_header);
  if (!cs.axes.empty()) {
    for (const auto& p : cs.axes[0]) header.push_back(tuple_caption(p));
  }
  out.push_back(std::move(header));
  for (std::size_t r = 0; r < cs.rows(); ++r) {
    std::vector<std::string> line;
    if (two_axes) {
      const auto& p = cs.axes[1][r];
      for (std::size_t k = 0; k < row_header; ++k) line.push_back(k < p.size() ? p[k].caption : "");
    }
    for (std::size_t c = 0; c < cs.columns(); ++c) line.push_back(cs.at(r, c).value.to_string());
    out.push_back(std::move(line));
  }
  return out;
}

}  // namespace

std::string format_cellset(const CellSet& cs, Format format) {
  if (format == Format::Csv) {
    std::string out;
    for (const auto& line : grid(cs)) out += csv::join(line) + "\n";
    return out;
  }
  if (format == Format::Table) {
    const auto g = grid(cs);
    const std::size_t row_header = g.front().size() - cs.columns();
    std::vector<std::size_t> width;
    for (const auto& line : g) {
      if (width.size() < line.size()) width.resize(line.size(), 0);
      for (std::size_t i = 0; i < line.size(); ++i) {
        // Width in code points so Arabic and other UTF-8 captions align.
        std::size_t n = 0;
        for (unsigned char ch : line[i]) n += (ch & 0xC0) != 0x80;
        width[i] = std::max(width[i], n);
      }
    }
    std::ostringstream os;
    for (std::size_t li = 0; li < g.size(); ++li) {
      const auto& line = g[li];
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i) os << "  ";
        std::size_t n = 0;
        for (unsigned char ch : line[i]) n += (ch & 0xC0) != 0x80;
        const std::string pad(width[i] - n, ' ');
        const bool numeric = li > 0 && i >= row_header;
        os << (numeric ? pad + line[i] : line[i] + (i + 1 == line.size() ? "" : pad));
      }
      os << "\n";
      if (li == 0) {
        std::size_t total = 0;
        for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
        os << std::string(total, '-') << "\n";
      }
    }
    return os.str();
  }

  using nlohmann::ordered_json;
  ordered_json j;
  j["axes"] = ordered_json::array();
  for (const auto& axis : cs.axes) {
    ordered_json positions = ordered_json::array();
    for (const auto& p : axis) {
      ordered_json members = ordered_json::array();
      for (const auto& m : p) {
        members.push_back({{"caption", m.caption}, {"unique_name", m.unique_name}});
      }
      positions.push_back(std::move(members));
    }
    j["axes"].push_back({{"positions", std::move(positions)}});
  }
  j["cells"] = ordered_json::array();
  for (const auto& cell : cs.cells) {
    ordered_json v;
    const auto& s = cell.value.storage();
    if (auto i = std::get_if<std::int64_t>(&s)) {
      v = *i;
    } else if (!cell.value.empty()) {
      v = cell.value.to_double();
    }
    j["cells"].push_back({{cs.measures.at(cell.measure), v}});
  }
  j["measures"] = cs.measures;
  return j.dump() + "\n";
}

}  // namespace starcube::query
