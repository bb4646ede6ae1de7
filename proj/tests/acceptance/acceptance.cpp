// Runs the nine primary acceptance criteria and prints one PASS/FAIL line
// for each. Exit status is 0 only when every selected criterion passes.
//
//   acceptance            run 1-9
//   acceptance 1 5 9      run a subset

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "corpus.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "oracle.hpp"
#include "random_query.hpp"
#include "starcube/csv.hpp"
#include "starcube/cube/cube.hpp"
#include "starcube/error.hpp"
#include "starcube/etl/generator.hpp"
#include "starcube/etl/pipeline.hpp"
#include "starcube/etl/warehouse.hpp"
#include "starcube/query/engine.hpp"
#include "starcube/query/mdx.hpp"
#include "starcube/server/http.hpp"
#include "starcube/server/service.hpp"

namespace fs = std::filesystem;
using namespace starcube;
using namespace starcube::testing;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Collects the first few failures and a count of the rest.
class Failures {
 public:
  void add(const std::string& what) {
    if (count_++ < 5) list_ += (list_.empty() ? "" : "; ") + what;
  }
  bool empty() const { return count_ == 0; }
  std::size_t count() const { return count_; }
  std::string summary() const {
    return std::to_string(count_) + " failure(s): " + list_ + (count_ > 5 ? "; ..." : "");
  }

 private:
  std::size_t count_ = 0;
  std::string list_;
};

Outcome verdict(const Failures& f, const std::string& ok) {
  return f.empty() ? Outcome{true, ok} : Outcome{false, f.summary()};
}

void write_rows(const fs::path& path, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& r : rows) out += csv::join(r) + "\n";
  csv::write_file(path, out);
}

etl::PipelineConfig pipeline_for(const fs::path& source_dir, const std::string& batch_id, Date batch_date) {
  auto config = etl::reference_pipeline();
  config.base_dir = source_dir;
  config.batch_id = batch_id;
  config.batch_date = batch_date;
  return config;
}

std::int64_t raw_of(const cube::CellValue& v) {
  const auto& s = v.storage();
  if (std::holds_alternative<std::int64_t>(s)) return std::get<std::int64_t>(s);
  if (std::holds_alternative<Decimal>(s)) return std::get<Decimal>(s).raw();
  return 0;  // Empty
}

std::string csv_result(const std::string& mdx, const std::shared_ptr<const cube::Cube>& c) {
  return query::format_cellset(query::execute(mdx, c), query::Format::Csv);
}

// The seeded reference dataset (seed 42, 500 patients, 5000 facts, typo
// rate 0.05) loaded into the extended catalog.
struct Reference {
  TempDir tmp{"starcube-acceptance"};
  BuiltWarehouse built;
  std::shared_ptr<const etl::Warehouse> warehouse;
  std::shared_ptr<const cube::Cube> cube;
  std::unique_ptr<BruteForceOracle> oracle;
  std::vector<std::string> queries;

  Reference() {
    built = build_reference_warehouse(tmp.path());
    warehouse = std::make_shared<const etl::Warehouse>(etl::Warehouse::load(built.warehouse_dir));
    cube = cube::build_cube(*warehouse, "Cancer");
    oracle = std::make_unique<BruteForceOracle>(built.warehouse_dir);
    queries = random_queries(*cube, 42, 100);
  }
};

Reference& reference() {
  static Reference r;
  return r;
}

// 1. Random queries against the brute-force join + group-by.
Outcome oracle_equivalence() {
  auto& ref = reference();
  const auto start = Clock::now();
  BruteForceOracle oracle(ref.built.warehouse_dir);
  auto c = cube::build_cube(*ref.warehouse, "Cancer");
  Failures f;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < ref.queries.size(); ++i) {
    const auto bound = without_non_empty(query::bind(query::parse(ref.queries[i]), c));
    const auto full = query::evaluate(bound, *c);
    cells += full.cells.size();
    const auto why = compare_with_oracle(bound, full, oracle);
    if (!why.empty()) f.add("query " + std::to_string(i) + ": " + why);
  }
  const double secs = seconds_since(start);
  if (ref.queries.size() != 100) f.add("expected 100 queries, generated " + std::to_string(ref.queries.size()));
  if (secs >= 60) f.add("suite took " + std::to_string(secs) + " s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu queries, %zu cells, all equal to the oracle, %.2f s", ref.queries.size(),
                cells, secs);
  return verdict(f, buf);
}

// 2. Every Calendar parent equals the sum of its children for SUM and COUNT.
Outcome rollup_additivity() {
  auto& ref = reference();
  const auto& c = *ref.cube;
  std::vector<std::size_t> additive;
  for (std::size_t m = 0; m < c.measures().size(); ++m) {
    const auto agg = c.measures()[m].aggregator;
    if (agg == schema::Aggregator::Sum || agg == schema::Aggregator::Count) additive.push_back(m);
  }
  Failures f;
  std::size_t checked = 0, roles = 0;
  for (std::size_t r = 0; r < c.roles().size(); ++r) {
    if (c.roles()[r].dimension != "DimDate") continue;
    ++roles;
    const auto h_index = c.roles()[r].hierarchy_index("Calendar");
    if (!h_index) {
      f.add(c.roles()[r].name + " has no Calendar hierarchy");
      continue;
    }
    const auto& h = c.hierarchy(r, *h_index);
    for (int level = 0; level + 1 < h.level_count(); ++level) {
      const auto parents = c.aggregate({{r, *h_index, level}}, {});
      const auto children = c.aggregate({{r, *h_index, level + 1}}, {});
      for (const auto& p : h.level_members(level)) {
        for (auto m : additive) {
          const cube::MemberId pid = p.id;
          const std::int64_t parent = raw_of(parents->value_at({&pid, 1}, m));
          std::int64_t sum = 0;
          for (const auto& ch : h.children(p.id)) {
            const cube::MemberId cid = ch.id;
            sum += raw_of(children->value_at({&cid, 1}, m));
          }
          ++checked;
          if (parent != sum) {
            f.add(h.unique_name(p.id) + " " + c.measures()[m].name + ": " + std::to_string(parent) +
                  " != " + std::to_string(sum));
          }
        }
      }
    }
  }
  if (roles != 3) f.add("expected 3 date roles, found " + std::to_string(roles));
  return verdict(f, std::to_string(roles) + " date roles, " + std::to_string(checked) +
                        " parent cells, zero violations");
}

// 3. Every source row duplicated: dimensions dedupe, facts do not.
Outcome etl_asymmetry() {
  TempDir tmp{"starcube-dup"};
  const auto ds = etl::generate_synthetic({});
  const auto manifest = json::parse(ds.manifest());
  const fs::path src = tmp.path() / "src";
  etl::write_dataset(ds, src);
  for (const char* name : {"patients.csv", "procedures.csv", "treatments.csv", "facts.csv"}) {
    auto rows = read_csv_file(src / name);
    std::vector<std::vector<std::string>> doubled{rows[0]};
    for (std::size_t i = 1; i < rows.size(); ++i) {
      doubled.push_back(rows[i]);
      doubled.push_back(rows[i]);
    }
    write_rows(src / name, doubled);
  }
  etl::Warehouse wh(schema::reference_schema());
  etl::run_pipeline(pipeline_for(src, "batch-dup", kBatchDate), wh);

  Failures f;
  std::string shape;
  for (const auto& [dim, expected] : manifest["expected"]["dimension_rows"].items()) {
    const auto& table = wh.dimension(dim);
    std::set<std::string> keys;
    for (const auto& row : table.rows()) keys.insert(row.attributes[table.natural_key_index()].to_string());
    if (table.rows().size() != expected.get<std::size_t>()) {
      f.add(dim + " has " + std::to_string(table.rows().size()) + " rows, expected " + expected.dump());
    }
    if (keys.size() != table.rows().size()) f.add(dim + " holds repeated natural keys");
    shape += dim + "=" + std::to_string(table.rows().size()) + " ";
  }
  const auto distinct_facts = manifest["expected"]["fact_rows"].get<std::size_t>();
  const auto facts = wh.fact("FactMedical").size();
  if (facts != 2 * distinct_facts) {
    f.add("FactMedical has " + std::to_string(facts) + " rows, expected " + std::to_string(2 * distinct_facts));
  }
  return verdict(f, shape + "FactMedical=" + std::to_string(facts) + " (2 x " + std::to_string(distinct_facts) + ")");
}

// 4. Injected typos come back as their originals; clean values stay put.
Outcome fuzzy_recovery() {
  auto& ref = reference();
  const auto& manifest = ref.built.manifest;
  const double threshold = manifest["generator"]["fuzzy_threshold"];
  const auto& wh = *ref.warehouse;

  // Source header of an attribute; only the patients file uses Arabic headers.
  const std::map<std::string, std::string> patient_headers = {{"gender", "النوع"}, {"hio_law", "قانون التأمين"}};
  const std::map<std::string, std::string> dims = {
      {"patients.csv", "DimPatient"}, {"procedures.csv", "DimProcedure"}, {"treatments.csv", "DimTreatment"}};

  std::map<std::pair<std::string, std::size_t>, std::map<std::string, std::string>> typos;  // (file, line) -> col -> original
  for (const auto& t : manifest["typos"]) {
    typos[{t["file"].get<std::string>(), t["line"].get<std::size_t>()}][t["column"].get<std::string>()] =
        t["original"].get<std::string>();
  }
  std::set<std::pair<std::string, std::size_t>> quarantined;
  for (const auto& q : ref.built.report.quarantine) quarantined.insert({q.provenance.source, q.provenance.line});

  Failures f;
  std::size_t recovered = 0, clean = 0, typo_total = manifest["typos"].size();
  for (const auto& [file, dim_name] : dims) {
    const auto rows = read_csv_file(ref.built.source_dir / file);
    const auto& dim = wh.dimension(dim_name);
    const auto source_name = file.substr(0, file.find('.'));
    for (const auto& [column, domain] : manifest["clean_values"].items()) {
      auto header = column;
      if (file == "patients.csv" && patient_headers.count(column)) header = patient_headers.at(column);
      const auto col = std::find(rows[0].begin(), rows[0].end(), header) - rows[0].begin();
      if (col == static_cast<std::ptrdiff_t>(rows[0].size())) continue;
      std::size_t attr = 0;
      while (attr < dim.def().attributes.size() && dim.def().attributes[attr].name != column) ++attr;
      if (attr == dim.def().attributes.size()) {
        f.add(dim_name + " lacks attribute " + column);
        continue;
      }
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::size_t line = i + 1;
        auto t = typos.find({file, line});
        const bool is_typo = t != typos.end() && t->second.count(column);
        const auto expected = is_typo ? t->second.at(column) : rows[i][static_cast<std::size_t>(col)];
        const auto where = file + ":" + std::to_string(line) + " " + column;
        if (quarantined.count({source_name, static_cast<int>(line)})) {
          if (is_typo) f.add(where + " typo sits on a quarantined row");
          continue;
        }
        const auto* row = dim.current(Value(rows[i][0]));
        if (!row) {
          f.add(where + " was not loaded");
          continue;
        }
        const auto got = row->attributes[attr].to_string();
        if (got != expected) {
          f.add(where + ": " + got + " != " + expected);
          continue;
        }
        if (is_typo) {
          ++recovered;
          // The original must also win under the textbook DP at the threshold.
          const auto& typo = rows[i][static_cast<std::size_t>(col)];
          double best = -1;
          std::string best_value;
          for (const auto& d : domain) {
            const auto cand = d.get<std::string>();
            std::string a = typo, b = cand;
            for (auto& ch : a) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            for (auto& ch : b) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            auto cps = [](const std::string& s) {
              std::size_t n = 0;
              for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
              return n;
            };
            const double sim = 1.0 - static_cast<double>(dp_levenshtein(a, b)) /
                                         static_cast<double>(std::max(cps(a), cps(b)));
            if (sim > best) {
              best = sim;
              best_value = cand;
            }
          }
          if (best_value != expected || best < threshold) f.add(where + ": DP oracle disagrees");
        } else {
          ++clean;
        }
      }
    }
  }
  if (recovered != typo_total) {
    f.add(std::to_string(recovered) + " of " + std::to_string(typo_total) + " typos recovered");
  }
  return verdict(f, std::to_string(recovered) + "/" + std::to_string(typo_total) + " typos recovered, " +
                        std::to_string(clean) + " clean values unchanged");
}

// 5. One patient's hio_law changes between two batches.
Outcome scd2_correctness() {
  TempDir tmp{"starcube-scd2"};
  const fs::path src1 = tmp.path() / "batch1", src2 = tmp.path() / "batch2";
  const auto ds = etl::generate_synthetic({});
  const auto manifest = json::parse(ds.manifest());
  etl::write_dataset(ds, src1);
  const Date d1 = kBatchDate, d2 = *Date::parse("2013-06-01");

  etl::Warehouse wh(extended_catalog());
  etl::run_pipeline(pipeline_for(src1, "batch-1", d1), wh);
  const auto& patients_dim = wh.dimension("DimPatient");
  std::size_t law_attr = 0;
  while (patients_dim.def().attributes[law_attr].name != "hio_law") ++law_attr;

  // The first patient with loadable facts.
  auto facts = read_csv_file(src1 / "facts.csv");
  std::string patient, old_law;
  for (std::size_t i = 1; i < facts.size() && patient.empty(); ++i) {
    if (facts[i].size() != facts[0].size()) continue;
    if (const auto* row = patients_dim.current(Value(facts[i][0]))) {
      patient = facts[i][0];
      old_law = row->attributes[law_attr].to_string();
    }
  }
  std::string new_law;
  for (const auto& l : manifest["clean_values"]["hio_law"]) {
    if (l.get<std::string>() != old_law) {
      new_law = l.get<std::string>();
      break;
    }
  }
  Failures f;
  if (patient.empty() || new_law.empty()) {
    f.add("no patient to change");
    return verdict(f, "");
  }

  const std::string mdx = "SELECT {[Measures].[Cost], [Measures].[FactCount]} ON COLUMNS, "
                          "[PaID].[HioLaw].Members ON ROWS FROM [Cancer]";
  auto by_law = [&](const etl::Warehouse& w) {
    auto c = cube::build_cube(w, "Cancer");
    auto cs = query::execute(mdx, c);
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> out;
    for (std::size_t r = 0; r < cs.rows(); ++r) {
      out[cs.axes[1][r][0].caption] = {raw_of(cs.at(r, 0).value), raw_of(cs.at(r, 1).value)};
    }
    return out;
  };
  const auto before = by_law(wh);
  const auto patient_rows_before = patients_dim.rows().size();
  const auto fact_rows_before = wh.fact("FactMedical").size();

  // Batch 2: the same patients with one law changed, plus that patient's facts again.
  fs::create_directories(src2);
  for (const char* name : {"procedures.csv", "treatments.csv"}) fs::copy_file(src1 / name, src2 / name);
  auto patients = read_csv_file(src1 / "patients.csv");
  const auto law_col = static_cast<std::size_t>(
      std::find(patients[0].begin(), patients[0].end(), "قانون التأمين") - patients[0].begin());
  for (auto& row : patients) {
    if (row.size() > law_col && row[0] == patient) row[law_col] = new_law;
  }
  write_rows(src2 / "patients.csv", patients);
  std::vector<std::vector<std::string>> batch2_facts{facts[0]};
  std::int64_t delta_cost = 0;
  const auto cost_col = static_cast<std::size_t>(std::find(facts[0].begin(), facts[0].end(), "cost") - facts[0].begin());
  for (std::size_t i = 1; i < facts.size(); ++i) {
    if (facts[i].size() == facts[0].size() && facts[i][0] == patient) {
      batch2_facts.push_back(facts[i]);
      delta_cost += parse_fixed4(facts[i][cost_col]);
    }
  }
  const auto delta_count = static_cast<std::int64_t>(batch2_facts.size() - 1);
  write_rows(src2 / "facts.csv", batch2_facts);
  etl::run_pipeline(pipeline_for(src2, "batch-2", d2), wh);

  // Dimension versions.
  const auto& dim = wh.dimension("DimPatient");
  const auto versions = dim.versions(Value(patient));
  if (versions.size() != 2) {
    f.add(patient + " has " + std::to_string(versions.size()) + " versions");
  } else {
    const auto& v1 = dim.rows()[versions[0]];
    const auto& v2 = dim.rows()[versions[1]];
    if (v1.attributes[law_attr].to_string() != old_law || v2.attributes[law_attr].to_string() != new_law) {
      f.add("version laws are wrong");
    }
    if (v1.version != 1 || v2.version != 2) f.add("version numbers are wrong");
    if (!(v1.valid_from == d1) || !v1.valid_to || !(*v1.valid_to == d2) || v1.is_current) {
      f.add("first version interval is not [" + d1.to_string() + ", " + d2.to_string() + ")");
    }
    if (!(v2.valid_from == d2) || v2.valid_to || !v2.is_current) f.add("second version is not open from " + d2.to_string());
  }
  if (dim.rows().size() != patient_rows_before + 1) f.add("other patients gained versions");
  if (wh.fact("FactMedical").size() != fact_rows_before + static_cast<std::size_t>(delta_count)) {
    f.add("fact rows did not grow by the batch");
  }

  // Batch 1 facts stay under the old law, batch 2 facts land under the new one.
  const auto after = by_law(wh);
  auto get = [](const auto& m, const std::string& k) {
    auto it = m.find(k);
    return it == m.end() ? std::pair<std::int64_t, std::int64_t>{0, 0} : it->second;
  };
  if (get(after, old_law) != get(before, old_law)) f.add("old law cell moved");
  const auto want_new = std::pair{get(before, new_law).first + delta_cost, get(before, new_law).second + delta_count};
  if (get(after, new_law) != want_new) f.add("new law cell is not the batch 1 value plus batch 2 facts");
  for (const auto& [law, v] : after) {
    if (law != old_law && law != new_law && v != get(before, law)) f.add(law + " cell moved");
  }

  // Whole grid against the oracle over the saved warehouse.
  const fs::path saved = tmp.path() / "wh";
  wh.save(saved);
  BruteForceOracle oracle(saved);
  auto c = cube::build_cube(wh, "Cancer");
  const auto bound = query::bind(query::parse(mdx), c);
  const auto why = compare_with_oracle(bound, query::evaluate(bound, *c), oracle);
  if (!why.empty()) f.add("oracle: " + why);

  return verdict(f, patient + ": " + old_law + " -> " + new_law + ", " + std::to_string(delta_count) +
                        " batch-2 facts under the new law, grid equals the oracle");
}

// 6. Rerunning a batch changes neither table hashes nor query output.
Outcome idempotence() {
  auto& ref = reference();
  auto wh = etl::Warehouse::load(ref.built.warehouse_dir);
  const auto hashes_before = wh.content_hashes();
  const auto cube_before = cube::build_cube(wh, "Cancer");
  std::vector<std::string> csv_before;
  for (const auto& q : ref.queries) csv_before.push_back(csv_result(q, cube_before));

  etl::run_pipeline(pipeline_for(ref.built.source_dir, "batch-1", kBatchDate), wh);
  Failures f;
  const auto hashes_after = wh.content_hashes();
  for (const auto& [table, h] : hashes_before) {
    auto it = hashes_after.find(table);
    if (it == hashes_after.end() || it->second != h) f.add(table + " hash changed");
  }
  const auto cube_after = cube::build_cube(wh, "Cancer");
  for (std::size_t i = 0; i < ref.queries.size(); ++i) {
    if (csv_result(ref.queries[i], cube_after) != csv_before[i]) f.add("query " + std::to_string(i) + " csv differs");
  }
  return verdict(f, std::to_string(hashes_before.size()) + " table hashes unchanged, " +
                        std::to_string(ref.queries.size()) + " csv results byte-identical");
}

// 7. Golden parser corpus.
Outcome parser_corpus() {
  Failures f;
  const auto& valid = valid_query_corpus();
  const auto& invalid = invalid_query_corpus();
  if (valid.size() < 40) f.add("only " + std::to_string(valid.size()) + " valid queries");
  if (invalid.size() < 20) f.add("only " + std::to_string(invalid.size()) + " invalid queries");
  for (const auto& q : valid) {
    try {
      const auto first = query::parse(q);
      const auto second = query::parse(query::to_mdx(first));
      if (!(first == second)) f.add("round trip differs: " + q);
    } catch (const Error& e) {
      f.add(q + ": " + e.what());
    }
  }
  for (const auto& q : invalid) {
    try {
      query::parse(q.text);
      f.add("parsed: " + q.text);
    } catch (const Error& e) {
      const SourcePosition want{q.line, q.column};
      if (e.code() != ErrorCode::SyntaxError || !e.position() || !(*e.position() == want)) {
        f.add(q.text + ": " + e.what());
      }
    }
  }
  return verdict(f, std::to_string(valid.size()) + " valid queries round-trip, " + std::to_string(invalid.size()) +
                        " invalid queries fail at the expected position");
}

// 8. A million facts: build, cold and warm two-level group-by.
Outcome performance() {
  TempDir tmp{"starcube-perf"};
  etl::GeneratorOptions options;
  options.patients = 10000;
  options.facts = 1000000;
  const auto ds = etl::generate_synthetic(options);
  const auto manifest = json::parse(ds.manifest());
  etl::write_dataset(ds, tmp.path());
  etl::Warehouse wh(schema::reference_schema());
  etl::run_pipeline(pipeline_for(tmp.path(), "batch-1", kBatchDate), wh);

  Failures f;
  const auto facts = wh.fact("FactMedical").size();
  if (facts < 1000000) f.add("only " + std::to_string(facts) + " facts loaded");

  auto start = Clock::now();
  auto c = cube::build_cube(wh, "Cancer");
  const double build = seconds_since(start);

  const std::string mdx =
      "SELECT [Measures].[Cost] ON COLUMNS, "
      "CROSSJOIN([DiagnoseDate].[Calendar].[Year].Members, [TrID].[ByDisease].[Disease].Members) ON ROWS "
      "FROM [Cancer]";
  c->clear_cache();
  start = Clock::now();
  const auto cold_cs = query::execute(mdx, c);
  const double cold = seconds_since(start);
  start = Clock::now();
  const auto warm_cs = query::execute(mdx, c);
  const double warm = seconds_since(start);

  std::int64_t total = 0;
  for (const auto& cell : cold_cs.cells) total += raw_of(cell.value);
  if (total != parse_fixed4(manifest["expected"]["total_cost"].get<std::string>())) {
    f.add("grid total differs from the manifest");
  }
  if (!(warm_cs == cold_cs)) f.add("warm result differs from cold");
  if (build >= 30) f.add("build took " + std::to_string(build) + " s");
  if (cold >= 2) f.add("cold query took " + std::to_string(cold) + " s");
  if (warm >= 0.1) f.add("warm query took " + std::to_string(warm * 1000) + " ms");
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu facts, %zu base cells: build %.2f s, cold %.1f ms, warm %.3f ms", facts,
                c->base_cell_count(), build, cold * 1000, warm * 1000);
  return verdict(f, buf);
}

// 9. The same corpus over HTTP, csv bytes compared.
Outcome transport_transparency() {
  auto& ref = reference();
  server::Service service;
  service.publish(ref.warehouse);
  server::HttpOptions options;
  options.host = "127.0.0.1";
  options.port = 0;
  server::HttpServer http(service, options);
  const int port = http.bind();
  std::thread runner([&] { http.run(); });

  Failures f;
  {
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);
    for (std::size_t i = 0; i < ref.queries.size(); ++i) {
      const json body = {{"mdx", ref.queries[i]}, {"format", "csv"}};
      auto res = client.Post("/api/query", body.dump(), "application/json");
      if (!res) {
        f.add("query " + std::to_string(i) + ": no response");
        continue;
      }
      if (res->status != 200) {
        f.add("query " + std::to_string(i) + ": status " + std::to_string(res->status));
        continue;
      }
      if (res->body != csv_result(ref.queries[i], ref.cube)) f.add("query " + std::to_string(i) + " differs");
    }
  }
  http.stop();
  runner.join();
  return verdict(f, std::to_string(ref.queries.size()) + " queries byte-identical over HTTP");
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "oracle equivalence", oracle_equivalence},
      {2, "roll-up additivity", rollup_additivity},
      {3, "ETL dedupe asymmetry", etl_asymmetry},
      {4, "fuzzy recovery", fuzzy_recovery},
      {5, "SCD2 correctness", scd2_correctness},
      {6, "idempotence", idempotence},
      {7, "parser corpus", parser_corpus},
      {8, "performance", performance},
      {9, "transport transparency", transport_transparency},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
