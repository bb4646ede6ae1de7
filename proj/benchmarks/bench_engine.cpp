#include <benchmark/benchmark.h>

#include <filesystem>
#include <map>
#include <memory>
#include <random>

#include "starcube/cube/cube.hpp"
#include "starcube/etl/generator.hpp"
#include "starcube/etl/pipeline.hpp"
#include "starcube/etl/warehouse.hpp"
#include "starcube/query/engine.hpp"
#include "starcube/query/mdx.hpp"

namespace fs = std::filesystem;
using namespace starcube;

namespace {

const char* kTwoLevel =
    "SELECT [Measures].[Cost] ON COLUMNS, "
    "CROSSJOIN([DiagnoseDate].[Calendar].[Year].Members, [TrID].[ByDisease].[Disease].Members) ON ROWS "
    "FROM [Cancer]";

// One loaded warehouse per fact count, kept for the whole run.
const etl::Warehouse& warehouse(std::size_t facts) {
  static std::map<std::size_t, std::unique_ptr<etl::Warehouse>> cache;
  auto& slot = cache[facts];
  if (!slot) {
    etl::GeneratorOptions o;
    o.facts = facts;
    o.patients = std::max<std::size_t>(50, facts / 100);
    const fs::path dir = fs::temp_directory_path() / ("starcube-bench-" + std::to_string(std::random_device{}()));
    etl::write_dataset(etl::generate_synthetic(o), dir);
    auto config = etl::reference_pipeline();
    config.base_dir = dir;
    config.batch_date = *Date::parse("2013-01-15");
    slot = std::make_unique<etl::Warehouse>(schema::reference_schema());
    etl::run_pipeline(config, *slot);
    fs::remove_all(dir);
  }
  return *slot;
}

}  // namespace

static void BM_Parse(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(query::parse(kTwoLevel));
}
BENCHMARK(BM_Parse);

static void BM_BuildCube(benchmark::State& state) {
  const auto& wh = warehouse(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cube::build_cube(wh, "Cancer"));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildCube)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);

static void BM_QueryCold(benchmark::State& state) {
  auto c = cube::build_cube(warehouse(static_cast<std::size_t>(state.range(0))), "Cancer");
  for (auto _ : state) {
    c->clear_cache();
    benchmark::DoNotOptimize(query::execute(kTwoLevel, c));
  }
}
BENCHMARK(BM_QueryCold)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);

static void BM_QueryWarm(benchmark::State& state) {
  auto c = cube::build_cube(warehouse(static_cast<std::size_t>(state.range(0))), "Cancer");
  query::execute(kTwoLevel, c);
  for (auto _ : state) benchmark::DoNotOptimize(query::execute(kTwoLevel, c));
}
BENCHMARK(BM_QueryWarm)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
