#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "starcube/etl/fuzzy.hpp"
#include "starcube/etl/generator.hpp"
#include "starcube/etl/pipeline.hpp"
#include "starcube/etl/warehouse.hpp"

namespace fs = std::filesystem;
using namespace starcube;

static void BM_FuzzyMatch(benchmark::State& state) {
  const std::vector<std::string> refs = {"Bladder Cancer", "Breast Cancer", "Colon Cancer",
                                         "Leukemia", "Liver Cancer", "Lung Cancer"};
  for (auto _ : state) {
    benchmark::DoNotOptimize(etl::fuzzy_match("Bladde Cancer", refs, 0.8));
  }
}
BENCHMARK(BM_FuzzyMatch);

static void BM_Levenshtein(benchmark::State& state) {
  const std::string a(static_cast<std::size_t>(state.range(0)), 'a');
  std::string b = a;
  b[b.size() / 2] = 'b';
  for (auto _ : state) benchmark::DoNotOptimize(etl::levenshtein(a, b));
}
BENCHMARK(BM_Levenshtein)->Arg(16)->Arg(64)->Arg(256);

// Whole reference pipeline over a generated dataset of range(0) facts.
static void BM_Pipeline(benchmark::State& state) {
  etl::GeneratorOptions o;
  o.facts = static_cast<std::size_t>(state.range(0));
  o.patients = std::max<std::size_t>(50, o.facts / 100);
  const fs::path dir = fs::temp_directory_path() / ("starcube-bench-etl-" + std::to_string(std::random_device{}()));
  etl::write_dataset(etl::generate_synthetic(o), dir);
  auto config = etl::reference_pipeline();
  config.base_dir = dir;
  config.batch_date = *Date::parse("2013-01-15");
  for (auto _ : state) {
    etl::Warehouse wh(schema::reference_schema());
    benchmark::DoNotOptimize(etl::run_pipeline(config, wh));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  fs::remove_all(dir);
}
BENCHMARK(BM_Pipeline)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
