#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "starcube/etl/pipeline.hpp"

namespace starcube::etl {

struct GeneratorOptions {
  std::uint64_t seed = 42;
  std::size_t patients = 500;
  std::size_t facts = 5000;
  double typo_rate = 0.05;
};

struct GeneratedFile {
  std::string name;
  std::string content;
};

// patients.csv, procedures.csv, treatments.csv, facts.csv and manifest.json.
//
// On top of the requested counts the generator injects rows the reference
// pipeline must reject: patients with a non-numeric age, facts naming an
// unknown patient (cost and quantity zero) and ragged fact rows without the
// cost and quantity fields. The manifest's totals cover the loadable rows,
// which is also the sum over every cost present in facts.csv.
struct SyntheticDataset {
  std::vector<GeneratedFile> files;

  const std::string& file(const std::string& name) const;
  const std::string& manifest() const { return file("manifest.json"); }
};

// Throws InvalidArgument when a count is zero or typo_rate is outside [0,1].
SyntheticDataset generate_synthetic(const GeneratorOptions& options);
void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir);

// The pipeline that loads a generated dataset into reference_schema(). Source
// paths are bare file names, resolved against the config's base_dir.
PipelineConfig reference_pipeline();

}  // namespace starcube::etl
