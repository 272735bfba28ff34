#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "smpca/benchmark_harness.hpp"
#include "smpca/pipeline.hpp"
#include "smpca/simgen.hpp"
#include "smpca/tasks.hpp"

namespace smpca {

struct PathConfig {
  std::string data, model, truth, output, summary;
};

/// Everything the command-line tool can be configured with.
struct RunConfig {
  FitOptions fit;
  std::optional<std::size_t> var_P_max;
  RefitMode refit = RefitMode::Full;
  std::size_t horizon = 5;
  SimConfig simulation;
  BenchmarkSpec benchmark;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  bool store_spectral = false;
  PathConfig paths;
};

/// Parses and validates a JSON config; unknown keys and bad values throw ConfigError naming the field.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
/// Full config with every default spelled out; parse_run_config(to_json(c)) == c.
nlohmann::json run_config_to_json(const RunConfig& config);
/// JSON Schema (draft 2020-12) describing the config file.
nlohmann::json config_schema();
/// FNV-1a 64-bit hash of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// Copies shared settings (seed, threads, fit options) into the derived sections.
void propagate(RunConfig& config);

}  // namespace smpca
