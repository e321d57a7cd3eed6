#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xsect/predictor.hpp"

namespace xsect {

// Everything a backtest run needs. Every field has a default; a JSON file
// may set any subset and command-line flags override both.
struct RunConfig {
  std::filesystem::path data = "data";
  std::size_t fundamentals_lag_days = 0;
  std::optional<std::string> start;
  std::optional<std::string> end;
  std::size_t window = 1000;
  std::uint64_t seed = 0;
  std::vector<ModelSpec> models;  // defaults to all twelve presets
  std::filesystem::path out = "out";
  int threads = 1;
  std::size_t max_missing = 8;
  bool include_ramp_in = false;
  std::size_t quintile_override = 0;
};

RunConfig default_run_config();
nlohmann::json to_json(const RunConfig& config);
// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Parses "DNN5,RR2" (preset names) into specs with the given seed.
std::vector<ModelSpec> parse_model_list(const std::string& list, std::uint64_t seed);

// Runs the grid, writing per-model returns/holdings/cumulative files and
// the combined reports under config.out, plus the effective config.json.
void run_backtest_command(const RunConfig& config);

// Recomputes report files from a run directory's saved outputs.
void run_report_command(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                        std::optional<bool> include_ramp_in = std::nullopt);

// Command-line entry point; returns the process exit status.
int run_app(int argc, char** argv);

}  // namespace xsect
