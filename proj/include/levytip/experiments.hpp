#pragma once

// Experiment orchestration: runs a RunConfig and writes CSVs, binary
// snapshots, gnuplot data/scripts and manifest.json into the output directory.

#include <filesystem>
#include <optional>
#include <string>

#include "levytip/config.hpp"

namespace levytip::cli {

struct RunEnvironment {
    std::optional<std::filesystem::path> output;  // overrides experiment.output
    std::optional<int> workers;                   // overrides experiment.workers and LEVYTIP_WORKERS
    std::string command_line;                     // echoed into the manifest
};

struct RunReport {
    int exit_code = 0;
    std::filesystem::path output;
    std::string summary;
};

/// Worker count: explicit override, else LEVYTIP_WORKERS, else the config value.
[[nodiscard]] int resolve_workers(const RunConfig& config, const RunEnvironment& env);

/// Runs the experiment. Failures inside cells or solves give a nonzero exit
/// code; the manifest is written in every case.
RunReport run_experiment(const RunConfig& config, const RunEnvironment& env = {});

/// Lowercase hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& file);

/// Directory name used for one sweep cell, e.g. "a1.5_e0.25".
[[nodiscard]] std::string cell_tag(double alpha, double eps);

}  // namespace levytip::cli
