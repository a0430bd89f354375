#pragma once

// Run configuration: INI-style file with one section per module.
//
//   [experiment]  kind, output, seed, workers
//   [kinetics]    a_k, b_k, b_s, k0, k1, n, p
//   [transform]   c_k, c_s
//   [noise]       alpha, eps, eps_k, eps_s, alphas, epsilons
//   [domain]      a, b, c, d
//   [grid]        I, dt, T, record_stride, output_interval, c_stab, snapshot_times
//   [initial]     k, s, shape, width, ring_radius, ring_count
//   [analysis]    tipping_cap, stop_on_crossing, refine, metastable_window
//   [montecarlo]  n_paths, dt, keep_trajectories, trajectory_stride
//
// docs/formats.md lists every key with its default.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "levytip/kinetics.hpp"
#include "levytip/solver.hpp"
#include "levytip/stable.hpp"

namespace levytip::cli {

enum class ExperimentKind {
    SingleRun,
    Fig3Snapshots,
    Fig4Trajectories,
    Fig7TippingSweep,
    Fig5PhaseDiagram,
    Fig8InitialConditions,
    Fig9DistanceSweep,
    McCrosscheck,
};

[[nodiscard]] std::string_view to_string(ExperimentKind kind);
[[nodiscard]] std::optional<ExperimentKind> parse_experiment_kind(std::string_view name);

/// Kinds that iterate over the (alphas x epsilons) product.
[[nodiscard]] bool is_sweep(ExperimentKind kind);

enum class InitialShape { Delta, Gaussian };

struct RunConfig {
    ExperimentKind kind = ExperimentKind::SingleRun;
    std::string output = "out";
    std::uint64_t seed = 1;
    int workers = 1;

    KineticParams params;
    ScaleTransform transform;

    std::optional<double> alpha;
    std::optional<double> eps;
    std::optional<double> eps_k;  // per-axis overrides of eps
    std::optional<double> eps_s;
    std::vector<double> alphas;
    std::vector<double> epsilons;

    DomainBox domain;

    int half_resolution = 50;
    double dt = 0.0;  // 0 = stability-derived
    double T = 100.0;
    int record_stride = 0;  // 0 = record only at output times
    double output_interval = 0.05;
    double c_stab = 0.5;
    std::vector<double> snapshot_times;

    Point initial{0.15262, 4.3148};
    InitialShape initial_shape = InitialShape::Delta;
    double initial_width = 0.0;  // gaussian std in reference units; 0 = 2h
    double ring_radius = 0.1;
    int ring_count = 9;

    double tipping_cap = 30.0;
    bool stop_on_crossing = false;
    bool refine = false;
    int metastable_window = 1;

    long n_paths = 1000000;
    double mc_dt = 1e-3;
    long keep_trajectories = 0;
    long trajectory_stride = 100;

    /// Single-cell noise (alpha, eps with per-axis overrides). Requires alpha and an intensity.
    [[nodiscard]] NoiseSpec noise() const;
    [[nodiscard]] GridSpec grid() const;
    /// Output times: multiples of output_interval up to T plus snapshot_times.
    [[nodiscard]] std::vector<double> output_times() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Parses and validates; throws ConfigError listing every problem found.
[[nodiscard]] RunConfig parse_config(const std::string& text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& file);

/// Invariant and required-field checks; empty when valid.
[[nodiscard]] std::vector<std::string> validate(const RunConfig& config);

/// Canonical INI text; parse_config(serialize_config(c)) == c.
[[nodiscard]] std::string serialize_config(const RunConfig& config);

enum class Variant { AsWritten, Coarse, Paper };

/// Coarse: I=25 and a shortened horizon. Paper: I=100 and T=100 (the
/// Monte Carlo cross-check keeps its own horizon).
void apply_variant(RunConfig& config, Variant variant);

struct Preset {
    std::string name;
    std::string description;
    RunConfig config;
};

[[nodiscard]] const std::vector<Preset>& presets();
[[nodiscard]] const Preset* find_preset(std::string_view name);

}  // namespace levytip::cli
