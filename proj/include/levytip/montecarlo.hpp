#pragma once

// Euler-Maruyama sample paths of the stable-driven MeKS SDE, used to
// cross-check Fokker-Planck densities.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "levytip/kinetics.hpp"
#include "levytip/solver.hpp"
#include "levytip/stable.hpp"

namespace levytip {

using Rng = std::mt19937_64;

/// One step: x + f(x) dt + eps dt^(1/alpha) xi, with independent standard
/// stable xi per coordinate. `x` is in scaled coordinates.
template <class Generator>
[[nodiscard]] Point em_step(Point x, double dt, const KineticParams& params, const ScaleTransform& transform,
                            const NoiseSpec& noise, Generator& rng) {
    const Point f = drift_scaled(x, params, transform);
    const double scale = std::pow(dt, 1.0 / noise.alpha);
    Point next{x.k + f.k * dt, x.s + f.s * dt};
    // Zero intensity skips the draw: a huge variate times zero would give NaN.
    if (noise.eps_k > 0.0) next.k += noise.eps_k * scale * sample_standard_stable(noise.alpha, rng);
    if (noise.eps_s > 0.0) next.s += noise.eps_s * scale * sample_standard_stable(noise.alpha, rng);
    return next;
}

struct TrajectorySample {
    double t = 0.0;
    Point x;
    bool absorbed = false;
};

struct EnsembleSettings {
    long n_paths = 1000;
    double dt = 1e-3;
    double T = 1.0;
    std::uint64_t seed = 1;
    int workers = 1;
    /// Number of paths whose trajectories are kept (the first ones).
    long keep_trajectories = 0;
    /// Keep every n-th step of the retained trajectories.
    long trajectory_stride = 100;
};

struct PathEnsemble {
    long n_paths = 0;
    double dt_mc = 0.0;
    double T = 0.0;
    std::uint64_t seed = 0;
    std::vector<Point> terminal;          // last in-domain state for absorbed paths
    std::vector<std::uint8_t> absorbed;   // 1 when the path left the domain
    long absorbed_count = 0;
    std::vector<std::vector<TrajectorySample>> trajectories;

    [[nodiscard]] double surviving_fraction() const {
        return n_paths > 0 ? static_cast<double>(n_paths - absorbed_count) / static_cast<double>(n_paths) : 0.0;
    }
};

/// Paths are split into fixed blocks, each with its own generator seeded from
/// (seed, block index), so results do not depend on the worker count.
[[nodiscard]] PathEnsemble simulate_ensemble(Point initial, const EnsembleSettings& settings,
                                             const KineticParams& params, const ScaleTransform& transform,
                                             const NoiseSpec& noise, const DomainBox& domain);

/// Histogram of surviving terminal states on the solver's cells, normalized
/// so the reference-square mass equals the surviving fraction.
[[nodiscard]] DensityField empirical_density(const PathEnsemble& ensemble, const GridSpec& grid,
                                             const DomainBox& domain);

/// L1 distance on the reference square between the two fields after each is
/// scaled to unit mass. Throws if either field has no positive mass.
[[nodiscard]] double normalized_l1(const DensityField& a, const DensityField& b);

/// Generator for path block `block` of a run with master seed `seed`.
[[nodiscard]] Rng block_generator(std::uint64_t seed, std::uint64_t block);

inline constexpr long kPathsPerBlock = 4096;

}  // namespace levytip
