#include "levytip/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

namespace levytip {

Rng block_generator(std::uint64_t seed, std::uint64_t block) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    return Rng(seq);
}

PathEnsemble simulate_ensemble(Point initial, const EnsembleSettings& settings, const KineticParams& params,
                               const ScaleTransform& transform, const NoiseSpec& noise, const DomainBox& domain) {
    noise.validate();
    domain.validate();
    if (settings.n_paths < 1) throw std::invalid_argument("simulate_ensemble: n_paths must be positive");
    if (!(settings.dt > 0.0) || !(settings.T > 0.0)) throw std::invalid_argument("simulate_ensemble: dt and T must be positive");
    if (!domain.contains(initial)) throw std::domain_error("simulate_ensemble: initial state must lie inside the domain");

    const long n_steps = std::max<long>(1, static_cast<long>(std::ceil(settings.T / settings.dt - 1e-9)));
    const double dt = settings.T / static_cast<double>(n_steps);
    const long stride = std::max<long>(1, settings.trajectory_stride);

    PathEnsemble out;
    out.n_paths = settings.n_paths;
    out.dt_mc = dt;
    out.T = settings.T;
    out.seed = settings.seed;
    out.terminal.assign(settings.n_paths, initial);
    out.absorbed.assign(settings.n_paths, 0);
    out.trajectories.resize(std::min(settings.keep_trajectories, settings.n_paths));

    const long n_blocks = (settings.n_paths + kPathsPerBlock - 1) / kPathsPerBlock;
    std::atomic<long> next_block{0};

    auto worker = [&] {
        for (long block = next_block++; block < n_blocks; block = next_block++) {
            Rng rng = block_generator(settings.seed, static_cast<std::uint64_t>(block));
            const long first = block * kPathsPerBlock;
            const long last = std::min(settings.n_paths, first + kPathsPerBlock);
            for (long path = first; path < last; ++path) {
                Point x = initial;
                const bool keep = path < static_cast<long>(out.trajectories.size());
                std::vector<TrajectorySample>* traj = keep ? &out.trajectories[path] : nullptr;
                if (traj) traj->push_back({0.0, x, false});
                bool absorbed = false;
                for (long step = 1; step <= n_steps; ++step) {
                    const Point next = em_step(x, dt, params, transform, noise, rng);
                    if (!domain.contains(next)) {
                        absorbed = true;
                        if (traj) traj->push_back({step * dt, next, true});
                        break;
                    }
                    x = next;
                    if (traj && (step % stride == 0 || step == n_steps)) traj->push_back({step * dt, x, false});
                }
                out.terminal[path] = x;
                out.absorbed[path] = absorbed ? 1 : 0;
            }
        }
    };

    const int workers = std::max(1, settings.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    out.absorbed_count = std::count(out.absorbed.begin(), out.absorbed.end(), std::uint8_t{1});
    return out;
}

DensityField empirical_density(const PathEnsemble& ensemble, const GridSpec& grid, const DomainBox& domain) {
    if (ensemble.n_paths < 1) throw std::invalid_argument("empirical_density: empty ensemble");
    const int I = grid.half_resolution;
    const double h = grid.h();
    DensityField field(I, ensemble.T);
    const double weight = 1.0 / (static_cast<double>(ensemble.n_paths) * h * h);
    for (long p = 0; p < ensemble.n_paths; ++p) {
        if (ensemble.absorbed[p]) continue;
        const RefPoint r = to_reference(ensemble.terminal[p], domain);
        field(nearest_index(r.v, I), nearest_index(r.w, I)) += weight;
    }
    return field;
}

double normalized_l1(const DensityField& a, const DensityField& b) {
    if (a.half_resolution() != b.half_resolution()) throw std::invalid_argument("normalized_l1: grid mismatch");
    const double ma = a.total_mass();
    const double mb = b.total_mass();
    if (!(ma > 0.0) || !(mb > 0.0)) throw std::invalid_argument("normalized_l1: field without positive mass");
    const double h = a.h();
    return h * h * (a.values() / ma - b.values() / mb).cwiseAbs().sum();
}

}  // namespace levytip
