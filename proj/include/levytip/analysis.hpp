#pragma once

// Most probable trajectories (density maximizer tracks) and the quantities
// derived from them: tipping time, L-L / L-H classification, metastable
// state and distance to the competence state.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "levytip/kinetics.hpp"
#include "levytip/solver.hpp"

namespace levytip {

struct NodeIndex {
    int i = 0;
    int j = 0;
    friend bool operator==(const NodeIndex&, const NodeIndex&) = default;
};

/// Interior argmax; ties go to the smallest i, then the smallest j.
[[nodiscard]] NodeIndex argmax_node(const DensityField& field);

struct PathEntry {
    double t = 0.0;
    Point x;               // physical (scaled) coordinates of the maximizer
    double density = 0.0;  // clipped at zero
    NodeIndex node;
};

struct ProbablePath {
    std::vector<PathEntry> entries;
    Point saddle;
    bool absorbed = false;        // extraction stopped at a fully absorbed snapshot
    double absorbed_time = 0.0;
    std::vector<std::string> warnings;
};

struct PathOptions {
    Point saddle{0.8568, 4.4938};
    /// Quadratic refinement of the maximizer over its 3x3 neighbourhood.
    bool refine = false;
    /// A consecutive jump larger than this many cells needs a second peak to be legitimate.
    int jump_cells = 20;
    double bimodal_ratio = 0.95;
};

[[nodiscard]] ProbablePath most_probable_path(const SolveResult& result, const PathOptions& options = {});

/// Incremental extractor used when snapshots are consumed on the fly.
class PathTracker {
public:
    PathTracker(const DomainBox& domain, PathOptions options);
    /// Returns false once an all-zero snapshot has been seen.
    bool add(const DensityField& field);
    [[nodiscard]] const ProbablePath& path() const { return path_; }
    [[nodiscard]] ProbablePath take() { return std::move(path_); }

private:
    DomainBox domain_;
    PathOptions options_;
    ProbablePath path_;
};

enum class TippingKind { Transition, NoTransition };

struct TippingOutcome {
    TippingKind kind = TippingKind::NoTransition;
    double time = 0.0;  // meaningful for Transition only
    double cap = 30.0;

    [[nodiscard]] bool transitioned() const { return kind == TippingKind::Transition; }
};

/// Earliest entry whose k-coordinate reaches k_u, provided it happens by `cap`.
[[nodiscard]] TippingOutcome tipping_time(const ProbablePath& path, double k_u, double cap = 30.0);

/// Componentwise median of the last `window` path points; window 0 picks
/// the final 10% of entries.
[[nodiscard]] Point metastable_state(const ProbablePath& path, std::size_t window = 0);

[[nodiscard]] double distance_to_competence(Point state, Point high_state);

enum class Classification { LL, LH };

[[nodiscard]] std::string_view to_string(Classification c);

struct SweepRecord {
    double alpha = 0.0;
    double eps = 0.0;
    TippingOutcome tipping;
    Classification classification = Classification::LL;
    Point terminal_state;
    double distance_d = 0.0;
    std::string status = "ok";  // "ok" or "failed: <reason>"

    [[nodiscard]] bool ok() const { return status == "ok"; }
};

/// Everything classify_cell needs besides (alpha, eps).
struct CellRunner {
    /// Runs the solver for the given noise; the options carry the on-record hook.
    std::function<SolveResult(const NoiseSpec&, const SolveOptions&)> run;
    DomainBox domain;
    BistableLandmarks landmarks;
    double horizon = 100.0;          // classification cap (full T)
    bool stop_on_crossing = false;   // early exit once the path crosses k_u
    std::size_t metastable_window = 1;  // 1 = terminal path point, 0 = final 10% of entries
    PathOptions path_options;
    /// Optional sink for the extracted path of each successful cell; may be
    /// called concurrently from sweep workers.
    std::function<void(const SweepRecord&, const ProbablePath&)> on_path;
};

[[nodiscard]] SweepRecord classify_cell(double alpha, double eps, const CellRunner& runner);

struct SweepOptions {
    int workers = 1;
    /// Cells already computed (e.g. loaded from disk); matched on (alpha, eps).
    std::vector<SweepRecord> completed;
    /// Called after each newly computed cell, serialized across workers.
    std::function<void(const SweepRecord&, std::size_t done, std::size_t total)> on_cell;
};

/// Cartesian product, alpha outer and eps inner.
[[nodiscard]] std::vector<SweepRecord> sweep(const std::vector<double>& alphas, const std::vector<double>& epsilons,
                                             const CellRunner& runner, const SweepOptions& options = {});

}  // namespace levytip
