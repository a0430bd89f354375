#include "levytip/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace levytip {

NodeIndex argmax_node(const DensityField& field) {
    const int I = field.half_resolution();
    NodeIndex best{-I + 1, -I + 1};
    double best_value = field(best.i, best.j);
    for (int i = -I + 1; i < I; ++i) {
        for (int j = -I + 1; j < I; ++j) {
            const double v = field(i, j);
            if (v > best_value) {
                best_value = v;
                best = {i, j};
            }
        }
    }
    return best;
}

namespace {

// Largest local maximum farther than `radius` cells (Chebyshev) from `peak`.
double second_peak(const DensityField& field, NodeIndex peak, int radius) {
    const int I = field.half_resolution();
    double best = 0.0;
    for (int i = -I + 1; i < I; ++i) {
        for (int j = -I + 1; j < I; ++j) {
            if (std::max(std::abs(i - peak.i), std::abs(j - peak.j)) <= radius) continue;
            const double v = field(i, j);
            if (v <= best) continue;
            bool local_max = true;
            for (int di = -1; di <= 1 && local_max; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    if ((di != 0 || dj != 0) && field.at(i + di, j + dj) > v) {
                        local_max = false;
                        break;
                    }
                }
            }
            if (local_max) best = v;
        }
    }
    return best;
}

// Vertex of the parabola through three equally spaced samples, in units of
// the spacing, clamped to half a cell.
double parabolic_offset(double left, double centre, double right) {
    const double curvature = left - 2.0 * centre + right;
    if (curvature >= 0.0) return 0.0;
    return std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
}

}  // namespace

PathTracker::PathTracker(const DomainBox& domain, PathOptions options) : domain_(domain), options_(options) {
    path_.saddle = options_.saddle;
}

bool PathTracker::add(const DensityField& field) {
    if (path_.absorbed) return false;
    if (!path_.entries.empty() && field.time <= path_.entries.back().t) return true;

    const double peak_value = field.values().maxCoeff();
    if (!(peak_value > 0.0)) {
        path_.absorbed = true;
        path_.absorbed_time = field.time;
        return false;
    }

    const NodeIndex node = argmax_node(field);
    const double h = field.h();
    RefPoint ref{node.i * h, node.j * h};
    if (options_.refine) {
        ref.v += h * parabolic_offset(field.at(node.i - 1, node.j), field.at(node.i, node.j), field.at(node.i + 1, node.j));
        ref.w += h * parabolic_offset(field.at(node.i, node.j - 1), field.at(node.i, node.j), field.at(node.i, node.j + 1));
    }
    const double value = std::max(0.0, field(node.i, node.j));

    if (!path_.entries.empty()) {
        const NodeIndex prev = path_.entries.back().node;
        const int jump = std::max(std::abs(node.i - prev.i), std::abs(node.j - prev.j));
        if (jump > options_.jump_cells) {
            const double other = second_peak(field, node, options_.jump_cells);
            if (other < options_.bimodal_ratio * value) {
                std::ostringstream msg;
                msg << "t=" << field.time << ": maximizer jumped " << jump
                    << " cells without a competing peak (second peak ratio " << (value > 0 ? other / value : 0.0)
                    << ")";
                path_.warnings.push_back(msg.str());
            }
        }
    }

    path_.entries.push_back({field.time, from_reference(ref, domain_), value, node});
    return true;
}

ProbablePath most_probable_path(const SolveResult& result, const PathOptions& options) {
    if (result.snapshots.size() < 2) throw std::invalid_argument("most_probable_path: need at least two snapshots");
    PathTracker tracker(result.domain, options);
    for (const auto& snapshot : result.snapshots) {
        if (!tracker.add(snapshot)) break;
    }
    return tracker.take();
}

TippingOutcome tipping_time(const ProbablePath& path, double k_u, double cap) {
    if (path.entries.empty()) throw std::invalid_argument("tipping_time: empty path");
    if (!(cap > 0.0)) throw std::invalid_argument("tipping_time: cap must be positive");
    TippingOutcome out;
    out.cap = cap;
    for (const auto& e : path.entries) {
        if (e.t > cap) break;
        if (e.x.k >= k_u) {
            out.kind = TippingKind::Transition;
            out.time = e.t;
            return out;
        }
    }
    return out;
}

Point metastable_state(const ProbablePath& path, std::size_t window) {
    if (path.entries.empty()) throw std::invalid_argument("metastable_state: empty path");
    const std::size_t n = path.entries.size();
    if (window == 0) window = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))));
    window = std::min(window, n);

    std::vector<double> ks;
    std::vector<double> ss;
    for (std::size_t q = n - window; q < n; ++q) {
        ks.push_back(path.entries[q].x.k);
        ss.push_back(path.entries[q].x.s);
    }
    auto median = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size() / 2;
        return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    };
    return {median(ks), median(ss)};
}

double distance_to_competence(Point state, Point high_state) {
    return std::hypot(high_state.k - state.k, high_state.s - state.s);
}

std::string_view to_string(Classification c) { return c == Classification::LH ? "L-H" : "L-L"; }

SweepRecord classify_cell(double alpha, double eps, const CellRunner& runner) {
    SweepRecord record;
    record.alpha = alpha;
    record.eps = eps;
    record.tipping.cap = runner.horizon;

    const double k_u = runner.landmarks.saddle.k;
    PathOptions path_options = runner.path_options;
    path_options.saddle = runner.landmarks.saddle;
    PathTracker tracker(runner.domain, path_options);

    SolveOptions options;
    options.keep_snapshots = false;
    options.on_record = [&](const DensityField& field) {
        if (!tracker.add(field)) return false;
        if (runner.stop_on_crossing && tracker.path().entries.back().x.k >= k_u) return false;
        return true;
    };

    try {
        const SolveResult result = runner.run(NoiseSpec::isotropic(alpha, eps), options);
        if (result.status == SolveStatus::Aborted) {
            record.status = "failed: " + result.message;
            return record;
        }
    } catch (const std::exception& e) {
        record.status = std::string("failed: ") + e.what();
        return record;
    }

    const ProbablePath path = tracker.take();
    if (path.entries.empty()) {
        record.status = "failed: empty path";
        return record;
    }
    record.tipping = tipping_time(path, k_u, runner.horizon);
    record.classification = record.tipping.transitioned() ? Classification::LH : Classification::LL;
    record.terminal_state = metastable_state(path, runner.metastable_window);
    record.distance_d = distance_to_competence(record.terminal_state, runner.landmarks.high);
    if (runner.on_path) runner.on_path(record, path);
    return record;
}

std::vector<SweepRecord> sweep(const std::vector<double>& alphas, const std::vector<double>& epsilons,
                               const CellRunner& runner, const SweepOptions& options) {
    if (alphas.empty() || epsilons.empty()) throw std::invalid_argument("sweep: empty parameter list");
    for (double a : alphas) require_alpha(a);
    for (double e : epsilons) {
        if (!(e >= 0.0)) throw std::domain_error("sweep: eps must be nonnegative");
    }

    const std::size_t total = alphas.size() * epsilons.size();
    std::vector<SweepRecord> records(total);
    std::vector<std::size_t> pending;
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
            const std::size_t idx = a * epsilons.size() + e;
            const auto found = std::find_if(options.completed.begin(), options.completed.end(), [&](const SweepRecord& r) {
                return r.alpha == alphas[a] && r.eps == epsilons[e];
            });
            if (found != options.completed.end()) {
                records[idx] = *found;
            } else {
                pending.push_back(idx);
            }
        }
    }

    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    std::size_t done = total - pending.size();

    auto worker = [&] {
        for (std::size_t q = next++; q < pending.size(); q = next++) {
            const std::size_t idx = pending[q];
            SweepRecord r = classify_cell(alphas[idx / epsilons.size()], epsilons[idx % epsilons.size()], runner);
            std::lock_guard lock(report_mutex);
            records[idx] = r;
            ++done;
            if (options.on_cell) options.on_cell(records[idx], done, total);
        }
    };

    const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(pending.size())));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return records;
}

}  // namespace levytip
