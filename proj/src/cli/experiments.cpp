#include "levytip/experiments.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "json.hpp"
#include "levytip/analysis.hpp"
#include "levytip/io.hpp"
#include "levytip/montecarlo.hpp"

#ifndef LEVYTIP_VERSION
#define LEVYTIP_VERSION "unknown"
#endif

namespace levytip::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;
constexpr int kSweepCsvVersion = 1;

void write_text(const fs::path& file, const std::string& text) {
    fs::create_directories(file.parent_path());
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, file);
}

template <class Writer>
void write_with(const fs::path& file, Writer&& writer) {
    std::ostringstream out;
    writer(out);
    write_text(file, out.str());
}

std::string time_tag(double t) { return "t" + io::format_double(t); }

json point_json(Point x) { return json::array({x.k, x.s}); }

json solve_json(const std::string& label, const SolveResult& r) {
    json j;
    j["label"] = label;
    j["status"] = r.status == SolveStatus::Completed ? "completed"
                  : r.status == SolveStatus::StoppedEarly ? "stopped-early"
                                                         : "aborted";
    if (!r.message.empty()) j["message"] = r.message;
    j["steps"] = r.steps_taken;
    j["dt"] = r.dt_used;
    j["initial_mass"] = r.mass.initial_mass;
    j["final_mass"] = r.mass.final_mass;
    j["worst_mass_increase"] = r.mass.worst_increase;
    j["mass_increase_violations"] = r.mass.increase_violations;
    j["min_value"] = r.mass.min_value;
    j["max_value"] = r.mass.max_value;
    j["worst_undershoot_ratio"] = r.mass.worst_undershoot_ratio;
    j["quality_ok"] = r.quality_ok();
    return j;
}

// Shared state of one invocation: output location, diagnostics and manifest.
struct Context {
    Context(const RunConfig& c, fs::path o) : config(c), out(std::move(o)) {}

    const RunConfig& config;
    fs::path out;
    int workers = 1;
    std::mutex mutex;
    json solves = json::array();
    json results = json::object();
    bool failed = false;
    std::vector<std::string> failures;

    void record_solve(const std::string& label, const SolveResult& r) {
        std::lock_guard lock(mutex);
        solves.push_back(solve_json(label, r));
        if (r.status == SolveStatus::Aborted) {
            failed = true;
            failures.push_back(label + ": " + r.message);
        }
    }
    void fail(const std::string& what) {
        std::lock_guard lock(mutex);
        failed = true;
        failures.push_back(what);
    }
};

DensityField make_initial(const RunConfig& c, Point x) {
    const GridSpec grid = c.grid();
    if (c.initial_shape == InitialShape::Gaussian) {
        return gaussian_initial(x, c.domain, grid,
                                c.initial_width > 0.0 ? std::optional<double>(c.initial_width) : std::nullopt);
    }
    return delta_initial(x, c.domain, grid);
}

SolveOptions base_options(const RunConfig& c) {
    SolveOptions o;
    o.c_stab = c.c_stab;
    o.output_times = c.output_times();
    return o;
}

PathOptions path_options(const RunConfig& c, const BistableLandmarks& marks) {
    PathOptions o;
    o.saddle = marks.saddle;
    o.refine = c.refine;
    return o;
}

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t q = next++; q < n; q = next++) fn(q);
    };
    const int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (count == 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < count; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

json path_summary(const ProbablePath& path, const RunConfig& c, const BistableLandmarks& marks) {
    json j;
    const auto capped = tipping_time(path, marks.saddle.k, c.tipping_cap);
    const auto horizon = tipping_time(path, marks.saddle.k, c.T);
    j["k_u"] = marks.saddle.k;
    j["tipping_time_capped"] = capped.transitioned() ? json(capped.time) : json(nullptr);
    j["tipping_cap"] = c.tipping_cap;
    j["classification"] = horizon.transitioned() ? "L-H" : "L-L";
    const Point state = metastable_state(path, static_cast<std::size_t>(c.metastable_window));
    j["metastable_state"] = point_json(state);
    j["distance_d"] = distance_to_competence(state, marks.high);
    j["path_points"] = path.entries.size();
    j["absorbed"] = path.absorbed;
    if (!path.warnings.empty()) j["warnings"] = path.warnings;
    return j;
}

std::string path_script(const std::string& csv, double k_u) {
    std::ostringstream g;
    g << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set multiplot layout 1,2\n"
      << "set xlabel 't'; set ylabel 'k'\n"
      << "plot '" << csv << "' using 1:2 with lines title 'k(t)', " << io::format_double(k_u)
      << " with lines dashtype 2 title 'k_u'\n"
      << "set xlabel 'k'; set ylabel 's'\n"
      << "plot '" << csv << "' using 2:3 with lines title 'path'\n"
      << "unset multiplot\n";
    return g.str();
}

// single-run and fig3-snapshots
void run_single(Context& ctx, const BistableLandmarks& marks) {
    const RunConfig& c = ctx.config;
    const NoiseSpec noise = c.noise();
    const bool with_csv = c.kind == ExperimentKind::Fig3Snapshots;

    PathTracker tracker(c.domain, path_options(c, marks));
    std::vector<std::string> snapshot_files;
    SolveOptions options = base_options(c);
    options.keep_snapshots = false;
    options.on_record = [&](const DensityField& field) {
        for (double t : c.snapshot_times) {
            if (std::abs(field.time - t) > 1e-9 * std::max(1.0, t)) continue;
            const fs::path bin = ctx.out / "snapshots" / (time_tag(t) + ".nfpe");
            fs::create_directories(bin.parent_path());
            io::write_snapshot(bin, field, c.domain, noise);
            if (with_csv) {
                write_with(ctx.out / "snapshots" / (time_tag(t) + ".csv"),
                           [&](std::ostream& o) { io::write_snapshot_csv(o, field, c.domain); });
                snapshot_files.push_back("snapshots/" + time_tag(t) + ".csv");
            }
        }
        tracker.add(field);
        return true;
    };

    const SolveResult result =
        solve(make_initial(c, c.initial), c.params, c.transform, noise, c.domain, c.grid(), options);
    ctx.record_solve("single", result);
    io::write_snapshot(ctx.out / "final.nfpe", result.snapshots.back(), c.domain, noise);

    const ProbablePath path = tracker.take();
    write_with(ctx.out / "path.csv", [&](std::ostream& o) { io::write_path_csv(o, path); });
    write_text(ctx.out / "path.gp", path_script("path.csv", marks.saddle.k));
    if (!path.entries.empty()) ctx.results["path"] = path_summary(path, c, marks);

    if (with_csv && !snapshot_files.empty()) {
        std::ostringstream g;
        g << "set datafile separator ','\nset key autotitle columnhead\nset pm3d map\nset xlabel 'k'\nset ylabel 's'\n";
        for (const auto& f : snapshot_files) {
            g << "set title '" << f << "'\nsplot '" << f << "' using 5:6:7 with pm3d notitle\npause -1\n";
        }
        write_text(ctx.out / "snapshots.gp", g.str());
    }
}

std::vector<SweepRecord> load_completed(const fs::path& cells, double horizon) {
    std::vector<SweepRecord> done;
    if (!fs::exists(cells)) return done;
    for (const auto& entry : fs::directory_iterator(cells)) {
        const fs::path rec = entry.path() / "record.csv";
        if (!fs::exists(rec)) continue;
        std::ifstream in(rec);
        try {
            for (auto& r : io::read_sweep_csv(in, horizon)) {
                if (r.ok()) done.push_back(r);
            }
        } catch (const std::exception& e) {
            spdlog::warn("ignoring unreadable {}: {}", rec.string(), e.what());
        }
    }
    return done;
}

void write_sweep_plots(Context& ctx, const std::vector<SweepRecord>& records) {
    const RunConfig& c = ctx.config;
    const auto by_eps = [&](auto&& row) {
        std::ostringstream d;
        for (std::size_t e = 0; e < c.epsilons.size(); ++e) {
            if (e > 0) d << "\n\n";
            d << "# eps = " << io::format_double(c.epsilons[e]) << '\n';
            for (const auto& r : records) {
                if (r.eps == c.epsilons[e] && r.ok()) d << row(r) << '\n';
            }
        }
        return d.str();
    };
    const auto plot_blocks = [&](const std::string& data) {
        std::string cmd = "plot ";
        for (std::size_t e = 0; e < c.epsilons.size(); ++e) {
            if (e > 0) cmd += ", \\\n     ";
            cmd += "'" + data + "' index " + std::to_string(e) + " using 1:3 with linespoints title 'eps=" +
                   io::format_double(c.epsilons[e]) + "'";
        }
        return cmd + "\n";
    };

    switch (c.kind) {
        case ExperimentKind::Fig7TippingSweep: {
            write_text(ctx.out / "tipping.dat", by_eps([&](const SweepRecord& r) {
                const bool hit = r.tipping.transitioned() && r.tipping.time <= c.tipping_cap;
                return io::format_double(r.alpha) + ' ' + io::format_double(r.eps) + ' ' +
                       io::format_double(hit ? r.tipping.time : c.tipping_cap) + ' ' + (hit ? "1" : "0");
            }));
            std::ostringstream g;
            g << "set xlabel 'alpha'\nset ylabel 'tipping time'\nset yrange [0:" << io::format_double(c.tipping_cap)
              << "]\n"
              << plot_blocks("tipping.dat");
            write_text(ctx.out / "tipping.gp", g.str());
            break;
        }
        case ExperimentKind::Fig5PhaseDiagram: {
            std::ostringstream d;
            d << "# alpha eps class (1 = L-H)\n";
            for (const auto& r : records) {
                if (r.ok()) {
                    d << io::format_double(r.alpha) << ' ' << io::format_double(r.eps) << ' '
                      << (r.classification == Classification::LH ? 1 : 0) << '\n';
                }
            }
            write_text(ctx.out / "phase.dat", d.str());
            write_text(ctx.out / "phase.gp",
                       "set xlabel 'alpha'\nset ylabel 'eps'\nset cbrange [0:1]\nset palette defined (0 'blue', 1 "
                       "'red')\nplot 'phase.dat' using 1:2:3 with points pt 5 ps 2 palette notitle\n");
            break;
        }
        case ExperimentKind::Fig9DistanceSweep: {
            write_text(ctx.out / "distance.dat", by_eps([&](const SweepRecord& r) {
                return io::format_double(r.alpha) + ' ' + io::format_double(r.eps) + ' ' +
                       io::format_double(r.distance_d);
            }));
            std::ostringstream g;
            g << "set xlabel 'alpha'\nset ylabel 'd'\n" << plot_blocks("distance.dat");
            write_text(ctx.out / "distance.gp", g.str());
            break;
        }
        case ExperimentKind::Fig4Trajectories: {
            std::ostringstream g;
            g << "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\nset ylabel 'k'\nplot ";
            bool first = true;
            for (const auto& r : records) {
                if (!r.ok()) continue;
                const std::string tag = cell_tag(r.alpha, r.eps);
                g << (first ? "" : ", \\\n     ") << "'cells/" << tag << "/path.csv' using 1:2 with lines title '"
                  << tag << "'";
                first = false;
            }
            g << '\n';
            write_text(ctx.out / "trajectories.gp", g.str());
            break;
        }
        default:
            break;
    }
}

void run_sweep(Context& ctx, const BistableLandmarks& marks) {
    const RunConfig& c = ctx.config;
    const fs::path cells = ctx.out / "cells";
    const GridSpec grid = c.grid();
    const DensityField initial = make_initial(c, c.initial);

    CellRunner runner;
    runner.domain = c.domain;
    runner.landmarks = marks;
    runner.horizon = c.T;
    runner.stop_on_crossing = c.stop_on_crossing;
    runner.metastable_window = static_cast<std::size_t>(c.metastable_window);
    runner.path_options = path_options(c, marks);
    runner.run = [&](const NoiseSpec& noise, const SolveOptions& given) {
        SolveOptions o = given;
        const SolveOptions base = base_options(c);
        o.c_stab = base.c_stab;
        o.output_times = base.output_times;
        SolveResult r = solve(initial, c.params, c.transform, noise, c.domain, grid, o);
        ctx.record_solve(cell_tag(noise.alpha, noise.eps_k), r);
        return r;
    };
    runner.on_path = [&](const SweepRecord& record, const ProbablePath& path) {
        const fs::path dir = cells / cell_tag(record.alpha, record.eps);
        write_with(dir / "path.csv", [&](std::ostream& o) { io::write_path_csv(o, path); });
        write_with(dir / "record.csv", [&](std::ostream& o) {
            io::write_sweep_header(o);
            io::write_sweep_row(o, record);
        });
    };

    SweepOptions options;
    options.workers = ctx.workers;
    options.completed = load_completed(cells, c.T);
    const std::size_t resumed = options.completed.size();
    if (resumed > 0) spdlog::info("resuming: {} completed cell(s) found", resumed);
    options.on_cell = [&](const SweepRecord& r, std::size_t done, std::size_t total) {
        spdlog::info("[{}/{}] alpha={} eps={} -> {}{}", done, total, r.alpha, r.eps,
                     r.ok() ? std::string(to_string(r.classification)) : r.status,
                     r.ok() && r.tipping.transitioned() ? " at t=" + io::format_double(r.tipping.time) : "");
        if (!r.ok()) ctx.fail(cell_tag(r.alpha, r.eps) + ": " + r.status);
    };

    const auto records = sweep(c.alphas, c.epsilons, runner, options);
    write_with(ctx.out / "sweep.csv", [&](std::ostream& o) { io::write_sweep_csv(o, records); });
    write_sweep_plots(ctx, records);

    ctx.results["cells"] = records.size();
    ctx.results["resumed_cells"] = resumed;
    ctx.results["failed_cells"] =
        std::count_if(records.begin(), records.end(), [](const SweepRecord& r) { return !r.ok(); });
}

void run_ring(Context& ctx, const BistableLandmarks& marks) {
    const RunConfig& c = ctx.config;
    const NoiseSpec noise = c.noise();
    const GridSpec grid = c.grid();

    struct Outcome {
        Point start;
        Point state;
        double distance = 0.0;
        std::string status = "ok";
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(c.ring_count));

    parallel_for(outcomes.size(), ctx.workers, [&](std::size_t q) {
        const double angle = 2.0 * M_PI * static_cast<double>(q) / c.ring_count;
        Outcome& out = outcomes[q];
        out.start = {c.initial.k + c.ring_radius * std::cos(angle), c.initial.s + c.ring_radius * std::sin(angle)};
        try {
            PathTracker tracker(c.domain, path_options(c, marks));
            SolveOptions options = base_options(c);
            options.keep_snapshots = false;
            options.on_record = [&](const DensityField& f) { return tracker.add(f); };
            const SolveResult r = solve(make_initial(c, out.start), c.params, c.transform, noise, c.domain, grid, options);
            ctx.record_solve("ic" + std::to_string(q), r);
            if (r.status == SolveStatus::Aborted) {
                out.status = "failed: " + r.message;
                return;
            }
            const ProbablePath path = tracker.take();
            write_with(ctx.out / "cells" / ("ic" + std::to_string(q)) / "path.csv",
                       [&](std::ostream& o) { io::write_path_csv(o, path); });
            out.state = metastable_state(path, static_cast<std::size_t>(c.metastable_window));
            out.distance = distance_to_competence(out.state, marks.high);
        } catch (const std::exception& e) {
            out.status = std::string("failed: ") + e.what();
            ctx.fail("ic" + std::to_string(q) + ": " + e.what());
        }
    });

    std::ostringstream csv;
    csv << "ic,k0,s0,kT,sT,distance_d,status\n";
    double diameter = 0.0;
    for (std::size_t q = 0; q < outcomes.size(); ++q) {
        const auto& o = outcomes[q];
        csv << q << ',' << io::format_double(o.start.k) << ',' << io::format_double(o.start.s) << ','
            << io::format_double(o.state.k) << ',' << io::format_double(o.state.s) << ','
            << io::format_double(o.distance) << ',' << o.status << '\n';
        for (std::size_t r = 0; r < q; ++r) {
            if (o.status == "ok" && outcomes[r].status == "ok") {
                diameter = std::max(diameter, distance_to_competence(o.state, outcomes[r].state));
            }
        }
    }
    write_text(ctx.out / "metastable.csv", csv.str());
    ctx.results["metastable_cluster_diameter"] = diameter;

    std::ostringstream g;
    g << "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'k'\nset ylabel 's'\nplot ";
    for (std::size_t q = 0; q < outcomes.size(); ++q) {
        g << (q ? ", \\\n     " : "") << "'cells/ic" << q << "/path.csv' using 2:3 with lines title 'ic" << q << "'";
    }
    g << ", \\\n     'metastable.csv' using 4:5 with points pt 7 title 'terminal'\n";
    write_text(ctx.out / "trajectories.gp", g.str());
}

void write_marginals(const fs::path& file, const DensityField& fpe, const DensityField& mc, const DomainBox& domain,
                     bool along_k) {
    const int I = fpe.half_resolution();
    const double h = fpe.h();
    const double mf = fpe.total_mass();
    const double mm = mc.total_mass();
    std::ostringstream d;
    d << (along_k ? "# k" : "# s") << " fpe mc (unit-mass marginals on the reference square)\n";
    for (int i = -I + 1; i < I; ++i) {
        double a = 0.0;
        double b = 0.0;
        for (int j = -I + 1; j < I; ++j) {
            a += along_k ? fpe(i, j) : fpe(j, i);
            b += along_k ? mc(i, j) : mc(j, i);
        }
        const Point x = from_reference({i * h, i * h}, domain);
        d << io::format_double(along_k ? x.k : x.s) << ' ' << io::format_double(mf > 0 ? a * h / mf : 0.0) << ' '
          << io::format_double(mm > 0 ? b * h / mm : 0.0) << '\n';
    }
    write_text(file, d.str());
}

void run_mc(Context& ctx) {
    const RunConfig& c = ctx.config;
    const NoiseSpec noise = c.noise();
    const GridSpec grid = c.grid();

    // Both layers start from the grid node carrying the discrete delta.
    const RefPoint r = to_reference(c.initial, c.domain);
    const int I = grid.half_resolution;
    const Point start = from_reference({nearest_index(r.v, I) * grid.h(), nearest_index(r.w, I) * grid.h()}, c.domain);

    SolveOptions options = base_options(c);
    options.keep_snapshots = false;
    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult fpe = solve(make_initial(c, start), c.params, c.transform, noise, c.domain, grid, options);
    const double fpe_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.record_solve("fpe", fpe);
    const DensityField& p_fpe = fpe.snapshots.back();
    io::write_snapshot(ctx.out / "fpe_final.nfpe", p_fpe, c.domain, noise);

    EnsembleSettings settings;
    settings.n_paths = c.n_paths;
    settings.dt = c.mc_dt;
    settings.T = c.T;
    settings.seed = c.seed;
    settings.workers = ctx.workers;
    settings.keep_trajectories = c.keep_trajectories;
    settings.trajectory_stride = c.trajectory_stride;
    const auto t1 = std::chrono::steady_clock::now();
    const PathEnsemble ensemble = simulate_ensemble(start, settings, c.params, c.transform, noise, c.domain);
    const double mc_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    const DensityField p_mc = empirical_density(ensemble, grid, c.domain);
    io::write_snapshot(ctx.out / "mc_density.nfpe", p_mc, c.domain, noise);
    write_text(ctx.out / "ensemble.json", io::ensemble_summary_json(ensemble, noise, c.domain, start) + "\n");
    if (c.keep_trajectories > 0) {
        write_with(ctx.out / "trajectories.csv", [&](std::ostream& o) { io::write_trajectory_csv(o, ensemble); });
    }

    const double mass_fpe = p_fpe.total_mass();
    const double surviving = ensemble.surviving_fraction();
    const double sd = std::sqrt(mass_fpe * (1.0 - mass_fpe) / static_cast<double>(ensemble.n_paths));
    json cmp;
    cmp["start"] = point_json(start);
    cmp["fpe_mass"] = mass_fpe;
    cmp["mc_surviving_fraction"] = surviving;
    cmp["binomial_sd"] = sd;
    cmp["mass_gap_in_sd"] = sd > 0 ? std::abs(surviving - mass_fpe) / sd : 0.0;
    cmp["mass_within_3sd"] = std::abs(surviving - mass_fpe) <= 3.0 * sd;
    cmp["normalized_l1"] = surviving > 0.0 ? json(normalized_l1(p_mc, p_fpe)) : json(nullptr);
    cmp["fpe_seconds"] = fpe_seconds;
    cmp["mc_seconds"] = mc_seconds;
    write_text(ctx.out / "comparison.json", cmp.dump(2) + "\n");
    ctx.results["comparison"] = cmp;

    if (surviving > 0.0) {
        write_marginals(ctx.out / "marginal_k.dat", p_fpe, p_mc, c.domain, true);
        write_marginals(ctx.out / "marginal_s.dat", p_fpe, p_mc, c.domain, false);
        write_text(ctx.out / "marginals.gp",
                   "set multiplot layout 1,2\nset xlabel 'k'\nplot 'marginal_k.dat' using 1:2 with lines title 'FPE', "
                   "'' using 1:3 with steps title 'MC'\nset xlabel 's'\nplot 'marginal_s.dat' using 1:2 with lines "
                   "title 'FPE', '' using 1:3 with steps title 'MC'\nunset multiplot\n");
    }
}

json artifact_list(const fs::path& out) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), out);
        if (rel == "manifest.json" || entry.path().extension() == ".tmp") continue;
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    json list = json::array();
    for (const auto& rel : files) {
        list.push_back({{"path", rel.generic_string()},
                        {"bytes", fs::file_size(out / rel)},
                        {"sha256", sha256_file(out / rel)}});
    }
    return list;
}

}  // namespace

std::string cell_tag(double alpha, double eps) { return "a" + io::format_double(alpha) + "_e" + io::format_double(eps); }

std::string sha256_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    EVP_MD_CTX* md = EVP_MD_CTX_new();
    if (md == nullptr || EVP_DigestInit_ex(md, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(md);
        throw std::runtime_error("sha256 init failed");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(md, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(md, digest, &len);
    EVP_MD_CTX_free(md);
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    for (unsigned int q = 0; q < len; ++q) {
        s.push_back(hex[digest[q] >> 4]);
        s.push_back(hex[digest[q] & 0xF]);
    }
    return s;
}

int resolve_workers(const RunConfig& config, const RunEnvironment& env) {
    if (env.workers) return std::max(1, *env.workers);
    if (const char* value = std::getenv("LEVYTIP_WORKERS")) {
        try {
            return std::max(1, std::stoi(value));
        } catch (const std::exception&) {
            spdlog::warn("ignoring LEVYTIP_WORKERS='{}'", value);
        }
    }
    return config.workers;
}

RunReport run_experiment(const RunConfig& config, const RunEnvironment& env) {
    const auto problems = validate(config);
    if (!problems.empty()) throw ConfigError(problems);

    const auto start = std::chrono::steady_clock::now();
    Context ctx(config, env.output.value_or(fs::path(config.output)));
    ctx.workers = resolve_workers(config, env);
    fs::create_directories(ctx.out);
    write_text(ctx.out / "config.ini", serialize_config(config));
    spdlog::info("{} -> {} ({} worker{})", to_string(config.kind), ctx.out.string(), ctx.workers,
                 ctx.workers == 1 ? "" : "s");

    json manifest;
    manifest["manifest_version"] = kManifestVersion;
    manifest["experiment"] = std::string(to_string(config.kind));
    manifest["command_line"] = env.command_line;
    manifest["config"] = serialize_config(config);
    manifest["versions"] = {
        {"levytip", LEVYTIP_VERSION},
        {"snapshot_format", io::kSnapshotVersion},
        {"sweep_csv", kSweepCsvVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"compiler", __VERSION__},
    };
    manifest["workers"] = ctx.workers;

    std::string status = "completed";
    try {
        switch (config.kind) {
            case ExperimentKind::McCrosscheck:
                run_mc(ctx);
                break;
            default: {
                const BistableLandmarks marks = bistable_landmarks(config.params, config.transform);
                manifest["landmarks"] = {{"low", point_json(marks.low)},
                                         {"saddle", point_json(marks.saddle)},
                                         {"high", point_json(marks.high)}};
                if (config.kind == ExperimentKind::SingleRun || config.kind == ExperimentKind::Fig3Snapshots) {
                    run_single(ctx, marks);
                } else if (config.kind == ExperimentKind::Fig8InitialConditions) {
                    run_ring(ctx, marks);
                } else {
                    run_sweep(ctx, marks);
                }
            }
        }
    } catch (const std::exception& e) {
        ctx.fail(e.what());
        status = "failed";
    }
    if (ctx.failed && status == "completed") status = "partial";

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["status"] = status;
    if (!ctx.failures.empty()) manifest["failures"] = ctx.failures;
    manifest["wall_seconds"] = wall;
    manifest["results"] = ctx.results;
    manifest["solves"] = ctx.solves;
    manifest["artifacts"] = artifact_list(ctx.out);
    write_text(ctx.out / "manifest.json", manifest.dump(2) + "\n");

    RunReport report;
    report.output = ctx.out;
    report.exit_code = ctx.failed ? 1 : 0;
    report.summary = status + " in " + io::format_double(std::round(wall * 100) / 100) + " s";
    for (const auto& f : ctx.failures) spdlog::error("{}", f);
    return report;
}

}  // namespace levytip::cli
