#include "levytip/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "levytip/io.hpp"

namespace levytip::cli {

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kKindNames[] = {
    {ExperimentKind::SingleRun, "single-run"},
    {ExperimentKind::Fig3Snapshots, "fig3-snapshots"},
    {ExperimentKind::Fig4Trajectories, "fig4-trajectories"},
    {ExperimentKind::Fig7TippingSweep, "fig7-tipping-sweep"},
    {ExperimentKind::Fig5PhaseDiagram, "fig5-phase-diagram"},
    {ExperimentKind::Fig8InitialConditions, "fig8-initial-conditions"},
    {ExperimentKind::Fig9DistanceSweep, "fig9-distance-sweep"},
    {ExperimentKind::McCrosscheck, "mc-crosscheck"},
};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

bool parse_real(const std::string& text, double& out) {
    try {
        out = io::parse_double(trim(text));
    } catch (const io::FormatError&) {
        return false;
    }
    return std::isfinite(out);
}

template <class Int>
bool parse_integer(const std::string& text, Int& out) {
    const std::string t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc{} && ptr == t.data() + t.size() && !t.empty();
}

bool parse_bool(const std::string& text, bool& out) {
    const std::string t = trim(text);
    if (t == "true" || t == "yes" || t == "on" || t == "1") {
        out = true;
    } else if (t == "false" || t == "no" || t == "off" || t == "0") {
        out = false;
    } else {
        return false;
    }
    return true;
}

std::string join(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t q = 0; q < xs.size(); ++q) {
        if (q > 0) out += ", ";
        out += io::format_double(xs[q]);
    }
    return out;
}

using Getter = std::function<std::optional<std::string>(const RunConfig&)>;
using Setter = std::function<std::string(RunConfig&, const std::string&)>;

struct Field {
    std::string section;
    std::string key;
    Getter get;
    Setter set;
};

// Accessors are generic lambdas returning a reference into the config.
template <class Access>
Field real(std::string section, std::string key, Access acc) {
    return {std::move(section), std::move(key),
            [acc](const RunConfig& c) { return std::optional<std::string>(io::format_double(acc(c))); },
            [acc](RunConfig& c, const std::string& v) -> std::string {
                double x = 0.0;
                if (!parse_real(v, x)) return "expected a number, got '" + trim(v) + "'";
                acc(c) = x;
                return {};
            }};
}

template <class Access>
Field optional_real(std::string section, std::string key, Access acc) {
    return {std::move(section), std::move(key),
            [acc](const RunConfig& c) -> std::optional<std::string> {
                const auto& value = acc(c);
                if (!value) return std::nullopt;
                return io::format_double(*value);
            },
            [acc](RunConfig& c, const std::string& v) -> std::string {
                double x = 0.0;
                if (!parse_real(v, x)) return "expected a number, got '" + trim(v) + "'";
                acc(c) = x;
                return {};
            }};
}

template <class Access>
Field integer(std::string section, std::string key, Access acc) {
    return {std::move(section), std::move(key),
            [acc](const RunConfig& c) { return std::optional<std::string>(std::to_string(acc(c))); },
            [acc](RunConfig& c, const std::string& v) -> std::string {
                std::remove_reference_t<decltype(acc(c))> x{};
                if (!parse_integer(v, x)) return "expected an integer, got '" + trim(v) + "'";
                acc(c) = x;
                return {};
            }};
}

template <class Access>
Field boolean(std::string section, std::string key, Access acc) {
    return {std::move(section), std::move(key),
            [acc](const RunConfig& c) { return std::optional<std::string>(acc(c) ? "true" : "false"); },
            [acc](RunConfig& c, const std::string& v) -> std::string {
                bool x = false;
                if (!parse_bool(v, x)) return "expected true or false, got '" + trim(v) + "'";
                acc(c) = x;
                return {};
            }};
}

template <class Access>
Field real_list(std::string section, std::string key, Access acc) {
    return {std::move(section), std::move(key),
            [acc](const RunConfig& c) -> std::optional<std::string> {
                if (acc(c).empty()) return std::nullopt;
                return join(acc(c));
            },
            [acc](RunConfig& c, const std::string& v) -> std::string {
                std::vector<double> xs;
                std::stringstream ss(v);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    double x = 0.0;
                    if (!parse_real(item, x)) return "expected a comma-separated list of numbers, got '" + trim(v) + "'";
                    xs.push_back(x);
                }
                acc(c) = std::move(xs);
                return {};
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"experiment", "kind",
                     [](const RunConfig& c) { return std::optional<std::string>(std::string(to_string(c.kind))); },
                     [](RunConfig& c, const std::string& v) -> std::string {
                         const auto kind = parse_experiment_kind(trim(v));
                         if (!kind) return "unknown experiment kind '" + trim(v) + "'";
                         c.kind = *kind;
                         return {};
                     }});
        f.push_back({"experiment", "output", [](const RunConfig& c) { return std::optional<std::string>(c.output); },
                     [](RunConfig& c, const std::string& v) -> std::string {
                         c.output = trim(v);
                         return {};
                     }});
        f.push_back(integer("experiment", "seed", [](auto& c) -> auto& { return c.seed; }));
        f.push_back(integer("experiment", "workers", [](auto& c) -> auto& { return c.workers; }));

        f.push_back(real("kinetics", "a_k", [](auto& c) -> auto& { return c.params.a_k; }));
        f.push_back(real("kinetics", "b_k", [](auto& c) -> auto& { return c.params.b_k; }));
        f.push_back(real("kinetics", "b_s", [](auto& c) -> auto& { return c.params.b_s; }));
        f.push_back(real("kinetics", "k0", [](auto& c) -> auto& { return c.params.k0; }));
        f.push_back(real("kinetics", "k1", [](auto& c) -> auto& { return c.params.k1; }));
        f.push_back(integer("kinetics", "n", [](auto& c) -> auto& { return c.params.n; }));
        f.push_back(integer("kinetics", "p", [](auto& c) -> auto& { return c.params.p; }));

        f.push_back(real("transform", "c_k", [](auto& c) -> auto& { return c.transform.c_k; }));
        f.push_back(real("transform", "c_s", [](auto& c) -> auto& { return c.transform.c_s; }));

        f.push_back(optional_real("noise", "alpha", [](auto& c) -> auto& { return c.alpha; }));
        f.push_back(optional_real("noise", "eps", [](auto& c) -> auto& { return c.eps; }));
        f.push_back(optional_real("noise", "eps_k", [](auto& c) -> auto& { return c.eps_k; }));
        f.push_back(optional_real("noise", "eps_s", [](auto& c) -> auto& { return c.eps_s; }));
        f.push_back(real_list("noise", "alphas", [](auto& c) -> auto& { return c.alphas; }));
        f.push_back(real_list("noise", "epsilons", [](auto& c) -> auto& { return c.epsilons; }));

        f.push_back(real("domain", "a", [](auto& c) -> auto& { return c.domain.a; }));
        f.push_back(real("domain", "b", [](auto& c) -> auto& { return c.domain.b; }));
        f.push_back(real("domain", "c", [](auto& c) -> auto& { return c.domain.c; }));
        f.push_back(real("domain", "d", [](auto& c) -> auto& { return c.domain.d; }));

        f.push_back(integer("grid", "I", [](auto& c) -> auto& { return c.half_resolution; }));
        f.push_back(real("grid", "dt", [](auto& c) -> auto& { return c.dt; }));
        f.push_back(real("grid", "T", [](auto& c) -> auto& { return c.T; }));
        f.push_back(integer("grid", "record_stride", [](auto& c) -> auto& { return c.record_stride; }));
        f.push_back(real("grid", "output_interval", [](auto& c) -> auto& { return c.output_interval; }));
        f.push_back(real("grid", "c_stab", [](auto& c) -> auto& { return c.c_stab; }));
        f.push_back(real_list("grid", "snapshot_times", [](auto& c) -> auto& { return c.snapshot_times; }));

        f.push_back(real("initial", "k", [](auto& c) -> auto& { return c.initial.k; }));
        f.push_back(real("initial", "s", [](auto& c) -> auto& { return c.initial.s; }));
        f.push_back({"initial", "shape",
                     [](const RunConfig& c) {
                         return std::optional<std::string>(c.initial_shape == InitialShape::Delta ? "delta" : "gaussian");
                     },
                     [](RunConfig& c, const std::string& v) -> std::string {
                         const std::string t = trim(v);
                         if (t == "delta") {
                             c.initial_shape = InitialShape::Delta;
                         } else if (t == "gaussian") {
                             c.initial_shape = InitialShape::Gaussian;
                         } else {
                             return "expected delta or gaussian, got '" + t + "'";
                         }
                         return {};
                     }});
        f.push_back(real("initial", "width", [](auto& c) -> auto& { return c.initial_width; }));
        f.push_back(real("initial", "ring_radius", [](auto& c) -> auto& { return c.ring_radius; }));
        f.push_back(integer("initial", "ring_count", [](auto& c) -> auto& { return c.ring_count; }));

        f.push_back(real("analysis", "tipping_cap", [](auto& c) -> auto& { return c.tipping_cap; }));
        f.push_back(boolean("analysis", "stop_on_crossing", [](auto& c) -> auto& { return c.stop_on_crossing; }));
        f.push_back(boolean("analysis", "refine", [](auto& c) -> auto& { return c.refine; }));
        f.push_back(integer("analysis", "metastable_window", [](auto& c) -> auto& { return c.metastable_window; }));

        f.push_back(integer("montecarlo", "n_paths", [](auto& c) -> auto& { return c.n_paths; }));
        f.push_back(real("montecarlo", "dt", [](auto& c) -> auto& { return c.mc_dt; }));
        f.push_back(integer("montecarlo", "keep_trajectories", [](auto& c) -> auto& { return c.keep_trajectories; }));
        f.push_back(integer("montecarlo", "trajectory_stride", [](auto& c) -> auto& { return c.trajectory_stride; }));
        return f;
    }();
    return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields()) {
        if (f.section == section && f.key == key) return &f;
    }
    return nullptr;
}

bool known_section(const std::string& section) {
    return std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return f.section == section; });
}

bool needs_single_noise(ExperimentKind kind) {
    return kind == ExperimentKind::SingleRun || kind == ExperimentKind::Fig3Snapshots ||
           kind == ExperimentKind::Fig8InitialConditions || kind == ExperimentKind::McCrosscheck;
}

bool needs_landmarks(ExperimentKind kind) { return kind != ExperimentKind::McCrosscheck; }

template <class F>
void collect(std::vector<std::string>& problems, const std::string& prefix, F&& check) {
    try {
        check();
    } catch (const std::exception& e) {
        problems.push_back(prefix + e.what());
    }
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

bool is_sweep(ExperimentKind kind) {
    return kind == ExperimentKind::Fig4Trajectories || kind == ExperimentKind::Fig7TippingSweep ||
           kind == ExperimentKind::Fig5PhaseDiagram || kind == ExperimentKind::Fig9DistanceSweep;
}

NoiseSpec RunConfig::noise() const {
    if (!alpha) throw std::invalid_argument("noise.alpha is not set");
    const double base = eps.value_or(0.0);
    return {*alpha, eps_k.value_or(base), eps_s.value_or(base)};
}

GridSpec RunConfig::grid() const {
    GridSpec g;
    g.half_resolution = half_resolution;
    g.dt = dt;
    g.T = T;
    g.record_stride = record_stride > 0 ? record_stride : std::numeric_limits<int>::max();
    return g;
}

std::vector<double> RunConfig::output_times() const {
    std::vector<double> times;
    if (output_interval > 0.0) {
        const auto n = static_cast<long>(std::floor(T / output_interval + 1e-9));
        // Snap to nine decimals so 111 * 0.05 reads back as 5.55.
        for (long q = 1; q <= n; ++q) times.push_back(std::round(static_cast<double>(q) * output_interval * 1e9) / 1e9);
    }
    for (double t : snapshot_times) {
        if (t > 0.0 && t <= T) times.push_back(t);
    }
    std::sort(times.begin(), times.end());
    return times;
}

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
          std::string msg = "invalid configuration (" + std::to_string(problems.size()) + " problem" +
                            (problems.size() == 1 ? "" : "s") + "):";
          for (const auto& p : problems) msg += "\n  - " + p;
          return msg;
      }()),
      problems_(std::move(problems)) {}

std::vector<std::string> validate(const RunConfig& c) {
    std::vector<std::string> problems;
    const std::string kind(to_string(c.kind));

    auto check_alpha = [&](double a, const std::string& where) {
        if (!(a > 0.0 && a < 2.0)) problems.push_back(where + ": alpha must lie in (0,2), got " + io::format_double(a));
    };
    auto check_eps = [&](double e, const std::string& where) {
        if (!(e >= 0.0)) problems.push_back(where + ": eps must be nonnegative, got " + io::format_double(e));
    };

    if (c.alpha) check_alpha(*c.alpha, "noise.alpha");
    if (c.eps) check_eps(*c.eps, "noise.eps");
    if (c.eps_k) check_eps(*c.eps_k, "noise.eps_k");
    if (c.eps_s) check_eps(*c.eps_s, "noise.eps_s");
    for (double a : c.alphas) check_alpha(a, "noise.alphas");
    for (double e : c.epsilons) check_eps(e, "noise.epsilons");

    if (needs_single_noise(c.kind)) {
        if (!c.alpha) problems.push_back("noise.alpha is required for experiment " + kind);
        if (!c.eps && !(c.eps_k && c.eps_s)) problems.push_back("noise.eps is required for experiment " + kind);
    }
    if (is_sweep(c.kind)) {
        if (c.alphas.empty()) problems.push_back("noise.alphas is required for experiment " + kind);
        if (c.epsilons.empty()) problems.push_back("noise.epsilons is required for experiment " + kind);
    }

    if (c.output.empty()) problems.push_back("experiment.output must not be empty");
    if (c.workers < 1) problems.push_back("experiment.workers must be >= 1");

    collect(problems, "kinetics: ", [&] { c.params.validate(); });
    collect(problems, "transform: ", [&] { c.transform.validate(); });
    bool domain_ok = true;
    try {
        c.domain.validate();
    } catch (const std::exception& e) {
        problems.push_back(std::string("domain: ") + e.what());
        domain_ok = false;
    }

    if (c.half_resolution < 2) problems.push_back("grid.I must be >= 2");
    if (!(c.dt >= 0.0)) problems.push_back("grid.dt must be >= 0 (0 selects the stable step)");
    if (!(c.T > 0.0)) problems.push_back("grid.T must be positive");
    if (c.record_stride < 0) problems.push_back("grid.record_stride must be >= 0");
    if (!(c.output_interval >= 0.0)) problems.push_back("grid.output_interval must be >= 0");
    if (!(c.c_stab > 0.0)) problems.push_back("grid.c_stab must be positive");
    for (double t : c.snapshot_times) {
        if (!(t >= 0.0 && t <= c.T)) {
            problems.push_back("grid.snapshot_times: " + io::format_double(t) + " lies outside [0, T]");
        }
    }

    if (domain_ok && !c.domain.contains(c.initial)) problems.push_back("initial point must lie strictly inside the domain");
    if (!(c.initial_width >= 0.0)) problems.push_back("initial.width must be >= 0");
    if (!(c.ring_radius > 0.0)) problems.push_back("initial.ring_radius must be positive");
    if (c.ring_count < 1) problems.push_back("initial.ring_count must be >= 1");

    if (!(c.tipping_cap > 0.0)) problems.push_back("analysis.tipping_cap must be positive");
    if (c.metastable_window < 0) problems.push_back("analysis.metastable_window must be >= 0");

    if (c.n_paths < 1) problems.push_back("montecarlo.n_paths must be >= 1");
    if (!(c.mc_dt > 0.0)) problems.push_back("montecarlo.dt must be positive");
    if (c.keep_trajectories < 0) problems.push_back("montecarlo.keep_trajectories must be >= 0");
    if (c.trajectory_stride < 1) problems.push_back("montecarlo.trajectory_stride must be >= 1");

    if (needs_landmarks(c.kind) && domain_ok) {
        try {
            const auto marks = bistable_landmarks(c.params, c.transform);
            for (const Point& x : {marks.low, marks.saddle, marks.high}) {
                if (!c.domain.contains(x)) {
                    problems.push_back("domain must contain the scaled equilibria; (" + io::format_double(x.k) + ", " +
                                       io::format_double(x.s) + ") lies outside");
                }
            }
        } catch (const std::exception& e) {
            problems.push_back(std::string("kinetics: ") + e.what());
        }
    }
    if (c.kind == ExperimentKind::Fig8InitialConditions && domain_ok) {
        const Point centre = c.initial;
        for (int q = 0; q < c.ring_count; ++q) {
            const double angle = 2.0 * M_PI * q / c.ring_count;
            const Point x{centre.k + c.ring_radius * std::cos(angle), centre.s + c.ring_radius * std::sin(angle)};
            if (!c.domain.contains(x)) {
                problems.push_back("initial ring point " + std::to_string(q) + " lies outside the domain");
            }
        }
    }
    return problems;
}

RunConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({std::string("syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")"});
    }

    RunConfig config;
    std::vector<std::string> problems;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            problems.push_back("key '" + section + "' appears outside any section");
            continue;
        }
        if (!known_section(section)) {
            problems.push_back("unknown section [" + section + "]");
            continue;
        }
        for (const auto& [key, node] : body) {
            const Field* field = find_field(section, key);
            if (field == nullptr) {
                problems.push_back("unknown key '" + key + "' in [" + section + "]");
                continue;
            }
            const std::string err = field->set(config, node.data());
            if (!err.empty()) problems.push_back(section + "." + key + ": " + err);
        }
    }
    const auto invariants = validate(config);
    problems.insert(problems.end(), invariants.begin(), invariants.end());
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return config;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError({"cannot read " + file.string()});
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string serialize_config(const RunConfig& config) {
    std::ostringstream out;
    std::string current;
    for (const auto& f : fields()) {
        const auto value = f.get(config);
        if (!value) continue;
        if (f.section != current) {
            if (!current.empty()) out << '\n';
            out << '[' << f.section << "]\n";
            current = f.section;
        }
        out << f.key << " = " << *value << '\n';
    }
    return out.str();
}

void apply_variant(RunConfig& config, Variant variant) {
    switch (variant) {
        case Variant::AsWritten:
            return;
        case Variant::Coarse:
            config.half_resolution = 25;
            if (config.kind == ExperimentKind::McCrosscheck) {
                config.n_paths = std::min(config.n_paths, 100000L);
            } else {
                config.T = std::min(config.T, config.kind == ExperimentKind::Fig3Snapshots ? 20.0 : 30.0);
            }
            break;
        case Variant::Paper:
            config.half_resolution = 100;
            if (config.kind != ExperimentKind::McCrosscheck) config.T = 100.0;
            break;
    }
    std::erase_if(config.snapshot_times, [&](double t) { return t > config.T; });
}

const std::vector<Preset>& presets() {
    static const std::vector<Preset> list = [] {
        std::vector<Preset> out;
        RunConfig base;
        base.half_resolution = 50;
        base.T = 100.0;

        {
            RunConfig c = base;
            c.kind = ExperimentKind::Fig3Snapshots;
            c.output = "out/fig3";
            c.alpha = 0.5;
            c.eps = 0.25;
            c.snapshot_times = {1, 3, 6, 9, 20, 100};
            out.push_back({"fig3", "density snapshots and maximizer path, alpha=0.5, eps=0.25", c});
        }
        {
            RunConfig c = base;
            c.kind = ExperimentKind::Fig4Trajectories;
            c.output = "out/fig4";
            c.alphas = {0.25, 0.5, 1.0, 1.5};
            c.epsilons = {0.1, 0.25};
            out.push_back({"fig4", "most probable trajectories for several (alpha, eps)", c});
        }
        {
            RunConfig c = base;
            c.kind = ExperimentKind::Fig5PhaseDiagram;
            c.output = "out/fig5";
            c.alphas = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75};
            c.epsilons = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4};
            c.stop_on_crossing = true;
            out.push_back({"fig5", "L-L / L-H classification over an (alpha, eps) grid", c});
        }
        {
            RunConfig c = base;
            c.kind = ExperimentKind::Fig7TippingSweep;
            c.output = "out/fig7";
            c.alphas = {0.3, 0.5, 0.8, 1.0, 1.2, 1.5, 1.8, 1.9};
            c.epsilons = {0.15, 0.25, 0.4};
            c.T = 30.0;
            c.stop_on_crossing = true;
            out.push_back({"fig7", "tipping time against alpha and eps (cap 30)", c});
        }
        {
            RunConfig c = base;
            c.kind = ExperimentKind::Fig8InitialConditions;
            c.output = "out/fig8";
            c.alpha = 1.0;
            c.eps = 0.3;
            out.push_back({"fig8", "nine initial points on a ring around the low state, alpha=1, eps=0.3", c});
        }
        {
            RunConfig c = base;
            c.kind = ExperimentKind::Fig9DistanceSweep;
            c.output = "out/fig9";
            c.alphas = {0.5, 1.0, 1.5, 1.85};
            c.epsilons = {0.2};
            out.push_back({"fig9", "distance from the terminal path point to the competence state", c});
        }
        {
            RunConfig c = base;
            c.kind = ExperimentKind::McCrosscheck;
            c.output = "out/mc";
            c.alpha = 1.0;
            c.eps = 0.25;
            c.T = 3.0;
            c.initial = {1.5, 4.5};
            c.output_interval = 0.0;
            out.push_back({"mc", "Monte Carlo ensemble against the Fokker-Planck density, alpha=1, eps=0.25, T=3", c});
        }
        return out;
    }();
    return list;
}

const Preset* find_preset(std::string_view name) {
    for (const auto& p : presets()) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

}  // namespace levytip::cli
