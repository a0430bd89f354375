#include "levytip/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace levytip {

namespace {

// Integer power by repeated multiplication; exact at x = 0 for m >= 1.
double ipow(double x, int m) {
    double r = 1.0;
    for (int i = 0; i < m; ++i) r *= x;
    return r;
}

void require_finite(Point x) {
    if (!std::isfinite(x.k) || !std::isfinite(x.s)) {
        throw std::domain_error("kinetics: non-finite concentration");
    }
}

void require_physical(Point x) {
    require_finite(x);
    if (x.k < 0.0 || x.s < 0.0) {
        throw std::domain_error("kinetics: negative concentration (k=" + std::to_string(x.k) +
                                ", s=" + std::to_string(x.s) + ")");
    }
}

Point drift_raw(Point x, const KineticParams& p) {
    const double kn = ipow(x.k, p.n);
    const double k0n = ipow(p.k0, p.n);
    const double denom = 1.0 + x.k + x.s;
    const double f1 = p.a_k + p.b_k * kn / (k0n + kn) - x.k / denom;
    const double f2 = p.b_s / (1.0 + ipow(x.k / p.k1, p.p)) - x.s / denom;
    return {f1, f2};
}

}  // namespace

void KineticParams::validate() const {
    std::string problems;
    auto check = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) problems += std::string(name) + " must be positive; ";
    };
    check(a_k, "a_k");
    check(b_k, "b_k");
    check(b_s, "b_s");
    check(k0, "k0");
    check(k1, "k1");
    if (n < 1) problems += "n must be >= 1; ";
    if (p < 1) problems += "p must be >= 1; ";
    if (!problems.empty()) throw std::invalid_argument("KineticParams: " + problems);
}

void ScaleTransform::validate() const {
    if (!(c_k > 0.0) || !(c_s > 0.0) || !std::isfinite(c_k) || !std::isfinite(c_s)) {
        throw std::invalid_argument("ScaleTransform: scale factors must be positive");
    }
}

std::string_view to_string(EquilibriumKind kind) {
    switch (kind) {
        case EquilibriumKind::NodalSink: return "nodal-sink";
        case EquilibriumKind::SpiralSink: return "spiral-sink";
        case EquilibriumKind::Saddle: return "saddle";
        case EquilibriumKind::NodalSource: return "nodal-source";
        case EquilibriumKind::SpiralSource: return "spiral-source";
        case EquilibriumKind::Center: return "center";
    }
    return "unknown";
}

Point drift(Point x, const KineticParams& params) {
    require_physical(x);
    return drift_raw(x, params);
}

Point drift_scaled(Point scaled, const KineticParams& params, const ScaleTransform& transform) {
    const Point f = drift(transform.to_unscaled(scaled), params);
    return {transform.c_k * f.k, transform.c_s * f.s};
}

Matrix2 jacobian(Point x, const KineticParams& p) {
    require_physical(x);
    const double denom = 1.0 + x.k + x.s;
    const double denom2 = denom * denom;

    const double k0n = ipow(p.k0, p.n);
    const double kn = ipow(x.k, p.n);
    const double hill_k = k0n + kn;
    const double dhill_act = p.b_k * p.n * ipow(x.k, p.n - 1) * k0n / (hill_k * hill_k);

    const double r = x.k / p.k1;
    const double rep = 1.0 + ipow(r, p.p);
    const double dhill_rep = -p.b_s * p.p * ipow(r, p.p - 1) / p.k1 / (rep * rep);

    Matrix2 m{};
    m[0][0] = dhill_act - (1.0 + x.s) / denom2;
    m[0][1] = x.k / denom2;
    m[1][0] = dhill_rep + x.s / denom2;
    m[1][1] = -(1.0 + x.k) / denom2;
    return m;
}

std::array<std::complex<double>, 2> eigenvalues(const Matrix2& m) {
    const double tr = m[0][0] + m[1][1];
    const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    const double disc = tr * tr - 4.0 * det;
    if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        // Stable form avoids cancellation for the smaller-magnitude root.
        const double q = 0.5 * (tr + std::copysign(sq, tr));
        double l1 = q;
        double l2 = q != 0.0 ? det / q : 0.0;
        if (l1 > l2) std::swap(l1, l2);
        return {std::complex<double>(l1, 0.0), std::complex<double>(l2, 0.0)};
    }
    const double re = 0.5 * tr;
    const double im = 0.5 * std::sqrt(-disc);
    return {std::complex<double>(re, -im), std::complex<double>(re, im)};
}

EquilibriumKind classify(const std::array<std::complex<double>, 2>& eig) {
    const bool complex_pair = eig[0].imag() != 0.0;
    if (complex_pair) {
        if (eig[0].real() < 0.0) return EquilibriumKind::SpiralSink;
        if (eig[0].real() > 0.0) return EquilibriumKind::SpiralSource;
        return EquilibriumKind::Center;
    }
    const double a = eig[0].real();
    const double b = eig[1].real();
    if (a < 0.0 && b < 0.0) return EquilibriumKind::NodalSink;
    if (a > 0.0 && b > 0.0) return EquilibriumKind::NodalSource;
    return EquilibriumKind::Saddle;
}

EquilibriumSearch find_equilibria(const KineticParams& params, const EquilibriumSearchOptions& opt) {
    params.validate();
    EquilibriumSearch out;
    std::vector<Point> roots;

    auto norm = [](Point f) { return std::hypot(f.k, f.s); };

    for (int ia = 0; ia < opt.grid; ++ia) {
        for (int ib = 0; ib < opt.grid; ++ib) {
            Point x{(ia + 0.5) * opt.k_max / opt.grid, (ib + 0.5) * opt.s_max / opt.grid};
            bool converged = false;
            for (int it = 0; it < opt.max_iterations; ++it) {
                const Point f = drift_raw(x, params);
                const double fn = norm(f);
                if (fn < opt.newton_tolerance) { converged = true; break; }
                const Matrix2 J = jacobian(x, params);
                const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
                if (det == 0.0 || !std::isfinite(det)) break;
                const Point step{(J[1][1] * f.k - J[0][1] * f.s) / det,
                                 (-J[1][0] * f.k + J[0][0] * f.s) / det};
                // Backtrack to stay in the nonnegative quadrant and reduce |f|.
                double lambda = 1.0;
                Point trial{};
                bool accepted = false;
                for (int ls = 0; ls < 30; ++ls) {
                    trial = {x.k - lambda * step.k, x.s - lambda * step.s};
                    if (trial.k >= 0.0 && trial.s >= 0.0 && norm(drift_raw(trial, params)) < fn) {
                        accepted = true;
                        break;
                    }
                    lambda *= 0.5;
                }
                if (!accepted) {
                    if (fn < 1e3 * opt.newton_tolerance) converged = true;
                    break;
                }
                x = trial;
            }
            if (!converged) {
                ++out.discarded_seeds;
                continue;
            }
            const bool duplicate = std::any_of(roots.begin(), roots.end(), [&](Point r) {
                return std::hypot(r.k - x.k, r.s - x.s) < opt.dedup_tolerance;
            });
            if (!duplicate) roots.push_back(x);
        }
    }

    std::sort(roots.begin(), roots.end(), [](Point a, Point b) { return a.k < b.k; });
    for (Point r : roots) {
        const auto eig = eigenvalues(jacobian(r, params));
        out.equilibria.push_back({r, classify(eig), eig});
    }
    out.empty_warning = out.equilibria.empty();
    return out;
}

BistableLandmarks bistable_landmarks(const KineticParams& params, const ScaleTransform& transform) {
    const auto search = find_equilibria(params);
    std::vector<Point> sinks;
    std::vector<Point> saddles;
    for (const auto& e : search.equilibria) {
        if (e.kind == EquilibriumKind::Saddle) saddles.push_back(e.point);
        if (e.kind == EquilibriumKind::NodalSink || e.kind == EquilibriumKind::SpiralSink) sinks.push_back(e.point);
    }
    if (sinks.size() != 2 || saddles.size() != 1) {
        throw std::runtime_error("kinetics: parameters are not bistable (need two sinks and one saddle)");
    }
    return {transform.to_scaled(sinks[0]), transform.to_scaled(saddles[0]), transform.to_scaled(sinks[1])};
}

}  // namespace levytip
