#pragma once

// MeKS (ComK/ComS) competence circuit: drift field, scale transform and
// equilibrium location/classification.

#include <array>
#include <complex>
#include <string_view>
#include <vector>

namespace levytip {

/// A (ComK, ComS) concentration pair. Used for both physical and scaled
/// coordinates; which one is meant is stated at each call site.
struct Point {
    double k = 0.0;
    double s = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct KineticParams {
    double a_k = 0.004;   // basal ComK production
    double b_k = 0.14;    // fully activated ComK production
    double b_s = 0.68;    // maximal ComS production
    double k0 = 0.2;      // ComK half-activation concentration
    double k1 = 0.222;    // ComK half-repression concentration (of ComS)
    int n = 2;            // ComK auto-activation Hill coefficient
    int p = 5;            // ComS repression Hill coefficient

    /// Throws std::invalid_argument when a rate/concentration is not strictly
    /// positive or a Hill coefficient is below one.
    void validate() const;

    friend bool operator==(const KineticParams&, const KineticParams&) = default;
};

/// k' = c_k * k, s' = c_s * s.
struct ScaleTransform {
    double c_k = 10.0;
    double c_s = 2.0;

    void validate() const;

    [[nodiscard]] Point to_scaled(Point physical) const { return {c_k * physical.k, c_s * physical.s}; }
    [[nodiscard]] Point to_unscaled(Point scaled) const { return {scaled.k / c_k, scaled.s / c_s}; }

    friend bool operator==(const ScaleTransform&, const ScaleTransform&) = default;
};

using Matrix2 = std::array<std::array<double, 2>, 2>;

enum class EquilibriumKind { NodalSink, SpiralSink, Saddle, NodalSource, SpiralSource, Center };

[[nodiscard]] std::string_view to_string(EquilibriumKind kind);

struct Equilibrium {
    Point point;
    EquilibriumKind kind = EquilibriumKind::Saddle;
    std::array<std::complex<double>, 2> eigenvalues{};
};

/// Drift of the unscaled MeKS model. Requires finite, nonnegative k and s.
[[nodiscard]] Point drift(Point x, const KineticParams& params);

/// Drift expressed in scaled coordinates: (c_k f1, c_s f2) evaluated at the
/// unscaled preimage of `scaled`.
[[nodiscard]] Point drift_scaled(Point scaled, const KineticParams& params, const ScaleTransform& transform);

/// Analytic Jacobian [[df1/dk, df1/ds], [df2/dk, df2/ds]] of the unscaled drift.
[[nodiscard]] Matrix2 jacobian(Point x, const KineticParams& params);

[[nodiscard]] std::array<std::complex<double>, 2> eigenvalues(const Matrix2& m);

[[nodiscard]] EquilibriumKind classify(const std::array<std::complex<double>, 2>& eig);

struct EquilibriumSearch {
    std::vector<Equilibrium> equilibria;  // sorted by increasing k
    int discarded_seeds = 0;              // Newton runs that failed to converge
    bool empty_warning = false;           // set when no root was found
};

struct EquilibriumSearchOptions {
    int grid = 30;                  // seeds per axis
    double k_max = 3.0;             // seed box (0, k_max) x (0, s_max), unscaled
    double s_max = 6.0;
    double dedup_tolerance = 1e-6;
    double newton_tolerance = 1e-12;
    int max_iterations = 100;
};

/// Newton iterations seeded from a uniform grid; returns deduplicated,
/// classified roots of the unscaled drift.
[[nodiscard]] EquilibriumSearch find_equilibria(const KineticParams& params,
                                                const EquilibriumSearchOptions& options = {});

/// The three equilibria of the default bistable configuration in scaled
/// coordinates, as (low, saddle, high). Throws std::runtime_error when the
/// parameters do not produce exactly two sinks and one saddle.
struct BistableLandmarks {
    Point low;
    Point saddle;
    Point high;
};

[[nodiscard]] BistableLandmarks bistable_landmarks(const KineticParams& params, const ScaleTransform& transform);

}  // namespace levytip
