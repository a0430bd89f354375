#pragma once

// Nonlocal Fokker-Planck solver on the reference square (-1,1)^2 with an
// absorbing (zero-extension) boundary.
//
// Discretization: nodes v_i = i h, w_j = j h with h = 1/I and interior
// indices |i|, |j| < I. Advection uses third-order WENO with global
// Lax-Friedrichs splitting; each jump integral uses the trapezoidal rule
// with a zeta-function correction for the singular part plus closed-form
// killing terms for jumps leaving the box. Time stepping is the three-stage
// TVD Runge-Kutta method.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "levytip/kinetics.hpp"
#include "levytip/stable.hpp"

namespace levytip {

/// Physical box (a,b) x (c,d) in scaled concentration coordinates.
struct DomainBox {
    double a = 0.0;
    double b = 3.0;
    double c = 2.0;
    double d = 7.0;

    void validate() const;
    [[nodiscard]] bool contains(Point x) const { return x.k > a && x.k < b && x.s > c && x.s < d; }

    friend bool operator==(const DomainBox&, const DomainBox&) = default;
};

/// Reference-square coordinates.
struct RefPoint {
    double v = 0.0;
    double w = 0.0;
};

[[nodiscard]] RefPoint to_reference(Point x, const DomainBox& domain);
[[nodiscard]] Point from_reference(RefPoint r, const DomainBox& domain);

struct GridSpec {
    int half_resolution = 50;  // I; h = 1/I
    double dt = 0.0;           // 0 selects the stability-derived step
    double T = 1.0;
    int record_stride = 1;

    [[nodiscard]] double h() const { return 1.0 / half_resolution; }
    /// Interior nodes per axis, 2I - 1.
    [[nodiscard]] int size() const { return 2 * half_resolution - 1; }
    void validate() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

using Matrix = Eigen::MatrixXd;

/// Density on interior nodes. Row index follows i (the v/k axis), column
/// index follows j (the w/s axis). Values outside the interior are zero by
/// convention and are never stored.
class DensityField {
public:
    DensityField() = default;
    explicit DensityField(int half_resolution, double time = 0.0);
    DensityField(int half_resolution, Matrix values, double time);

    [[nodiscard]] int half_resolution() const { return half_resolution_; }
    [[nodiscard]] int size() const { return 2 * half_resolution_ - 1; }
    [[nodiscard]] double h() const { return 1.0 / half_resolution_; }

    /// Zero-extended read at signed node index.
    [[nodiscard]] double at(int i, int j) const {
        if (i <= -half_resolution_ || i >= half_resolution_ || j <= -half_resolution_ || j >= half_resolution_) {
            return 0.0;
        }
        return values_(i + half_resolution_ - 1, j + half_resolution_ - 1);
    }
    double& operator()(int i, int j) { return values_(i + half_resolution_ - 1, j + half_resolution_ - 1); }
    double operator()(int i, int j) const { return values_(i + half_resolution_ - 1, j + half_resolution_ - 1); }

    [[nodiscard]] const Matrix& values() const { return values_; }
    [[nodiscard]] Matrix& values() { return values_; }

    /// Reference-square integral h^2 * sum P.
    [[nodiscard]] double total_mass() const { return h() * h() * values_.sum(); }

    double time = 0.0;

private:
    int half_resolution_ = 0;
    Matrix values_;
};

/// Nearest interior node to a reference coordinate, clamped to |index| < I.
[[nodiscard]] int nearest_index(double ref, int half_resolution);

/// Point mass of height 1/h^2 at the node nearest to `x`.
[[nodiscard]] DensityField delta_initial(Point x, const DomainBox& domain, const GridSpec& grid);

/// Gaussian bump (standard deviation `width` in reference units, default
/// 2h) normalized to unit reference mass.
[[nodiscard]] DensityField gaussian_initial(Point x, const DomainBox& domain, const GridSpec& grid,
                                            std::optional<double> width = std::nullopt);

/// Scaled drift sampled at every interior node, with the global
/// Lax-Friedrichs speeds max |f1| and max |f2|.
struct DriftGrid {
    Matrix f1;
    Matrix f2;
    double speed1 = 0.0;
    double speed2 = 0.0;

    [[nodiscard]] static DriftGrid zero(int half_resolution);
    [[nodiscard]] static DriftGrid constant(int half_resolution, double f1, double f2);
    /// Recomputes the Lax-Friedrichs speeds; throws SetupError on non-finite entries.
    void refresh_speeds();
};

[[nodiscard]] DriftGrid make_drift_grid(const KineticParams& params, const ScaleTransform& transform,
                                        const DomainBox& domain, int half_resolution);

class SetupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, long step, double max_abs)
        : std::runtime_error(what), step(step), max_abs(max_abs) {}
    long step;
    double max_abs;
};

/// One-dimensional WENO3 / global Lax-Friedrichs approximation of d(fP)/dx
/// at each entry of `density`, reading zero outside the span. `speed` is
/// the splitting constant (at least max |velocity|).
void advection_derivative_1d(std::span<const double> density, std::span<const double> velocity, double speed,
                             double h, std::span<double> out);

/// -(2/(b-a)) d(f1 P)/dv - (2/(d-c)) d(f2 P)/dw.
[[nodiscard]] Matrix advection_rhs(const DensityField& field, const DriftGrid& drift, const DomainBox& domain);

/// Dense (2I-1)x(2I-1) matrix of the one-dimensional nonlocal operator on
/// the reference interval, including killing terms, the zeta-corrected
/// second difference and the trapezoidal direct sum. `coefficient` is
/// C_alpha (2 eps / L)^alpha for an axis of physical length L.
[[nodiscard]] Matrix nonlocal_matrix_1d(double alpha, double coefficient, int half_resolution);

/// Scale factor C_alpha (2 eps / length)^alpha.
[[nodiscard]] double nonlocal_coefficient(double alpha, double eps, double length);

/// Precomputed nonlocal operator: R = A_v P + P A_w^T.
class NonlocalOperator {
public:
    NonlocalOperator(const NoiseSpec& noise, const DomainBox& domain, int half_resolution);

    void apply(const Matrix& p, Matrix& out) const;
    [[nodiscard]] Matrix apply(const Matrix& p) const;

    /// Largest diagonal magnitude, used by the step-size bound.
    [[nodiscard]] double max_diagonal() const;

    [[nodiscard]] const Matrix& along_v() const { return along_v_; }
    [[nodiscard]] const Matrix& along_w() const { return along_w_; }

private:
    Matrix along_v_;
    Matrix along_w_;
};

[[nodiscard]] Matrix nonlocal_rhs(const DensityField& field, const NoiseSpec& noise, const DomainBox& domain);

[[nodiscard]] Matrix rhs(const DensityField& field, const DriftGrid& drift, const NoiseSpec& noise,
                         const DomainBox& domain);

using RhsClosure = std::function<void(const Matrix& p, Matrix& out)>;

/// One TVD RK3 step. Throws IntegrationError when the result is not finite.
[[nodiscard]] DensityField rk3_step(const DensityField& field, double dt, const RhsClosure& rhs, long step_index = 0);

/// Step-size bound c_stab / (L_adv + L_jump).
[[nodiscard]] double stable_time_step(const DriftGrid& drift, const NonlocalOperator& nonlocal,
                                      const DomainBox& domain, int half_resolution, double c_stab = 0.5);

enum class SolveStatus { Completed, StoppedEarly, Aborted };

struct MassDiagnostics {
    double initial_mass = 0.0;
    double final_mass = 0.0;
    double worst_increase = 0.0;       // largest per-step mass increase, relative to initial mass
    long increase_violations = 0;       // steps whose increase exceeded the tolerance
    double min_value = 0.0;             // most negative value seen
    double max_value = 0.0;
    double worst_undershoot_ratio = 0.0;  // max over steps of (-min P) / max P
};

struct SolveOptions {
    double c_stab = 0.5;
    /// Times at which a snapshot is recorded exactly (steps are shortened to hit them).
    std::vector<double> output_times;
    /// Called on every recorded snapshot; returning false stops integration.
    std::function<bool(const DensityField&)> on_record;
    /// When false only the initial and the latest snapshot are retained;
    /// on_record still sees every recorded state.
    bool keep_snapshots = true;
    /// Refuse configurations whose snapshots would exceed this many bytes.
    double snapshot_budget_bytes = 2.0e9;
    double mass_tolerance = 1e-10;
    double undershoot_tolerance = 1e-6;
};

struct SolveResult {
    std::vector<DensityField> snapshots;
    GridSpec grid;
    DomainBox domain;
    NoiseSpec noise;
    double dt_used = 0.0;
    long steps_taken = 0;
    SolveStatus status = SolveStatus::Completed;
    std::string message;
    MassDiagnostics mass;

    /// Undershoot stayed within tolerance and no mass-increase violations occurred.
    [[nodiscard]] bool quality_ok(double undershoot_tolerance = 1e-6) const {
        return mass.worst_undershoot_ratio <= undershoot_tolerance && mass.increase_violations == 0;
    }
};

/// Integrates from the initial field to grid.T. Configuration problems
/// (including a step above the stability bound) throw SetupError before any
/// stepping; blow-up or non-finite values end the run with status Aborted and
/// the last good snapshot retained.
[[nodiscard]] SolveResult solve(const DensityField& initial, const KineticParams& params,
                                const ScaleTransform& transform, const NoiseSpec& noise, const DomainBox& domain,
                                const GridSpec& grid, const SolveOptions& options = {});

/// Same as solve but with an explicit drift grid (used for zero-drift and
/// synthetic-velocity studies).
[[nodiscard]] SolveResult solve_with_drift(const DensityField& initial, const DriftGrid& drift,
                                           const NoiseSpec& noise, const DomainBox& domain, const GridSpec& grid,
                                           const SolveOptions& options = {});

}  // namespace levytip
