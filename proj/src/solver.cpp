#include "levytip/solver.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace levytip {

namespace {

constexpr double kWenoEpsilon = 1e-6;

}  // namespace

void DomainBox::validate() const {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d) || !(a < b) ||
        !(c < d)) {
        throw std::invalid_argument("domain box requires finite a < b and c < d");
    }
}

RefPoint to_reference(Point x, const DomainBox& domain) {
    return {2.0 * (x.k - domain.a) / (domain.b - domain.a) - 1.0,
            2.0 * (x.s - domain.c) / (domain.d - domain.c) - 1.0};
}

Point from_reference(RefPoint r, const DomainBox& domain) {
    return {0.5 * (domain.b - domain.a) * (r.v + 1.0) + domain.a,
            0.5 * (domain.d - domain.c) * (r.w + 1.0) + domain.c};
}

void GridSpec::validate() const {
    std::string problems;
    if (half_resolution < 2) problems += "half_resolution must be >= 2; ";
    if (!(dt >= 0.0) || !std::isfinite(dt)) problems += "dt must be finite and >= 0 (0 = automatic); ";
    if (!(T > 0.0) || !std::isfinite(T)) problems += "T must be positive; ";
    if (record_stride < 1) problems += "record_stride must be >= 1; ";
    if (!problems.empty()) throw std::invalid_argument("GridSpec: " + problems);
}

DensityField::DensityField(int half_resolution, double time_)
    : time(time_), half_resolution_(half_resolution),
      values_(Matrix::Zero(2 * half_resolution - 1, 2 * half_resolution - 1)) {
    if (half_resolution < 1) throw std::invalid_argument("DensityField: half_resolution must be positive");
}

DensityField::DensityField(int half_resolution, Matrix values, double time_)
    : time(time_), half_resolution_(half_resolution), values_(std::move(values)) {
    if (values_.rows() != size() || values_.cols() != size()) {
        throw std::invalid_argument("DensityField: value matrix must be (2I-1)x(2I-1)");
    }
}

int nearest_index(double ref, int half_resolution) {
    const long i = std::lround(ref * half_resolution);
    return static_cast<int>(std::clamp<long>(i, -half_resolution + 1, half_resolution - 1));
}

DensityField delta_initial(Point x, const DomainBox& domain, const GridSpec& grid) {
    domain.validate();
    if (!domain.contains(x)) throw std::domain_error("delta_initial: point must lie strictly inside the domain");
    const RefPoint r = to_reference(x, domain);
    const int I = grid.half_resolution;
    DensityField field(I);
    const double h = grid.h();
    field(nearest_index(r.v, I), nearest_index(r.w, I)) = 1.0 / (h * h);
    return field;
}

DensityField gaussian_initial(Point x, const DomainBox& domain, const GridSpec& grid, std::optional<double> width) {
    domain.validate();
    if (!domain.contains(x)) throw std::domain_error("gaussian_initial: point must lie strictly inside the domain");
    const RefPoint r = to_reference(x, domain);
    const int I = grid.half_resolution;
    const double h = grid.h();
    const double sigma = width.value_or(2.0 * h);
    DensityField field(I);
    for (int i = -I + 1; i < I; ++i) {
        for (int j = -I + 1; j < I; ++j) {
            const double dv = i * h - r.v;
            const double dw = j * h - r.w;
            field(i, j) = std::exp(-(dv * dv + dw * dw) / (2.0 * sigma * sigma));
        }
    }
    const double mass = field.total_mass();
    if (!(mass > 0.0)) throw std::domain_error("gaussian_initial: bump vanishes on the grid");
    field.values() /= mass;
    return field;
}

DriftGrid DriftGrid::zero(int half_resolution) { return constant(half_resolution, 0.0, 0.0); }

DriftGrid DriftGrid::constant(int half_resolution, double f1, double f2) {
    const int n = 2 * half_resolution - 1;
    DriftGrid g;
    g.f1 = Matrix::Constant(n, n, f1);
    g.f2 = Matrix::Constant(n, n, f2);
    g.refresh_speeds();
    return g;
}

void DriftGrid::refresh_speeds() {
    if (!f1.allFinite() || !f2.allFinite()) throw SetupError("drift grid contains non-finite values");
    speed1 = f1.size() > 0 ? f1.cwiseAbs().maxCoeff() : 0.0;
    speed2 = f2.size() > 0 ? f2.cwiseAbs().maxCoeff() : 0.0;
}

DriftGrid make_drift_grid(const KineticParams& params, const ScaleTransform& transform, const DomainBox& domain,
                          int half_resolution) {
    const int I = half_resolution;
    const double h = 1.0 / I;
    const int n = 2 * I - 1;
    DriftGrid g;
    g.f1.resize(n, n);
    g.f2.resize(n, n);
    try {
        for (int i = -I + 1; i < I; ++i) {
            for (int j = -I + 1; j < I; ++j) {
                const Point f = drift_scaled(from_reference({i * h, j * h}, domain), params, transform);
                g.f1(i + I - 1, j + I - 1) = f.k;
                g.f2(i + I - 1, j + I - 1) = f.s;
            }
        }
    } catch (const std::domain_error& e) {
        throw SetupError(std::string("drift grid: ") + e.what());
    }
    g.refresh_speeds();
    return g;
}

void advection_derivative_1d(std::span<const double> density, std::span<const double> velocity, double speed,
                             double h, std::span<double> out) {
    const std::size_t n = density.size();
    // Split fluxes with two zero ghost cells on each side.
    std::vector<double> fp(n + 4, 0.0);
    std::vector<double> fm(n + 4, 0.0);
    for (std::size_t q = 0; q < n; ++q) {
        const double flux = velocity[q] * density[q];
        fp[q + 2] = 0.5 * (flux + speed * density[q]);
        fm[q + 2] = 0.5 * (flux - speed * density[q]);
    }

    // flux[m] is the numerical flux at the interface between padded cells m+1 and m+2,
    // i.e. between node m-1 and node m of the unpadded array.
    std::vector<double> flux(n + 1);
    for (std::size_t m = 0; m <= n; ++m) {
        const std::size_t c = m + 1;  // left cell of the interface, padded index
        {
            const double q0 = -0.5 * fp[c - 1] + 1.5 * fp[c];
            const double q1 = 0.5 * fp[c] + 0.5 * fp[c + 1];
            const double b0 = (fp[c] - fp[c - 1]) * (fp[c] - fp[c - 1]);
            const double b1 = (fp[c + 1] - fp[c]) * (fp[c + 1] - fp[c]);
            const double a0 = (1.0 / 3.0) / ((kWenoEpsilon + b0) * (kWenoEpsilon + b0));
            const double a1 = (2.0 / 3.0) / ((kWenoEpsilon + b1) * (kWenoEpsilon + b1));
            flux[m] = (a0 * q0 + a1 * q1) / (a0 + a1);
        }
        {
            const double q0 = -0.5 * fm[c + 2] + 1.5 * fm[c + 1];
            const double q1 = 0.5 * fm[c + 1] + 0.5 * fm[c];
            const double b0 = (fm[c + 2] - fm[c + 1]) * (fm[c + 2] - fm[c + 1]);
            const double b1 = (fm[c + 1] - fm[c]) * (fm[c + 1] - fm[c]);
            const double a0 = (1.0 / 3.0) / ((kWenoEpsilon + b0) * (kWenoEpsilon + b0));
            const double a1 = (2.0 / 3.0) / ((kWenoEpsilon + b1) * (kWenoEpsilon + b1));
            flux[m] += (a0 * q0 + a1 * q1) / (a0 + a1);
        }
    }
    for (std::size_t q = 0; q < n; ++q) out[q] = (flux[q + 1] - flux[q]) / h;
}

namespace {

Matrix advection_apply(const Matrix& p, double h, const DriftGrid& drift, const DomainBox& domain) {
    const auto n = p.rows();
    if (drift.f1.rows() != n || drift.f1.cols() != n) throw SetupError("drift grid does not match field size");
    Matrix out(n, n);

    const double scale_v = 2.0 / (domain.b - domain.a);
    const double scale_w = 2.0 / (domain.d - domain.c);
    const auto len = static_cast<std::size_t>(n);

    std::vector<double> deriv(len);
    for (Eigen::Index j = 0; j < n; ++j) {
        advection_derivative_1d({p.col(j).data(), len}, {drift.f1.col(j).data(), len}, drift.speed1, h, deriv);
        for (Eigen::Index i = 0; i < n; ++i) out(i, j) = -scale_v * deriv[i];
    }

    std::vector<double> row(len), vel(len);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            row[j] = p(i, j);
            vel[j] = drift.f2(i, j);
        }
        advection_derivative_1d(row, vel, drift.speed2, h, deriv);
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) -= scale_w * deriv[j];
    }
    return out;
}

}  // namespace

Matrix advection_rhs(const DensityField& field, const DriftGrid& drift, const DomainBox& domain) {
    return advection_apply(field.values(), field.h(), drift, domain);
}

double nonlocal_coefficient(double alpha, double eps, double length) {
    require_alpha(alpha);
    if (!(length > 0.0)) throw std::invalid_argument("axis length must be positive");
    return c_alpha(alpha) * std::pow(2.0 * eps / length, alpha);
}

Matrix nonlocal_matrix_1d(double alpha, double coefficient, int half_resolution) {
    require_alpha(alpha);
    const int I = half_resolution;
    const int n = 2 * I - 1;
    const double h = 1.0 / I;
    Matrix a = Matrix::Zero(n, n);
    if (coefficient == 0.0) return a;

    // Trapezoidal weights h * |k h|^-(1+alpha) = h^-alpha |k|^-(1+alpha), k = 1..2I.
    // The two end terms of each row (the boundary nodes m = -I and m = I) carry half weight.
    std::vector<double> weight(2 * I + 1, 0.0);
    for (int k = 1; k <= 2 * I; ++k) weight[k] = coefficient * std::pow(h, -alpha) * std::pow(k, -(1.0 + alpha));

    const double zeta_corr = -coefficient * boost::math::zeta(alpha - 1.0) * std::pow(h, 2.0 - alpha) / (h * h);
    const double kill = coefficient / alpha;

    for (int i = -I + 1; i < I; ++i) {
        const int r = i + I - 1;
        const double v = i * h;
        double diag = -kill * (std::pow(1.0 + v, -alpha) + std::pow(1.0 - v, -alpha));
        for (int k = -I - i; k <= I - i; ++k) {
            if (k == 0) continue;
            const bool end_term = (k == -I - i) || (k == I - i);
            const double wk = end_term ? 0.5 * weight[std::abs(k)] : weight[std::abs(k)];
            diag -= wk;
            const int m = i + k;
            if (m > -I && m < I) a(r, m + I - 1) += wk;
        }
        diag -= 2.0 * zeta_corr;
        if (i - 1 > -I) a(r, r - 1) += zeta_corr;
        if (i + 1 < I) a(r, r + 1) += zeta_corr;
        a(r, r) += diag;
    }
    return a;
}

NonlocalOperator::NonlocalOperator(const NoiseSpec& noise, const DomainBox& domain, int half_resolution) {
    noise.validate();
    domain.validate();
    along_v_ = nonlocal_matrix_1d(noise.alpha, nonlocal_coefficient(noise.alpha, noise.eps_k, domain.b - domain.a),
                                  half_resolution);
    along_w_ = nonlocal_matrix_1d(noise.alpha, nonlocal_coefficient(noise.alpha, noise.eps_s, domain.d - domain.c),
                                  half_resolution);
}

void NonlocalOperator::apply(const Matrix& p, Matrix& out) const {
    out.noalias() = along_v_ * p;
    out.noalias() += p * along_w_.transpose();
}

Matrix NonlocalOperator::apply(const Matrix& p) const {
    Matrix out(p.rows(), p.cols());
    apply(p, out);
    return out;
}

double NonlocalOperator::max_diagonal() const {
    return along_v_.diagonal().cwiseAbs().maxCoeff() + along_w_.diagonal().cwiseAbs().maxCoeff();
}

Matrix nonlocal_rhs(const DensityField& field, const NoiseSpec& noise, const DomainBox& domain) {
    return NonlocalOperator(noise, domain, field.half_resolution()).apply(field.values());
}

Matrix rhs(const DensityField& field, const DriftGrid& drift, const NoiseSpec& noise, const DomainBox& domain) {
    Matrix out = advection_rhs(field, drift, domain);
    out += nonlocal_rhs(field, noise, domain);
    return out;
}

DensityField rk3_step(const DensityField& field, double dt, const RhsClosure& rhs_fn, long step_index) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk3_step: dt must be positive");
    const Matrix& p0 = field.values();
    Matrix r(p0.rows(), p0.cols());

    rhs_fn(p0, r);
    Matrix p1 = p0 + dt * r;
    rhs_fn(p1, r);
    Matrix p2 = 0.75 * p0 + 0.25 * p1 + 0.25 * dt * r;
    rhs_fn(p2, r);
    Matrix next = (1.0 / 3.0) * p0 + (2.0 / 3.0) * p2 + (2.0 / 3.0) * dt * r;

    if (!next.allFinite()) {
        const double max_abs = p0.cwiseAbs().maxCoeff();
        std::ostringstream msg;
        msg << "non-finite density at step " << step_index << " (max |P| before step " << max_abs << ")";
        throw IntegrationError(msg.str(), step_index, max_abs);
    }
    return DensityField(field.half_resolution(), std::move(next), field.time + dt);
}

double stable_time_step(const DriftGrid& drift, const NonlocalOperator& nonlocal, const DomainBox& domain,
                        int half_resolution, double c_stab) {
    const double h = 1.0 / half_resolution;
    const double l_adv =
        2.0 * drift.speed1 / ((domain.b - domain.a) * h) + 2.0 * drift.speed2 / ((domain.d - domain.c) * h);
    const double l_jump = nonlocal.max_diagonal();
    const double total = l_adv + l_jump;
    if (total <= 0.0) return std::numeric_limits<double>::infinity();
    return c_stab / total;
}

namespace {

void observe(const DensityField& f, double previous_mass, MassDiagnostics& diag, const SolveOptions& opt) {
    const double mass = f.total_mass();
    const double ref = diag.initial_mass != 0.0 ? std::abs(diag.initial_mass) : 1.0;
    const double increase = (mass - previous_mass) / ref;
    diag.worst_increase = std::max(diag.worst_increase, increase);
    if (increase > opt.mass_tolerance) ++diag.increase_violations;
    const double lo = f.values().minCoeff();
    const double hi = f.values().maxCoeff();
    diag.min_value = std::min(diag.min_value, lo);
    diag.max_value = std::max(diag.max_value, hi);
    if (hi > 0.0 && lo < 0.0) diag.worst_undershoot_ratio = std::max(diag.worst_undershoot_ratio, -lo / hi);
    diag.final_mass = mass;
}

}  // namespace

SolveResult solve_with_drift(const DensityField& initial, const DriftGrid& drift, const NoiseSpec& noise,
                             const DomainBox& domain, const GridSpec& grid, const SolveOptions& options) {
    grid.validate();
    domain.validate();
    noise.validate();
    if (initial.half_resolution() != grid.half_resolution) {
        throw SetupError("initial field resolution does not match the grid");
    }
    const int n = grid.size();
    if (drift.f1.rows() != n || drift.f1.cols() != n || drift.f2.rows() != n || drift.f2.cols() != n) {
        throw SetupError("drift grid does not match the grid");
    }

    const NonlocalOperator nonlocal(noise, domain, grid.half_resolution);
    const double dt_max = stable_time_step(drift, nonlocal, domain, grid.half_resolution, options.c_stab);
    if (grid.dt > 0.0 && grid.dt > dt_max * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "dt = " << grid.dt << " exceeds the stability bound " << dt_max;
        throw SetupError(msg.str());
    }
    const double dt_target = grid.dt > 0.0 ? grid.dt : std::min(dt_max, grid.T);
    const long n_steps = std::max<long>(1, static_cast<long>(std::ceil(grid.T / dt_target - 1e-9)));
    const double dt = grid.T / static_cast<double>(n_steps);

    std::vector<double> outputs;
    for (double t : options.output_times) {
        if (t > 0.0 && t <= grid.T * (1.0 + 1e-12)) outputs.push_back(std::min(t, grid.T));
    }
    std::sort(outputs.begin(), outputs.end());
    outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());

    const double expected_snapshots =
        static_cast<double>(n_steps / grid.record_stride) + 2.0 + static_cast<double>(outputs.size());
    const double bytes = expected_snapshots * static_cast<double>(n) * n * sizeof(double);
    if (options.keep_snapshots && bytes > options.snapshot_budget_bytes) {
        std::ostringstream msg;
        msg << "snapshots would need " << bytes / 1e6 << " MB (budget " << options.snapshot_budget_bytes / 1e6
            << " MB); increase record_stride";
        throw SetupError(msg.str());
    }

    SolveResult result;
    result.grid = grid;
    result.domain = domain;
    result.noise = noise;
    result.dt_used = dt;

    const RhsClosure rhs_fn = [&](const Matrix& p, Matrix& out) {
        nonlocal.apply(p, out);
        out += advection_apply(p, grid.h(), drift, domain);
    };

    DensityField current = initial;
    current.time = 0.0;
    result.mass.initial_mass = current.total_mass();
    result.mass.final_mass = result.mass.initial_mass;
    result.mass.min_value = std::min(0.0, current.values().minCoeff());
    result.mass.max_value = current.values().maxCoeff();
    result.snapshots.push_back(current);
    if (options.on_record && !options.on_record(current)) {
        result.status = SolveStatus::StoppedEarly;
        return result;
    }

    const double blowup = 1e12 * grid.half_resolution * grid.half_resolution;
    std::size_t next_output = 0;
    long step_index = 0;

    auto advance_to = [&](double target, bool record) -> bool {
        const double step = target - current.time;
        if (step <= 0.0) return true;
        const double previous_mass = current.total_mass();
        DensityField next;
        try {
            next = rk3_step(current, step, rhs_fn, step_index);
        } catch (const IntegrationError& e) {
            result.status = SolveStatus::Aborted;
            result.message = e.what();
            return false;
        }
        ++step_index;
        next.time = target;
        const double max_abs = next.values().cwiseAbs().maxCoeff();
        if (max_abs > blowup) {
            std::ostringstream msg;
            msg << "blow-up at step " << step_index << " (t=" << target << ", max |P| = " << max_abs << ")";
            result.status = SolveStatus::Aborted;
            result.message = msg.str();
            return false;
        }
        current = std::move(next);
        observe(current, previous_mass, result.mass, options);
        if (record) {
            if (!options.keep_snapshots && result.snapshots.size() > 1) result.snapshots.pop_back();
            result.snapshots.push_back(current);
            if (options.on_record && !options.on_record(current)) {
                result.status = SolveStatus::StoppedEarly;
                return false;
            }
        }
        return true;
    };

    const double time_tol = 1e-9 * dt;
    for (long k = 1; k <= n_steps; ++k) {
        const double lattice = (k == n_steps) ? grid.T : static_cast<double>(k) * dt;
        bool record = (k % grid.record_stride == 0) || k == n_steps;
        while (next_output < outputs.size() && outputs[next_output] < lattice - time_tol) {
            if (!advance_to(outputs[next_output], true)) {
                result.steps_taken = step_index;
                return result;
            }
            ++next_output;
        }
        if (next_output < outputs.size() && std::abs(outputs[next_output] - lattice) <= time_tol) {
            record = true;
            ++next_output;
        }
        if (!advance_to(lattice, record)) {
            result.steps_taken = step_index;
            return result;
        }
    }
    result.steps_taken = step_index;
    return result;
}

SolveResult solve(const DensityField& initial, const KineticParams& params, const ScaleTransform& transform,
                  const NoiseSpec& noise, const DomainBox& domain, const GridSpec& grid, const SolveOptions& options) {
    params.validate();
    transform.validate();
    const DriftGrid drift = make_drift_grid(params, transform, domain, grid.half_resolution);
    return solve_with_drift(initial, drift, noise, domain, grid, options);
}

}  // namespace levytip
