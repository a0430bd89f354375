#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "levytip/kinetics.hpp"
#include "levytip/montecarlo.hpp"
#include "oracles.hpp"

using namespace levytip;

namespace {

const DomainBox kBox;

Point scaled_low() { return bistable_landmarks({}, {}).low; }

double quantile(std::vector<double> v, double q) {
    const auto k = static_cast<std::size_t>(q * (v.size() - 1));
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
}

std::vector<double> increments(double alpha, double eps, double dt, long n, std::uint64_t seed) {
    const Point x = scaled_low();
    const Point f = drift_scaled(x, {}, {});
    Rng rng(seed);
    std::vector<double> out(static_cast<std::size_t>(n));
    const NoiseSpec noise{alpha, eps, 0.0};
    for (auto& d : out) d = em_step(x, dt, {}, {}, noise, rng).k - x.k - f.k * dt;
    return out;
}

}  // namespace

TEST_CASE("noise-free step at the sink stays put") {
    Rng rng(1);
    const Point x = scaled_low();
    const double dt = 1e-3;
    const Point y = em_step(x, dt, {}, {}, NoiseSpec::isotropic(1.0, 0.0), rng);
    CHECK(std::abs(y.k - x.k) < dt * 1e-3);
    CHECK(std::abs(y.s - x.s) < dt * 1e-3);
}

TEST_CASE("alpha = 1 increments have Cauchy quartiles") {
    const double eps = 0.25, dt = 1e-3;
    const auto d = increments(1.0, eps, dt, 1000000, 3);
    const double iqr = quantile(d, 0.75) - quantile(d, 0.25);
    // Cauchy with scale eps*dt has interquartile range 2*eps*dt.
    CHECK(iqr == doctest::Approx(2.0 * eps * dt).epsilon(0.02));
}

TEST_CASE("alpha = 1.5 increments scale as dt^(1/alpha)") {
    const auto a = increments(1.5, 1.0, 2e-3, 1000000, 4);
    const auto b = increments(1.5, 1.0, 1e-3, 1000000, 5);
    const double ratio = quantile(b, 0.75) / quantile(a, 0.75);
    CHECK(ratio == doctest::Approx(std::pow(2.0, -1.0 / 1.5)).epsilon(0.01));
}

TEST_CASE("noise-free ensemble follows the ODE flow") {
    EnsembleSettings s;
    s.n_paths = 3;
    s.dt = 1e-4;
    s.T = 10.0;
    const Point start{1.2, 3.5};
    const auto e = simulate_ensemble(start, s, {}, {}, NoiseSpec::isotropic(1.0, 0.0), kBox);
    const auto flow = oracle::meks_flow_scaled({start.k, start.s}, 10.0);
    CHECK(e.absorbed_count == 0);
    for (const Point& x : e.terminal) {
        CHECK(std::abs(x.k - flow[0]) < 1e-3);
        CHECK(std::abs(x.s - flow[1]) < 1e-3);
    }
}

TEST_CASE("ensembles are reproducible and independent of the worker count") {
    EnsembleSettings s;
    s.n_paths = 10000;
    s.dt = 1e-2;
    s.T = 1.0;
    s.seed = 77;
    s.keep_trajectories = 2;
    s.trajectory_stride = 10;
    const NoiseSpec noise = NoiseSpec::isotropic(1.2, 0.3);
    const auto a = simulate_ensemble(scaled_low(), s, {}, {}, noise, kBox);
    s.workers = 3;
    const auto b = simulate_ensemble(scaled_low(), s, {}, {}, noise, kBox);
    CHECK(a.absorbed == b.absorbed);
    CHECK(a.absorbed_count == b.absorbed_count);
    bool same = true;
    for (std::size_t q = 0; q < a.terminal.size(); ++q) same = same && a.terminal[q] == b.terminal[q];
    CHECK(same);
    REQUIRE(a.trajectories.size() == 2);
    CHECK(a.trajectories[0].front().t == 0.0);
    CHECK(a.absorbed_count <= a.n_paths);

    s.seed = 78;
    const auto c = simulate_ensemble(scaled_low(), s, {}, {}, noise, kBox);
    CHECK_FALSE(c.terminal[5] == a.terminal[5]);
}

TEST_CASE("stronger noise absorbs more paths") {
    EnsembleSettings s;
    s.n_paths = 20000;
    s.dt = 5e-3;
    s.T = 2.0;
    const auto weak = simulate_ensemble(scaled_low(), s, {}, {}, NoiseSpec::isotropic(1.5, 0.1), kBox);
    const auto strong = simulate_ensemble(scaled_low(), s, {}, {}, NoiseSpec::isotropic(1.5, 0.4), kBox);
    CHECK(strong.absorbed_count > weak.absorbed_count);
}

TEST_CASE("ensemble argument checks") {
    EnsembleSettings s;
    s.n_paths = 0;
    CHECK_THROWS_AS((void)simulate_ensemble(scaled_low(), s, {}, {}, NoiseSpec::isotropic(1.0, 0.1), kBox),
                    std::invalid_argument);
    s.n_paths = 5;
    CHECK_THROWS_AS((void)simulate_ensemble({5.0, 4.0}, s, {}, {}, NoiseSpec::isotropic(1.0, 0.1), kBox),
                    std::domain_error);
}

TEST_CASE("all paths at one point give a single-cell histogram") {
    PathEnsemble e;
    e.n_paths = 10;
    e.T = 1.0;
    e.terminal.assign(10, Point{1.5, 4.5});
    e.absorbed.assign(10, 0);
    e.absorbed[2] = e.absorbed[7] = 1;
    e.absorbed_count = 2;
    GridSpec g;
    g.half_resolution = 10;
    const DensityField f = empirical_density(e, g, kBox);
    CHECK(f(0, 0) > 0.0);
    CHECK((f.values().array() > 0.0).count() == 1);
    CHECK(f.total_mass() == doctest::Approx(e.surviving_fraction()).epsilon(1e-14));
    CHECK(e.surviving_fraction() == doctest::Approx(0.8));
}

TEST_CASE("uniform sample gives a flat histogram") {
    const int I = 8;
    const double h = 1.0 / I;
    const long n = 400000;
    const double edge = (I - 1.5) * h;  // keeps every sample in a full-width interior cell
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-edge, edge);
    PathEnsemble e;
    e.n_paths = n;
    e.T = 1.0;
    e.absorbed.assign(n, 0);
    for (long q = 0; q < n; ++q) e.terminal.push_back(from_reference({u(rng), u(rng)}, kBox));
    GridSpec g;
    g.half_resolution = I;
    const DensityField f = empirical_density(e, g, kBox);

    const double cells = (2 * I - 3) * (2 * I - 3);
    const double p = 1.0 / cells;
    const double expect = n * p, sd = std::sqrt(n * p * (1 - p));
    int outside = 0;
    for (int i = -I + 2; i <= I - 2; ++i) {
        for (int j = -I + 2; j <= I - 2; ++j) {
            const double count = f(i, j) * n * h * h;
            if (std::abs(count - expect) > 4.0 * sd) ++outside;
        }
    }
    CHECK(outside == 0);
    CHECK(f.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalized L1 distance") {
    DensityField a(5), b(5);
    a(0, 0) = 2.0;
    b(0, 0) = 7.0;
    CHECK(normalized_l1(a, b) == doctest::Approx(0.0));
    b(1, 0) = 7.0;
    CHECK(normalized_l1(a, b) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)normalized_l1(a, DensityField(5)), std::invalid_argument);
    CHECK_THROWS_AS((void)normalized_l1(a, DensityField(4)), std::invalid_argument);
}
