#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "levytip/stable.hpp"
#include "oracles.hpp"

using namespace levytip;

namespace {

double c_alpha_oracle(double a) {
    using Big = boost::multiprecision::cpp_dec_float_50;
    const Big alpha(a);
    const Big v = alpha * boost::math::tgamma((1 + alpha) / 2) /
                  (boost::multiprecision::pow(Big(2), 1 - alpha) *
                   boost::multiprecision::sqrt(boost::math::constants::pi<Big>()) * boost::math::tgamma(1 - alpha / 2));
    return v.convert_to<double>();
}

std::vector<double> draws(double alpha, long n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = sample_standard_stable(alpha, rng);
    return x;
}

}  // namespace

TEST_CASE("c_alpha at alpha = 1 is 1/pi") { CHECK(std::abs(c_alpha(1.0) - 1.0 / std::numbers::pi) < 1e-15); }

TEST_CASE("c_alpha matches a 50-digit Gamma evaluation") {
    for (double a : {0.05, 0.25, 0.5, 0.8, 1.2, 1.5, 1.85, 1.99}) {
        CAPTURE(a);
        CHECK(std::abs(c_alpha(a) - c_alpha_oracle(a)) < 1e-12);
    }
}

TEST_CASE("alpha outside (0, 2) is rejected") {
    for (double a : {0.0, 2.0, -0.5, 2.5}) CHECK_THROWS_AS((void)c_alpha(a), std::domain_error);
    CHECK_THROWS_AS(require_alpha(std::nan("")), std::domain_error);
    CHECK_THROWS_AS((NoiseSpec{1.0, -0.1, 0.0}.validate()), std::domain_error);
}

TEST_CASE("jump density values") {
    CHECK(jump_density(1.0, 1.0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-15));
    CHECK(jump_density(-2.0, 1.0) == jump_density(2.0, 1.0));
    CHECK_THROWS_AS((void)jump_density(0.0, 1.0), std::domain_error);
}

TEST_CASE("jump measure tail integral") {
    const double alpha = 0.5, r = 1.0;
    auto g = [&](double y) { return jump_density(y, alpha); };
    const double tail = boost::math::quadrature::exp_sinh<double>().integrate(g, r, std::numeric_limits<double>::infinity());
    CHECK(tail == doctest::Approx(c_alpha(alpha) * std::pow(r, -alpha) / alpha).epsilon(1e-9));
}

TEST_CASE("alpha = 1 draws follow the Cauchy law") {
    auto x = draws(1.0, 1000000, 3);
    std::sort(x.begin(), x.end());
    double ks = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t q = 0; q < x.size(); ++q) {
        const double f = oracle::cauchy_cdf(x[q]);
        ks = std::max({ks, std::abs(f - q / n), std::abs(f - (q + 1) / n)});
    }
    CHECK(ks < 0.005);
}

TEST_CASE("alpha = 0.5 draws have median zero") {
    auto x = draws(0.5, 1000000, 5);
    std::nth_element(x.begin(), x.begin() + x.size() / 2, x.end());
    CHECK(std::abs(x[x.size() / 2]) < 0.01);
}

TEST_CASE("alpha = 1.5 tail exponent") {
    auto x = draws(1.5, 1000000, 9);
    std::vector<double> pos;
    for (double v : x) {
        if (v > 0.0) pos.push_back(v);
    }
    std::sort(pos.begin(), pos.end());
    // log-log regression of the survival function above the 99th percentile of |X|.
    const double n = static_cast<double>(x.size());
    const std::size_t start = static_cast<std::size_t>(pos.size() - 0.005 * n);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t q = start; q + 10 < pos.size(); q += 10) {
        const double lx = std::log(pos[q]);
        const double ly = std::log((pos.size() - q) / n);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(-slope >= 1.35);
    CHECK(-slope <= 1.65);
}

TEST_CASE("sampler is odd in the angle") {
    for (double a : {0.3, 1.0, 1.7}) {
        for (double v : {0.1, 0.7, 1.3}) {
            CHECK(stable_from_uniforms(a, -v, 0.8) == -stable_from_uniforms(a, v, 0.8));
        }
    }
}

TEST_CASE("sampler is continuous through alpha = 1") {
    const double v = 0.6, w = 1.3;
    CHECK(stable_from_uniforms(1.0 + 1e-7, v, w) == doctest::Approx(stable_from_uniforms(1.0, v, w)).epsilon(1e-5));
    CHECK(stable_from_uniforms(1.0 - 1e-7, v, w) == doctest::Approx(stable_from_uniforms(1.0, v, w)).epsilon(1e-5));
}

TEST_CASE("isotropic noise spec") {
    const NoiseSpec n = NoiseSpec::isotropic(1.2, 0.3);
    CHECK(n.eps_k == 0.3);
    CHECK(n.eps_s == 0.3);
    CHECK_NOTHROW(n.validate());
}
