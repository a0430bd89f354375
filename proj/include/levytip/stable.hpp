#pragma once

// Symmetric alpha-stable laws: jump-measure normalization and sampling.

#include <cstdint>
#include <random>

namespace levytip {

/// Stability index and per-coordinate noise intensities.
struct NoiseSpec {
    double alpha = 1.0;
    double eps_k = 0.0;
    double eps_s = 0.0;

    /// Same intensity on both coordinates.
    [[nodiscard]] static NoiseSpec isotropic(double alpha, double eps) { return {alpha, eps, eps}; }

    void validate() const;

    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// Throws std::domain_error unless 0 < alpha < 2.
void require_alpha(double alpha);

/// C_alpha = alpha Gamma((1+alpha)/2) / (2^(1-alpha) sqrt(pi) Gamma(1 - alpha/2)).
[[nodiscard]] double c_alpha(double alpha);

/// Density of the jump measure, C_alpha |x|^-(1+alpha). x must be nonzero.
[[nodiscard]] double jump_density(double x, double alpha);

/// Chambers-Mallows-Stuck transform of one uniform angle V in (-pi/2, pi/2)
/// and one standard exponential W into a standard symmetric stable variate
/// (characteristic function exp(-|u|^alpha)).
[[nodiscard]] double stable_from_uniforms(double alpha, double v, double w);

/// Draws one standard symmetric alpha-stable variate.
template <class Rng>
[[nodiscard]] double sample_standard_stable(double alpha, Rng& rng) {
    std::uniform_real_distribution<double> angle(-1.5707963267948966, 1.5707963267948966);
    double v = angle(rng);
    while (v <= -1.5707963267948966) v = angle(rng);
    if (alpha == 1.0) return stable_from_uniforms(alpha, v, 1.0);
    std::exponential_distribution<double> expo(1.0);
    const double w = expo(rng);
    return stable_from_uniforms(alpha, v, w);
}

}  // namespace levytip
