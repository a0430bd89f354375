#include "levytip/stable.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace levytip {

void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) {
        throw std::domain_error("alpha must lie in (0,2), got " + std::to_string(alpha));
    }
}

void NoiseSpec::validate() const {
    require_alpha(alpha);
    if (!(eps_k >= 0.0) || !(eps_s >= 0.0) || !std::isfinite(eps_k) || !std::isfinite(eps_s)) {
        throw std::domain_error("noise intensities must be finite and nonnegative");
    }
}

double c_alpha(double alpha) {
    require_alpha(alpha);
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    return alpha * std::tgamma(0.5 * (1.0 + alpha)) /
           (std::pow(2.0, 1.0 - alpha) * sqrt_pi * std::tgamma(1.0 - 0.5 * alpha));
}

double jump_density(double x, double alpha) {
    if (x == 0.0 || !std::isfinite(x)) throw std::domain_error("jump_density: x must be finite and nonzero");
    return c_alpha(alpha) * std::pow(std::abs(x), -(1.0 + alpha));
}

double stable_from_uniforms(double alpha, double v, double w) {
    if (alpha == 1.0) return std::tan(v);
    const double cos_v = std::cos(v);
    return std::sin(alpha * v) / std::pow(cos_v, 1.0 / alpha) *
           std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
}

}  // namespace levytip
