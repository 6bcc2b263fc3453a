#pragma once

#include "bandctl/error.hpp"

#include <cmath>
#include <sstream>

namespace bandctl {

/// Economic and dynamic primitives of the controlled reserve.
///
/// The uncontrolled reserve drifts at `mu` with volatility `sigma`; a
/// retention fraction u scales both. Calls cost `K_plus + c_plus * xi`,
/// refunds `K_minus - c_minus * |xi|`, and costs are discounted at `r`.
struct ModelParams {
    double mu;
    double sigma;
    double r;
    double c_plus;
    double c_minus;
    double K_plus;
    double K_minus;
};

/// Closed-form constants of the two ODE regimes of the continuation region.
struct DerivedConstants {
    double gamma;         // exponent of the power branch, in (0, 1)
    double rho1;          // positive characteristic root
    double rho2;          // magnitude of the negative characteristic root
    double beta;          // ratio of exponential coefficients, in (-1, 0)
    double lambda_const;  // power/exponential coefficient ratio, < 0
    double x_tilde0;      // switching point of the unshifted problem
};

namespace detail {

inline void require(bool ok, const char* field, double value, const char* constraint) {
    if (!ok) {
        std::ostringstream os;
        os << "= " << value << " violates " << constraint;
        throw ParamOutOfRange(field, os.str());
    }
}

} // namespace detail

/// Checks every sign convention of ModelParams. Non-finite values are
/// rejected along with out-of-range ones.
inline ModelParams validate_params(const ModelParams& raw) {
    using detail::require;
    auto finite = [](double v) { return std::isfinite(v); };
    require(finite(raw.mu) && raw.mu > 0.0, "mu", raw.mu, "mu > 0");
    require(finite(raw.sigma) && raw.sigma > 0.0, "sigma", raw.sigma, "sigma > 0");
    require(finite(raw.r) && raw.r > 0.0, "r", raw.r, "r > 0");
    require(finite(raw.c_plus) && raw.c_plus > 1.0, "c_plus", raw.c_plus, "c_plus > 1");
    require(finite(raw.c_minus) && raw.c_minus > 0.0 && raw.c_minus < 1.0, "c_minus", raw.c_minus,
            "0 < c_minus < 1");
    require(finite(raw.K_plus) && raw.K_plus > 0.0, "k_plus", raw.K_plus, "k_plus > 0");
    require(finite(raw.K_minus) && raw.K_minus > 0.0, "k_minus", raw.K_minus, "k_minus > 0");
    return raw;
}

/// gamma, rho1, rho2, beta, lambda and x~0 in forms free of cancellation.
/// With R = sqrt(mu^2 + 2 r sigma^2):
///   rho1 = 2r / (R + mu),  rho2 = (R + mu) / sigma^2,
///   beta = -2 r sigma^2 / (R + mu)^2,
///   x~0  = sigma^2 mu / (mu^2 + 2 r sigma^2).
inline DerivedConstants derive_constants(const ModelParams& p) {
    const double s2 = p.sigma * p.sigma;
    const double two_r_s2 = 2.0 * p.r * s2;
    const double mu2 = p.mu * p.mu;
    const double root = std::sqrt(mu2 + two_r_s2);
    const double rpm = root + p.mu;

    DerivedConstants c{};
    c.gamma = two_r_s2 / (two_r_s2 + mu2);
    c.rho1 = 2.0 * p.r / rpm;
    c.rho2 = rpm / s2;
    c.beta = -two_r_s2 / (rpm * rpm);
    c.x_tilde0 = s2 * p.mu / (mu2 + two_r_s2);
    c.lambda_const = -(1.0 + c.beta) * std::pow(c.x_tilde0, -c.gamma);
    return c;
}

/// Intervention cost of a jump `xi` (positive: call, negative: refund).
/// Refunds may produce a negative cost, i.e. a net inflow to members.
inline double cost_g(double xi, const ModelParams& p) {
    if (xi > 0.0) return p.K_plus + p.c_plus * xi;
    if (xi < 0.0) return p.K_minus + p.c_minus * xi;
    throw Error(ErrorKind::ZeroJump, "cost_g is undefined for a zero jump");
}

} // namespace bandctl
