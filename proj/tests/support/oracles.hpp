#pragma once

// Test-only reference computations that do not go through the library's
// closed forms: quadrature, generic minimisers and root finders, naive
// formulas. Also the random parameter generator shared by the suites.

#include "bandctl/bandctl.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

namespace oracle {

using bandctl::ModelParams;

inline constexpr ModelParams kCanonical{1.0, 1.0, 0.5, 1.1, 0.9, 0.3, 0.1};

/// Parameters drawn from a box that keeps every quantity well scaled.
/// K_plus is set to kplus_factor times the threshold of the drawn set.
class ParamSampler {
public:
    explicit ParamSampler(std::uint64_t seed) : rng_(seed) {}

    ModelParams base() {
        auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); };
        ModelParams p{};
        p.mu = U(0.5, 2.0);
        p.sigma = U(0.5, 2.0);
        p.r = U(0.1, 1.0);
        p.c_plus = U(1.05, 2.0);
        p.c_minus = U(0.5, 0.95);
        p.K_minus = U(0.01, 0.5);
        p.K_plus = 1.0;
        return p;
    }

    ModelParams with_factor(double kplus_factor) {
        ModelParams p = base();
        p.K_plus = kplus_factor * bandctl::solve_auxiliary(p).K_plus_bar;
        return p;
    }

    /// Factor drawn from [0.3, 0.9] (calls) or [1.1, 3] (dividends only).
    ModelParams any_regime() {
        const bool band = std::bernoulli_distribution(0.5)(rng_);
        const double f = band ? std::uniform_real_distribution<double>(0.3, 0.9)(rng_)
                              : std::uniform_real_distribution<double>(1.1, 3.0)(rng_);
        return with_factor(f);
    }

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Characteristic roots of sigma^2/2 z^2 + mu z - r = 0 by the textbook
/// quadratic formula: returns (positive root, |negative root|).
inline std::pair<double, double> char_roots(const ModelParams& p) {
    const double a = 0.5 * p.sigma * p.sigma;
    const double disc = std::sqrt(p.mu * p.mu + 4.0 * a * p.r);
    return {(-p.mu + disc) / (2.0 * a), (p.mu + disc) / (2.0 * a)};
}

/// Integral of f over [a, b] with an integrable endpoint singularity.
inline double integrate_singular(const std::function<double(double)>& f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> ts(15);
    return ts.integrate(f, a, b, 1e-14);
}

inline double integrate_smooth(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

/// Maximiser of H by Brent's method on [lo, hi].
inline double argmax_brent(const std::function<double(double)>& f, double lo, double hi) {
    auto neg = [&](double x) { return -f(x); };
    return boost::math::tools::brent_find_minima(neg, lo, hi, 52).first;
}

/// Root of f on a sign-changing bracket by TOMS 748.
inline double root_toms748(const std::function<double(double)>& f, double lo, double hi) {
    std::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), it);
    return 0.5 * (r.first + r.second);
}

/// Threshold K_plus_bar as the quadrature of (-c_plus - H*) over (0, A_bar].
inline double threshold_by_quadrature(const bandctl::AuxSolution& s) {
    auto f = [&](double x) { return -s.params.c_plus - bandctl::H_star_eval(x, s); };
    return integrate_singular(f, 0.0, s.A_bar);
}

/// Five-point central derivative.
inline double deriv5(const std::function<double(double)>& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

} // namespace oracle
