#pragma once

// Dividend-only auxiliary problem: no calls are allowed and reaching zero is
// ruin, v(0) = 0. Its marginal value H* = v' generates the full two-sided
// solution by a shift (see policy.hpp).

#include "bandctl/error.hpp"
#include "bandctl/model.hpp"
#include "bandctl/roots.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace bandctl {

/// Lower bracket floor used next to the x = 0 singularity of H.
inline constexpr double kSingularFloor = 1e-300;

struct PasteCoeffs {
    double a1;
    double a2;
};

struct AuxSolution {
    ModelParams params;
    DerivedConstants constants;
    double a1 = 0.0;
    double a2 = 0.0;
    double M_star = 0.0;
    double x_bar = 0.0;
    double B_bar = 0.0;
    double b_bar = 0.0;
    double A_bar = 0.0;
    double K_plus_bar = 0.0;
};

/// H, its first two derivatives and the antiderivative F with F(0) = 0.
struct HValue {
    double value;
    double slope;
    double curvature;
    double antiderivative;
};

struct AreaResult {
    double I;
    double B_tilde;
    double b_tilde;
};

/// Marginal value of the auxiliary problem: v, v', v''.
/// `one_sided` is set at x = b_bar where v'' is reported as the left limit.
struct Derivs {
    double value;
    double slope;
    double curvature;
    bool one_sided = false;
};

/// Coefficients of the exponential branch of H chosen so that H and H' are
/// continuous at x~0:
///   -a1 rho1   + a2 rho2   = -gamma x~0^(gamma-1)
///   -a1 rho1^2 - a2 rho2^2 = -gamma (gamma-1) x~0^(gamma-2)
inline PasteCoeffs smooth_paste_coeffs(const DerivedConstants& c) {
    const double g = c.gamma;
    const double x0 = c.x_tilde0;
    const double r1 = c.rho1;
    const double r2 = c.rho2;
    const double rhs1 = -g * std::pow(x0, g - 1.0);
    const double rhs2 = -g * (g - 1.0) * std::pow(x0, g - 2.0);
    // | -r1     r2   |
    // | -r1^2  -r2^2 |
    const double det = r1 * r2 * r2 + r2 * r1 * r1;
    if (!(std::isfinite(det) && det != 0.0))
        throw Error(ErrorKind::SingularSystem, "smooth pasting system is singular");
    PasteCoeffs out{};
    out.a1 = (rhs1 * (-r2 * r2) - r2 * rhs2) / det;
    out.a2 = ((-r1) * rhs2 - rhs1 * (-r1 * r1)) / det;
    return out;
}

/// Unscaled H. The power branch is evaluated through exp/log so that
/// arguments down to kSingularFloor stay finite.
inline HValue H_eval(double x, const DerivedConstants& c, double a1, double a2) {
    if (!(x > 0.0)) {
        std::ostringstream os;
        os << "H is defined for x > 0, got " << x;
        throw Error(ErrorKind::DomainError, os.str());
    }
    const double g = c.gamma;
    if (x <= c.x_tilde0) {
        const double lx = std::log(x);
        const double xg = std::exp(g * lx);
        const double xg1 = std::exp((g - 1.0) * lx);
        const double xg2 = std::exp((g - 2.0) * lx);
        const double xg3 = std::exp((g - 3.0) * lx);
        return {-g * xg1, -g * (g - 1.0) * xg2, -g * (g - 1.0) * (g - 2.0) * xg3, -xg};
    }
    const double d = x - c.x_tilde0;
    const double r1 = c.rho1;
    const double r2 = c.rho2;
    const double e1 = std::exp(r1 * d);
    const double e2 = std::exp(-r2 * d);
    return {-a1 * r1 * e1 + a2 * r2 * e2, -a1 * r1 * r1 * e1 - a2 * r2 * r2 * e2,
            -a1 * r1 * r1 * r1 * e1 + a2 * r2 * r2 * r2 * e2, -a1 * e1 - a2 * e2};
}

inline HValue H_eval(double x, const AuxSolution& s) { return H_eval(x, s.constants, s.a1, s.a2); }

/// Unique maximiser of H, from H'(x) = 0 on the exponential branch:
///   exp((rho1 + rho2) (x - x~0)) = -a2 rho2^2 / (a1 rho1^2).
inline double argmax_H(const DerivedConstants& c, double a1, double a2) {
    const double ratio = -a2 * c.rho2 * c.rho2 / (a1 * c.rho1 * c.rho1);
    return c.x_tilde0 + std::log(ratio) / (c.rho1 + c.rho2);
}

inline double argmax_H(const AuxSolution& s) { return argmax_H(s.constants, s.a1, s.a2); }

/// Largest multiplier for which M H touches the level -c_minus.
inline double max_multiplier(const AuxSolution& s) {
    return -s.params.c_minus / H_eval(s.x_bar, s).value;
}

/// Area between M H and the line -c_minus over the interval where M H lies
/// above it. Uses the closed-form antiderivative of H.
inline AreaResult area_I(double M, const AuxSolution& s) {
    const double cm = s.params.c_minus;
    const double x_bar = s.x_bar;
    const double m_max = max_multiplier(s);
    if (!(M > 0.0) || M > m_max * (1.0 + 1e-14)) {
        std::ostringstream os;
        os << "multiplier " << M << " outside (0, " << m_max << "]";
        throw Error(ErrorKind::OutOfRange, os.str());
    }
    auto f = [&](double x) { return M * H_eval(x, s).value + cm; };
    if (!(f(x_bar) > 0.0)) return {0.0, x_bar, x_bar};

    double B_t = kSingularFloor;
    if (f(kSingularFloor) < 0.0) B_t = roots::bisect(f, kSingularFloor, x_bar, {}, "B~_M");

    double hi = x_bar + 1.0;
    double width = 1.0;
    while (f(hi) >= 0.0) {
        width *= 2.0;
        hi = x_bar + width;
        if (!std::isfinite(hi))
            throw Error(ErrorKind::ConvergenceFailure, "b~_M bracket expansion overflowed");
    }
    const double b_t = roots::bisect(f, x_bar, hi, {}, "b~_M");

    const double area = M * (H_eval(b_t, s).antiderivative - H_eval(B_t, s).antiderivative) +
                        cm * (b_t - B_t);
    return {std::fmax(area, 0.0), B_t, b_t};
}

/// Fills M_star, B_bar and b_bar: I(M*) = K_minus, located by bisection
/// after shrinking the lower multiplier bracket geometrically.
inline AuxSolution solve_M_star(const ModelParams& p, AuxSolution s) {
    const double km = p.K_minus;
    const double m_max = max_multiplier(s);
    auto excess = [&](double M) { return area_I(M, s).I - km; };

    double lo = 0.5 * m_max;
    int halvings = 0;
    while (excess(lo) <= 0.0) {
        lo *= 0.5;
        if (++halvings > 2000 || lo < kSingularFloor)
            throw Error(ErrorKind::ConvergenceFailure,
                        "could not bracket M*: area stays below K_minus");
    }
    const double M = roots::bisect(excess, lo, m_max, {}, "M*");
    const AreaResult area = area_I(M, s);
    if (std::fabs(area.I - km) > 1e-9 * std::fmax(1.0, km)) {
        std::ostringstream os;
        os << "M* certificate failed: |I(M*) - K_minus| = " << std::fabs(area.I - km)
           << " with bracket [" << lo << ", " << m_max << "]";
        throw Error(ErrorKind::ConvergenceFailure, os.str());
    }
    s.M_star = M;
    s.B_bar = area.B_tilde;
    s.b_bar = area.b_tilde;
    return s;
}

/// H*(x) = M* H(x) up to b_bar, then the constant -c_minus.
inline double H_star_eval(double x, const AuxSolution& s) {
    if (!(x > 0.0)) {
        std::ostringstream os;
        os << "H* is defined for x > 0, got " << x;
        throw Error(ErrorKind::DomainError, os.str());
    }
    if (x >= s.b_bar) return -s.params.c_minus;
    return s.M_star * H_eval(x, s).value;
}

/// v(x) = integral of H* over [0, x], in closed form.
inline Derivs v_eval(double x, const AuxSolution& s) {
    if (!(x >= 0.0)) {
        std::ostringstream os;
        os << "v is defined for x >= 0, got " << x;
        throw Error(ErrorKind::DomainError, os.str());
    }
    if (x == 0.0) {
        return {0.0, -std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};
    }
    const double M = s.M_star;
    if (x <= s.b_bar) {
        const HValue h = H_eval(x, s);
        return {M * h.antiderivative, M * h.value, M * h.slope, x == s.b_bar};
    }
    const double vb = M * H_eval(s.b_bar, s).antiderivative;
    return {vb - s.params.c_minus * (x - s.b_bar), -s.params.c_minus, 0.0};
}

/// Call target A_bar (H*(A_bar) = -c_plus on the increasing part of H*) and
/// the threshold K_plus_bar = -c_plus A_bar - v(A_bar).
inline std::pair<double, double> compute_A_bar_and_threshold(const ModelParams& p,
                                                             const AuxSolution& s) {
    auto f = [&](double x) { return H_star_eval(x, s) + p.c_plus; };
    double lo = std::fmin(1e-3, 0.5 * s.x_bar);
    while (f(lo) >= 0.0) {
        lo *= 1e-3;
        if (lo < kSingularFloor)
            throw Error(ErrorKind::ConvergenceFailure, "could not bracket A_bar near 0");
    }
    const double A_bar = roots::bisect(f, lo, s.x_bar, {}, "A_bar");
    const double K_bar = -p.c_plus * A_bar - v_eval(A_bar, s).value;
    return {A_bar, K_bar};
}

/// Complete auxiliary solve from validated parameters.
inline AuxSolution solve_auxiliary(const ModelParams& p) {
    AuxSolution s;
    s.params = p;
    s.constants = derive_constants(p);
    const PasteCoeffs pc = smooth_paste_coeffs(s.constants);
    s.a1 = pc.a1;
    s.a2 = pc.a2;
    s.x_bar = argmax_H(s);
    s = solve_M_star(p, s);
    const auto [A_bar, K_bar] = compute_A_bar_and_threshold(p, s);
    s.A_bar = A_bar;
    s.K_plus_bar = K_bar;
    return s;
}

} // namespace bandctl
