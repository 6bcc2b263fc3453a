#pragma once

// Numeric certification of the quasi-variational inequalities
//   min_u (L^u V - r V) >= 0,   M V >= V,   (M V - V) * min_u (L^u V - r V) = 0
// for a constructed ValueFunction.

#include "bandctl/error.hpp"
#include "bandctl/model.hpp"
#include "bandctl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace bandctl {

struct ContinuationResidual {
    double residual;
    double argmin_u;
};

struct InterventionValue {
    double value;     // M V(x)
    double argmin_xi; // 0 encodes the xi -> 0 limit (fixed cost only)
};

/// min over u in [0, 1] of (1/2) u^2 sigma^2 V'' + u mu V' - r V, given the
/// derivatives at a point. The quadratic is convex in u only when V'' > 0;
/// then the stationary point -mu V' / (sigma^2 V'') is a candidate.
inline ContinuationResidual min_residual(const Derivs& d, const ModelParams& p) {
    const double s2 = p.sigma * p.sigma;
    auto q = [&](double u) {
        return 0.5 * u * u * s2 * d.curvature + u * p.mu * d.slope - p.r * d.value;
    };
    ContinuationResidual best{q(0.0), 0.0};
    if (const double q1 = q(1.0); q1 < best.residual) best = {q1, 1.0};
    if (d.curvature > 0.0) {
        const double u = -p.mu * d.slope / (s2 * d.curvature);
        if (u > 0.0 && u < 1.0) {
            if (const double qu = q(u); qu < best.residual) best = {qu, u};
        }
    }
    return best;
}

inline ContinuationResidual min_residual(double x, const ValueFunction& vf) {
    if (!(x > 0.0)) {
        std::ostringstream os;
        os << "continuation residual needs x > 0, got " << x;
        throw Error(ErrorKind::DomainError, os.str());
    }
    return min_residual(V_eval(x, vf), vf.params());
}

/// Point where a call lands: the unique crossing of V' = -c_plus on the
/// increasing part of V'. Equals A under BandFull and A_bar under
/// DividendOnly (where the band A collapses to 0 but calls remain possible
/// in the intervention operator).
inline double call_target(const ValueFunction& vf) {
    return vf.aux.A_bar - vf.policy.S_star;
}

/// Inf-convolution M V(x) = inf_{xi != 0} [g(xi) + V(x + xi)], split into the
/// call part M1 and the refund part M2 and evaluated structurally.
inline InterventionValue M_operator(double x, const ValueFunction& vf) {
    if (!(x >= 0.0)) {
        std::ostringstream os;
        os << "intervention operator needs x >= 0, got " << x;
        throw Error(ErrorKind::DomainError, os.str());
    }
    const ModelParams& p = vf.params();
    const double Vx = V_eval(x, vf).value;

    InterventionValue m1{Vx + p.K_plus, 0.0};
    if (const double y = call_target(vf); x < y)
        m1 = {V_eval(y, vf).value + p.c_plus * (y - x) + p.K_plus, y - x};

    // refunds need x > 0; for 0 < x <= B the infimum is the vanishing-jump limit
    InterventionValue m2{x > 0.0 ? Vx + p.K_minus : std::numeric_limits<double>::infinity(), 0.0};
    if (const double B = vf.policy.B; x > B)
        m2 = {V_eval(B, vf).value - p.c_minus * (x - B) + p.K_minus, B - x};

    return m1.value <= m2.value ? m1 : m2;
}

/// Brute-force inf-convolution of an arbitrary phi over an evenly spaced
/// xi-grid on [xi_lo, xi_hi], skipping xi = 0 and jumps below zero reserve.
inline InterventionValue inf_convolution_grid(double x, const std::function<double(double)>& phi,
                                              const ModelParams& p, double xi_lo, double xi_hi,
                                              int n_points) {
    InterventionValue best{std::numeric_limits<double>::infinity(), 0.0};
    for (int i = 0; i < n_points; ++i) {
        const double xi = xi_lo + (xi_hi - xi_lo) * i / (n_points - 1);
        if (xi == 0.0 || x + xi < 0.0) continue;
        const double val = cost_g(xi, p) + phi(x + xi);
        if (val < best.value) best = {val, xi};
    }
    return best;
}

/// Dense-grid cross-check of M_operator over xi in [-x, 3b].
inline InterventionValue M_operator_grid(double x, const ValueFunction& vf, int n_points = 2001) {
    auto phi = [&](double y) { return V_eval(y, vf).value; };
    return inf_convolution_grid(x, phi, vf.params(), -x, 3.0 * vf.policy.b, n_points);
}

struct QviPoint {
    double x;
    double continuation;   // min_u (L^u V - r V)
    double argmin_u;
    double intervention;   // M V - V
    double tightness;      // product of the positive parts
    double scale;          // max(1, |r V|)
    bool kink;             // evaluated with left-limit derivatives
};

struct BoundaryCheck {
    std::string name;
    double residual;
};

struct QviReport {
    double tol = 1e-6;
    std::vector<QviPoint> points;
    std::vector<BoundaryCheck> boundary;
    double intervention_at_zero = 0.0;   // M V(0) - V(0)
    double worst_continuation = 0.0;     // most negative scaled continuation residual
    double worst_continuation_x = 0.0;
    double worst_equation = 0.0;         // largest |residual| / scale on (0, b)
    double worst_equation_x = 0.0;
    double worst_intervention = 0.0;     // most negative M V - V
    double worst_intervention_x = 0.0;
    double worst_tightness = 0.0;
    double worst_tightness_x = 0.0;
    double worst_boundary = 0.0;
    bool pass = false;
};

/// Pointwise QVI check on (0, 2b]. Points within 1e-9 of the kinks x0 and b
/// are moved onto the kink and evaluated with left limits.
inline QviReport qvi_report(const ValueFunction& vf, int n_grid, double tol = 1e-6) {
    if (n_grid < 100) throw Error(ErrorKind::InvalidConfig, "qvi_report needs n_grid >= 100");
    const ModelParams& p = vf.params();
    const BandPolicy& pol = vf.policy;
    QviReport rep;
    rep.tol = tol;
    rep.points.reserve(static_cast<std::size_t>(n_grid));

    const double x_hi = 2.0 * pol.b;
    for (int i = 1; i <= n_grid; ++i) {
        double x = x_hi * i / n_grid;
        bool kink = false;
        for (double k : {pol.x0, pol.b}) {
            if (k > 0.0 && std::fabs(x - k) < 1e-9) {
                x = k;
                kink = true;
            }
        }
        const Derivs d = V_eval(x, vf);
        const ContinuationResidual c = min_residual(d, p);
        const double mv = M_operator(x, vf).value - d.value;
        const double scale = std::fmax(1.0, std::fabs(p.r * d.value));
        const double tight = std::fmax(c.residual, 0.0) * std::fmax(mv, 0.0);
        rep.points.push_back({x, c.residual, c.argmin_u, mv, tight, scale, kink});

        const double cs = c.residual / scale;
        if (cs < rep.worst_continuation) {
            rep.worst_continuation = cs;
            rep.worst_continuation_x = x;
        }
        if (x < pol.b && std::fabs(cs) > rep.worst_equation) {
            rep.worst_equation = std::fabs(cs);
            rep.worst_equation_x = x;
        }
        if (mv < rep.worst_intervention) {
            rep.worst_intervention = mv;
            rep.worst_intervention_x = x;
        }
        if (tight / scale > rep.worst_tightness) {
            rep.worst_tightness = tight / scale;
            rep.worst_tightness_x = x;
        }
    }

    const double V0 = V_eval(0.0, vf).value;
    rep.intervention_at_zero = M_operator(0.0, vf).value - V0;

    auto add = [&](std::string name, double resid) {
        rep.worst_boundary = std::fmax(rep.worst_boundary, std::fabs(resid));
        rep.boundary.push_back({std::move(name), resid});
    };
    const Derivs dB = V_eval(pol.B, vf);
    const Derivs db = V_eval(pol.b, vf);
    add("V'(B) + c_minus", dB.slope + p.c_minus);
    add("V'(b) + c_minus", db.slope + p.c_minus);
    add("V(b) - V(B) - (K_minus - c_minus (b - B))",
        db.value - dB.value - (p.K_minus - p.c_minus * (pol.b - pol.B)));
    if (pol.regime == Regime::BandFull) {
        const Derivs dA = V_eval(pol.A, vf);
        add("V'(A) + c_plus", dA.slope + p.c_plus);
        add("V(0) - V(A) - (K_plus + c_plus A)", V0 - dA.value - (p.K_plus + p.c_plus * pol.A));
        add("M V(0) - V(0)", rep.intervention_at_zero);
    } else {
        add("V(0)", V0);
    }

    rep.pass = rep.worst_continuation >= -tol && rep.worst_intervention >= -tol &&
               rep.worst_tightness <= tol && rep.worst_equation <= tol &&
               rep.worst_boundary <= tol &&
               rep.intervention_at_zero >= -tol;
    return rep;
}

} // namespace bandctl
