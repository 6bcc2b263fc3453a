#pragma once

#include "bandctl/auxiliary.hpp"
#include "bandctl/error.hpp"
#include "bandctl/model.hpp"
#include "bandctl/roots.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

namespace bandctl {

enum class Regime {
    BandFull,      // call to A at 0, refund to B at b
    DividendOnly,  // refunds only; reaching 0 is ruin
};

inline const char* to_string(Regime r) {
    return r == Regime::BandFull ? "BandFull" : "DividendOnly";
}

/// Band policy (0, A; B, b) plus the switching point x0 of the rate control.
struct BandPolicy {
    Regime regime = Regime::BandFull;
    double a = 0.0;
    double A = 0.0;
    double B = 0.0;
    double b = 0.0;
    double S_star = 0.0;
    double x0 = 0.0;
};

/// V(x) = v(x + S*), bundled with the auxiliary solution it is built from.
struct ValueFunction {
    AuxSolution aux;
    BandPolicy policy;
    std::string note;  // advisory remark, e.g. at the regime boundary

    double S_star() const { return policy.S_star; }
    const ModelParams& params() const { return aux.params; }
};

struct ClassicalConstants {
    double C1;
    double C2;
    double C3;
    double C4;
};

/// Curvilinear-triangle area between -c_plus and H* over [S, A_bar].
inline double curvilinear_J(double S, const AuxSolution& s) {
    const double eps = 1e-12 * std::fmax(1.0, s.A_bar);
    if (!(S >= -eps && S <= s.A_bar + eps)) {
        std::ostringstream os;
        os << "J(S) is defined on [0, " << s.A_bar << "], got " << S;
        throw Error(ErrorKind::DomainError, os.str());
    }
    S = std::clamp(S, 0.0, s.A_bar);
    const double vA = v_eval(s.A_bar, s).value;
    const double vS = v_eval(S, s).value;
    return -s.params.c_plus * (s.A_bar - S) - (vA - vS);
}

/// Shift S* with J(S*) = K_plus, or nothing when K_plus >= K_plus_bar.
inline std::optional<double> solve_S_star(const ModelParams& p, const AuxSolution& s) {
    if (!(p.K_plus < s.K_plus_bar)) return std::nullopt;
    auto f = [&](double S) { return curvilinear_J(S, s) - p.K_plus; };
    const double S = roots::bisect(f, 0.0, s.A_bar, {}, "S*");
    const double resid = std::fabs(curvilinear_J(S, s) - p.K_plus);
    if (resid > 1e-9 * std::fmax(1.0, p.K_plus)) {
        std::ostringstream os;
        os << "S* certificate failed: |J(S*) - K_plus| = " << resid;
        throw Error(ErrorKind::ConvergenceFailure, os.str());
    }
    return S;
}

/// Assembles the band policy and value function from a solved auxiliary
/// problem. K_plus == K_plus_bar yields DividendOnly with an advisory note.
inline ValueFunction build_policy(const ModelParams& p, const AuxSolution& s) {
    ValueFunction vf;
    vf.aux = s;
    vf.aux.params = p;
    BandPolicy& pol = vf.policy;
    if (const auto S = solve_S_star(p, vf.aux)) {
        pol.regime = Regime::BandFull;
        pol.S_star = *S;
        pol.A = s.A_bar - *S;
    } else {
        pol.regime = Regime::DividendOnly;
        pol.S_star = 0.0;
        pol.A = 0.0;
        if (p.K_plus == s.K_plus_bar)
            vf.note = "K_plus equals K_plus_bar: the band policy with S*=0 and A=A_bar is "
                      "equally optimal";
    }
    pol.a = 0.0;
    pol.B = s.B_bar - pol.S_star;
    pol.b = s.b_bar - pol.S_star;
    pol.x0 = s.constants.x_tilde0 - pol.S_star;
    return vf;
}

/// Full pipeline: validate, solve the auxiliary problem, build the policy.
inline ValueFunction solve(const ModelParams& raw) {
    const ModelParams p = validate_params(raw);
    return build_policy(p, solve_auxiliary(p));
}

/// V, V', V''. Beyond b the value is linear with slope -c_minus; at b the
/// curvature is the left limit (flagged one-sided).
inline Derivs V_eval(double x, const ValueFunction& vf) {
    if (!(x >= 0.0)) {
        std::ostringstream os;
        os << "V is defined for x >= 0, got " << x;
        throw Error(ErrorKind::DomainError, os.str());
    }
    const BandPolicy& pol = vf.policy;
    if (x > pol.b) {
        const double Vb = v_eval(vf.aux.b_bar, vf.aux).value;
        return {Vb - vf.params().c_minus * (x - pol.b), -vf.params().c_minus, 0.0};
    }
    Derivs d = v_eval(x == pol.b ? vf.aux.b_bar : x + pol.S_star, vf.aux);
    d.one_sided = (x == pol.b);
    return d;
}

/// Retention fraction from the first-order condition, saturated at 1:
/// u(x) = min((x + S*) / x~0, 1).
inline double feedback_u(double x, double S_star, double x_tilde0) {
    return std::clamp((x + S_star) / x_tilde0, 0.0, 1.0);
}

inline double feedback_u(double x, const BandPolicy& pol) {
    return feedback_u(x, pol.S_star, pol.x0 + pol.S_star);
}

inline double feedback_u(double x, const ValueFunction& vf) {
    return feedback_u(x, vf.policy.S_star, vf.aux.constants.x_tilde0);
}

/// Constants of the general solutions V1 = -C1 (x + C2)^gamma and
/// V2 = C3 exp(rho1 (x - x0)) + C4 exp(-rho2 (x - x0)).
inline ClassicalConstants export_classical_constants(const ValueFunction& vf) {
    const AuxSolution& s = vf.aux;
    return {s.M_star, vf.policy.S_star, -s.M_star * s.a1, -s.M_star * s.a2};
}

} // namespace bandctl
