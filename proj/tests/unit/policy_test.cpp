#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace bandctl;

namespace {

ValueFunction with_kplus(double factor) {
    ModelParams p = oracle::kCanonical;
    p.K_plus = factor * solve_auxiliary(p).K_plus_bar;
    return solve(p);
}

void expect_band_identities(const ValueFunction& vf, double tol) {
    const ModelParams& p = vf.params();
    const BandPolicy& pol = vf.policy;
    const Derivs dB = V_eval(pol.B, vf);
    const Derivs db = V_eval(pol.b, vf);
    EXPECT_NEAR(dB.slope, -p.c_minus, tol);
    EXPECT_NEAR(db.slope, -p.c_minus, tol);
    EXPECT_NEAR(db.value - dB.value, p.K_minus - p.c_minus * (pol.b - pol.B), tol);
    if (pol.regime == Regime::BandFull) {
        const Derivs dA = V_eval(pol.A, vf);
        EXPECT_NEAR(dA.slope, -p.c_plus, tol);
        EXPECT_NEAR(V_eval(0.0, vf).value - dA.value, p.K_plus + p.c_plus * pol.A, tol);
    } else {
        EXPECT_EQ(V_eval(0.0, vf).value, 0.0);
    }
}

} // namespace

TEST(Policy, CanonicalBandFull) {
    const ValueFunction vf = solve(oracle::kCanonical);
    EXPECT_EQ(vf.policy.regime, Regime::BandFull);
    // S* from quadrature of the triangle area and an independent root finder
    const AuxSolution& s = vf.aux;
    auto J = [&](double S) {
        return oracle::integrate_singular([&](double x) { return -s.params.c_plus - H_star_eval(x, s); }, S,
                                          s.A_bar) -
               oracle::kCanonical.K_plus;
    };
    const double S = oracle::root_toms748(J, 1e-12, s.A_bar * (1 - 1e-12));
    EXPECT_NEAR(vf.policy.S_star, S, 1e-9);
    EXPECT_NEAR(vf.policy.A, s.A_bar - S, 1e-9);
    EXPECT_NEAR(vf.policy.B, s.B_bar - S, 1e-9);
    EXPECT_NEAR(vf.policy.b, s.b_bar - S, 1e-9);
    EXPECT_NEAR(vf.policy.x0, s.constants.x_tilde0 - S, 1e-9);
    EXPECT_EQ(vf.policy.a, 0.0);
    expect_band_identities(vf, 1e-10);
}

TEST(Policy, OrderingAndRegimes) {
    oracle::ParamSampler gen(31);
    for (int i = 0; i < 100; ++i) {
        const ValueFunction vf = solve(gen.any_regime());
        const BandPolicy& pol = vf.policy;
        EXPECT_LE(0.0, pol.A);
        EXPECT_LT(pol.A, pol.B);
        EXPECT_LT(pol.B, pol.b);
        if (vf.params().K_plus < vf.aux.K_plus_bar) {
            EXPECT_EQ(pol.regime, Regime::BandFull);
            EXPECT_GT(pol.A, 0.0);
            EXPECT_NEAR(curvilinear_J(pol.S_star, vf.aux), vf.params().K_plus, 1e-9);
        } else {
            EXPECT_EQ(pol.regime, Regime::DividendOnly);
            EXPECT_EQ(pol.A, 0.0);
            EXPECT_EQ(pol.S_star, 0.0);
        }
        expect_band_identities(vf, 1e-8);
    }
}

TEST(Policy, ThresholdBoundary) {
    ModelParams p = oracle::kCanonical;
    const AuxSolution s = solve_auxiliary(p);

    p.K_plus = s.K_plus_bar;
    const ValueFunction at = solve(p);
    EXPECT_EQ(at.policy.regime, Regime::DividendOnly);
    EXPECT_FALSE(at.note.empty());

    p.K_plus = s.K_plus_bar * (1.0 - 1e-9);
    const ValueFunction below = solve(p);
    EXPECT_EQ(below.policy.regime, Regime::BandFull);
    EXPECT_LT(below.policy.S_star, 1e-3);
    EXPECT_NEAR(below.policy.A, s.A_bar, 1e-3);
    EXPECT_TRUE(below.note.empty());
}

TEST(Policy, ShiftGrowsAsCallsCheapen) {
    double prev = -1.0;
    for (double f : {0.9, 0.7, 0.5, 0.3, 0.1}) {
        const ValueFunction vf = with_kplus(f);
        EXPECT_GT(vf.policy.S_star, prev);
        prev = vf.policy.S_star;
    }
}

TEST(CurvilinearJ, EndpointsAndDomain) {
    const AuxSolution s = solve_auxiliary(oracle::kCanonical);
    EXPECT_NEAR(curvilinear_J(0.0, s), s.K_plus_bar, 1e-14);
    EXPECT_NEAR(curvilinear_J(s.A_bar, s), 0.0, 1e-14);
    for (double S : {-0.1, s.A_bar + 0.1}) {
        try {
            curvilinear_J(S, s);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::DomainError);
        }
    }
}

TEST(ValueFunction, CurvatureChangesSignOnceAndSlopeIsConcave) {
    for (double f : {0.5, 2.0}) {
        const ValueFunction vf = with_kplus(f);
        const BandPolicy& pol = vf.policy;
        const double x_star = vf.aux.x_bar - pol.S_star;
        for (int k = 1; k < 400; ++k) {
            const double x = pol.b * k / 400.0;
            const Derivs d = V_eval(x, vf);
            if (x < x_star - 1e-9) {
                EXPECT_GT(d.curvature, 0.0) << x;
            }
            if (x > x_star + 1e-9) {
                EXPECT_LT(d.curvature, 0.0) << x;
            }
            const double h = 1e-5;
            if (x > 2 * h && x < pol.b - 2 * h) {
                const double third = oracle::deriv5([&](double t) { return V_eval(t, vf).curvature; }, x, h);
                EXPECT_LT(third, 0.0) << x;
            }
            EXPECT_LT(d.slope, 0.0);
        }
    }
}

TEST(ValueFunction, LinearBeyondUpperBand) {
    const ValueFunction vf = with_kplus(0.5);
    const double b = vf.policy.b;
    const double Vb = V_eval(b, vf).value;
    for (double dx : {0.1, 1.0, 10.0}) {
        const Derivs d = V_eval(b + dx, vf);
        EXPECT_NEAR(d.value, Vb - vf.params().c_minus * dx, 1e-12);
        EXPECT_EQ(d.curvature, 0.0);
    }
    EXPECT_TRUE(V_eval(b, vf).one_sided);
    try {
        V_eval(-1e-3, vf);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DomainError);
    }
}

TEST(ValueFunction, ClassicalConstantsReproduceV) {
    for (double f : {0.5, 2.0}) {
        const ValueFunction vf = with_kplus(f);
        const ClassicalConstants k = export_classical_constants(vf);
        const DerivedConstants& c = vf.aux.constants;
        const BandPolicy& pol = vf.policy;
        EXPECT_EQ(k.C2, pol.S_star);
        for (int i = 1; i <= 50; ++i) {
            const double x = pol.b * i / 51.0;
            const double V = V_eval(x, vf).value;
            const double ref = x <= pol.x0
                                   ? -k.C1 * std::pow(x + k.C2, c.gamma)
                                   : k.C3 * std::exp(c.rho1 * (x - pol.x0)) + k.C4 * std::exp(-c.rho2 * (x - pol.x0));
            EXPECT_NEAR(V, ref, 1e-12) << x;
        }
    }
}

TEST(Feedback, RetentionIsLinearThenFull) {
    const ValueFunction vf = with_kplus(0.5);
    const double xt0 = vf.aux.constants.x_tilde0;
    const double S = vf.policy.S_star;
    EXPECT_NEAR(feedback_u(0.0, vf), S / xt0, 1e-15);
    EXPECT_NEAR(feedback_u(0.5 * vf.policy.x0, vf), (0.5 * vf.policy.x0 + S) / xt0, 1e-15);
    EXPECT_NEAR(feedback_u(vf.policy.x0, vf), 1.0, 1e-12);
    EXPECT_EQ(feedback_u(vf.policy.b, vf), 1.0);
    EXPECT_DOUBLE_EQ(feedback_u(0.2, vf.policy), feedback_u(0.2, vf));
    // the first-order condition -mu V' / (sigma^2 V'') below the switch
    const ModelParams& p = vf.params();
    for (double x : {0.05, 0.2, 0.4}) {
        const Derivs d = V_eval(x, vf);
        if (x < vf.policy.x0) {
            EXPECT_NEAR(feedback_u(x, vf), -p.mu * d.slope / (p.sigma * p.sigma * d.curvature), 1e-12);
        }
    }
}
