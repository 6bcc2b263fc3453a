#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bandctl;

namespace {

ValueFunction with_kplus(double factor) {
    ModelParams p = oracle::kCanonical;
    p.K_plus = factor * solve_auxiliary(p).K_plus_bar;
    return solve(p);
}

} // namespace

TEST(Tridiagonal, MatchesDenseElimination) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.1, 1.0);
    const std::size_t n = 12;
    std::vector<double> lo(n), di(n), up(n), rhs(n), x;
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = i ? -U(rng) : 0.0;
        up[i] = i + 1 < n ? -U(rng) : 0.0;
        di[i] = std::fabs(lo[i]) + std::fabs(up[i]) + U(rng);
        rhs[i] = U(rng) - 0.5;
    }
    fd_detail::solve_tridiagonal(lo, di, up, rhs, x);
    for (std::size_t i = 0; i < n; ++i) {
        double row = di[i] * x[i];
        if (i) row += lo[i] * x[i - 1];
        if (i + 1 < n) row += up[i] * x[i + 1];
        EXPECT_NEAR(row, rhs[i], 1e-14);
    }
}

TEST(FdOracle, BandFullOnAUniformGrid) {
    const ValueFunction vf = with_kplus(0.5);
    const double h = 4e-3;
    const GridSolution g = solve_qvi_fd(vf.params(), 3.0 * vf.aux.b_bar, h);
    EXPECT_FALSE(g.graded);
    const FdComparison c = compare_to_analytic(g, vf);
    EXPECT_LT(c.sup_error, 1e-2);
    EXPECT_TRUE(c.bands_within_2h) << c.A_detected << ' ' << c.B_detected << ' ' << c.b_detected;
    EXPECT_EQ(g.action[0], NodeAction::Call);
}

TEST(FdOracle, DividendOnlyGradesTowardTheOrigin) {
    const ValueFunction vf = with_kplus(2.0);
    const double h = 4e-3;
    const GridSolution g = solve_qvi_fd(vf.params(), 3.0 * vf.aux.b_bar, h);
    EXPECT_TRUE(g.graded);
    EXPECT_EQ(g.action[0], NodeAction::Ruin);
    const FdComparison c = compare_to_analytic(g, vf);
    EXPECT_LT(c.sup_error, 1e-2);
    EXPECT_TRUE(c.bands_within_2h);
    EXPECT_TRUE(c.lower_set_empty);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LE(g.nodes[i] - g.nodes[i - 1], h * (1 + 1e-12));
}

TEST(FdOracle, UniformGridConvergesSlowlyAtAnAbsorbingOrigin) {
    // V ~ -x^gamma near 0 caps a uniform grid at half order
    const ValueFunction vf = with_kplus(2.0);
    FdOptions opt;
    opt.grading = OriginGrading::Never;
    const double xmax = 3.0 * vf.aux.b_bar;
    const double e1 = compare_to_analytic(solve_qvi_fd(vf.params(), xmax, 8e-3, opt), vf).sup_error;
    const double e2 = compare_to_analytic(solve_qvi_fd(vf.params(), xmax, 4e-3, opt), vf).sup_error;
    EXPECT_LT(e1 / e2, 1.6);
    opt.grading = OriginGrading::Always;
    const double g1 = compare_to_analytic(solve_qvi_fd(vf.params(), xmax, 8e-3, opt), vf).sup_error;
    const double g2 = compare_to_analytic(solve_qvi_fd(vf.params(), xmax, 4e-3, opt), vf).sup_error;
    EXPECT_GT(g1 / g2, 1.8);
    EXPECT_LT(g2, e2);
}

TEST(FdOracle, FirstOrderConvergenceInBandFull) {
    const ValueFunction vf = with_kplus(0.5);
    const double xmax = 3.0 * vf.aux.b_bar;
    const double e1 = compare_to_analytic(solve_qvi_fd(vf.params(), xmax, 8e-3), vf).sup_error;
    const double e2 = compare_to_analytic(solve_qvi_fd(vf.params(), xmax, 4e-3), vf).sup_error;
    EXPECT_GT(e1 / e2, 1.5);
}

TEST(FdOracle, RejectsBadGrids) {
    for (auto [xmax, h] : {std::pair{1.0, 0.0}, std::pair{0.01, 0.01}}) {
        try {
            solve_qvi_fd(oracle::kCanonical, xmax, h);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
        }
    }
}
