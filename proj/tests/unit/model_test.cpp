#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace bandctl;

namespace {

ParamOutOfRange catch_param(ModelParams p) {
    try {
        validate_params(p);
    } catch (const ParamOutOfRange& e) {
        return e;
    }
    ADD_FAILURE() << "no exception";
    return ParamOutOfRange("none", "");
}

} // namespace

TEST(ValidateParams, AcceptsCanonical) { EXPECT_NO_THROW(validate_params(oracle::kCanonical)); }

TEST(ValidateParams, NamesTheViolatedField) {
    struct Case {
        double ModelParams::*field;
        double bad;
        const char* name;
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    const Case cases[] = {
        {&ModelParams::mu, 0.0, "mu"},           {&ModelParams::mu, -1.0, "mu"},
        {&ModelParams::mu, nan, "mu"},           {&ModelParams::sigma, 0.0, "sigma"},
        {&ModelParams::sigma, inf, "sigma"},     {&ModelParams::r, 0.0, "r"},
        {&ModelParams::c_plus, 1.0, "c_plus"},   {&ModelParams::c_plus, 0.5, "c_plus"},
        {&ModelParams::c_minus, 1.0, "c_minus"}, {&ModelParams::c_minus, 0.0, "c_minus"},
        {&ModelParams::K_plus, 0.0, "k_plus"},   {&ModelParams::K_minus, -0.1, "k_minus"},
        {&ModelParams::K_minus, nan, "k_minus"},
    };
    for (const Case& c : cases) {
        ModelParams p = oracle::kCanonical;
        p.*(c.field) = c.bad;
        const ParamOutOfRange e = catch_param(p);
        EXPECT_EQ(e.field(), c.name);
        EXPECT_EQ(e.kind(), ErrorKind::ParamOutOfRange);
    }
}

TEST(DeriveConstants, CanonicalValues) {
    const DerivedConstants c = derive_constants(oracle::kCanonical);
    const double s2 = std::sqrt(2.0);
    EXPECT_NEAR(c.gamma, 0.5, 1e-12);
    EXPECT_NEAR(c.x_tilde0, 0.5, 1e-12);
    EXPECT_NEAR(c.rho1, s2 - 1.0, 1e-12);
    EXPECT_NEAR(c.rho2, s2 + 1.0, 1e-12);
    EXPECT_NEAR(c.beta, 2.0 * s2 - 3.0, 1e-12);
    EXPECT_NEAR(c.lambda_const, -(1.0 + c.beta) * s2, 1e-12);
}

TEST(DeriveConstants, RootsSolveTheCharacteristicEquation) {
    oracle::ParamSampler gen(11);
    for (int i = 0; i < 500; ++i) {
        const ModelParams p = gen.base();
        const DerivedConstants c = derive_constants(p);
        const auto [r1, r2] = oracle::char_roots(p);
        EXPECT_NEAR(c.rho1, r1, 1e-12 * std::fmax(1.0, r1));
        EXPECT_NEAR(c.rho2, r2, 1e-12 * std::fmax(1.0, r2));
        const double s2 = p.sigma * p.sigma;
        EXPECT_NEAR(c.rho1 * c.rho2, 2.0 * p.r / s2, 1e-12 * 2.0 * p.r / s2);
        EXPECT_NEAR(c.beta, -c.rho1 / c.rho2, 1e-14);
        EXPECT_NEAR(c.gamma, 1.0 - p.mu * p.mu / (p.mu * p.mu + 2.0 * p.r * s2), 1e-14);
        EXPECT_NEAR(c.x_tilde0, c.gamma * p.mu / (2.0 * p.r), 1e-13 * c.x_tilde0);
    }
}

TEST(DeriveConstants, StableWhenDriftDominates) {
    // mu^2 >> r sigma^2: the naive (-mu + sqrt(.)) form loses every digit
    const ModelParams p{1e4, 1e-3, 1e-3, 1.1, 0.9, 0.3, 0.1};
    const DerivedConstants c = derive_constants(p);
    const double exact_rho1 = p.r / p.mu * (1.0 - 0.5 * p.r * p.sigma * p.sigma / (p.mu * p.mu));
    EXPECT_NEAR(c.rho1 / exact_rho1, 1.0, 1e-12);
    EXPECT_GT(c.gamma, 0.0);
    EXPECT_LT(c.beta, 0.0);
}

TEST(CostG, SignConventions) {
    const ModelParams& p = oracle::kCanonical;
    EXPECT_DOUBLE_EQ(cost_g(0.5, p), 0.3 + 1.1 * 0.5);
    EXPECT_DOUBLE_EQ(cost_g(-0.5, p), 0.1 - 0.9 * 0.5);
    EXPECT_LT(cost_g(-1.0, p), 0.0);  // large refunds are net inflows
    try {
        cost_g(0.0, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroJump);
    }
}

TEST(Bisection, ReportsMissingSignChange) {
    try {
        roots::bisect([](double x) { return x * x + 1.0; }, -1.0, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConvergenceFailure);
    }
}

TEST(Bisection, ReportsIterationCap) {
    roots::BisectionOptions opt;
    opt.max_iter = 5;
    try {
        roots::bisect([](double x) { return x - 0.3; }, 0.0, 1.0, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConvergenceFailure);
    }
}

TEST(Bisection, ReachesUlpAccuracy) {
    const double x = roots::bisect([](double t) { return t * t - 2.0; }, 0.0, 2.0);
    EXPECT_NEAR(x, std::sqrt(2.0), 4e-16);
}
