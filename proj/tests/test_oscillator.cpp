#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace evofam;

namespace {

OscillatorOptions integrated() {
    OscillatorOptions opt;
    opt.force_integrator = true;
    return opt;
}

// r(1), r'(1), c(1), c'(1) for n = 2, α = 1 + t, s = 0, pinned from an adaptive DOP853 run at
// rtol 1e-13 before the solver existed.
constexpr double pinned_r = 0.259401778455;
constexpr double pinned_rdot = -0.948584672769;
constexpr double pinned_c = -0.605374088760;
constexpr double pinned_cdot = -1.641281800945;

}  // namespace

TEST(Oscillator, ClosedFormQuarterPeriod) {
    const CoefficientFamily cf = fixture::family(ScalarProfile::constant(1.0), BetaProfile::zero(), M_PI);
    const TimeGrid grid(M_PI, 4);
    const OscillatorSolution sol = solve_mode(ModeIndex(1), 0, cf, grid);
    EXPECT_TRUE(sol.closed_form);
    EXPECT_NEAR(sol.r_at(2), 1.0, 1e-15);
    EXPECT_NEAR(sol.c_at(2), 0.0, 1e-15);
    EXPECT_NEAR(mixed_partial(sol, 2), 1.0, 1e-15);
}

TEST(Oscillator, ClosedFormScaledFrequency) {
    const double horizon = M_PI / 6;
    const CoefficientFamily cf = fixture::family(ScalarProfile::constant(4.0), BetaProfile::zero(), horizon);
    const OscillatorSolution sol = solve_mode(ModeIndex(3), 0, cf, TimeGrid(horizon, 3));
    EXPECT_NEAR(sol.r_at(3), 0.0, 1e-15);
    EXPECT_NEAR(sol.c_at(3), -1.0, 1e-15);
}

TEST(Oscillator, InitialConditionsAndMixedPartialVanishOnDiagonal) {
    const CoefficientFamily cf = fixture::family(fixture::ramp());
    const TimeGrid grid(1.0, 20);
    for (int n : {1, 4, 9}) {
        for (int s : {0, 7, 20}) {
            const OscillatorSolution sol = solve_mode(ModeIndex(n), s, cf, grid);
            EXPECT_EQ(sol.r_at(s), 0.0);
            EXPECT_EQ(sol.rdot_at(s), 1.0);
            EXPECT_EQ(sol.c_at(s), 1.0);
            EXPECT_EQ(sol.cdot_at(s), 0.0);
            EXPECT_EQ(mixed_partial(sol, s), 0.0);
            EXPECT_EQ(sol.size(), grid.intervals() - s + 1);
        }
    }
    const OscillatorSolution sol = solve_mode(ModeIndex(2), 5, cf, grid);
    EXPECT_THROW(mixed_partial(sol, 4), DomainError);
    EXPECT_THROW(sol.r_at(4), DomainError);
}

TEST(Oscillator, PinnedReferenceAgreesWithRuntimeOracle) {
    const auto ref = oracle::oscillator(2, [](double t) { return 1.0 + t; }, 0.0, 1.0, 1e-13);
    EXPECT_NEAR(ref[0], pinned_r, 1e-10);
    EXPECT_NEAR(ref[1], pinned_rdot, 1e-10);
    EXPECT_NEAR(ref[2], pinned_c, 1e-10);
    EXPECT_NEAR(ref[3], pinned_cdot, 1e-10);
}

TEST(Oscillator, VariableAlphaMatchesAdaptiveOracle) {
    const CoefficientFamily cf = fixture::family(ScalarProfile::affine(1.0, 1.0));
    for (int m : {1, 10, 100}) {
        const OscillatorSolution sol = solve_mode(ModeIndex(2), 0, cf, TimeGrid(1.0, m));
        EXPECT_NEAR(sol.r_at(m), pinned_r, 1e-6) << "M=" << m;
        EXPECT_NEAR(sol.rdot_at(m), pinned_rdot, 1e-6);
        EXPECT_NEAR(sol.c_at(m), pinned_c, 1e-6);
        EXPECT_NEAR(mixed_partial(sol, m), -pinned_cdot, 1e-6);
    }
    const TimeGrid grid(1.0, 10);
    const OscillatorSolution sol = solve_mode(ModeIndex(5), 3, cf, grid);
    for (int i = 3; i <= 10; ++i) {
        const auto ref = oracle::oscillator(5, [](double t) { return 1.0 + t; }, grid.node(3), grid.node(i));
        EXPECT_NEAR(sol.r_at(i), ref[0], 1e-7);
        EXPECT_NEAR(sol.rdot_at(i), ref[1], 1e-6);
        EXPECT_NEAR(sol.c_at(i), ref[2], 1e-6);
        EXPECT_NEAR(sol.cdot_at(i), ref[3], 1e-5);
    }
}

TEST(Oscillator, IntegratorPathMatchesClosedForm) {
    const CoefficientFamily cf = fixture::family(ScalarProfile::constant(2.0), BetaProfile::zero(), 2.0);
    const TimeGrid grid(2.0, 40);
    for (int n : {1, 6, 13}) {
        const OscillatorSolution exact = solve_mode(ModeIndex(n), 4, cf, grid);
        const OscillatorSolution rk = solve_mode(ModeIndex(n), 4, cf, grid, integrated());
        EXPECT_FALSE(rk.closed_form);
        for (int i = 4; i <= 40; ++i) {
            EXPECT_NEAR(rk.r_at(i), exact.r_at(i), 1e-7);
            EXPECT_NEAR(rk.cdot_at(i), exact.cdot_at(i), 1e-5 * n);
        }
    }
}

TEST(Oscillator, WronskianHoldsOnEveryPath) {
    const TimeGrid grid(1.0, 50);
    for (const ScalarProfile& p : {ScalarProfile::affine(1.0, 0.5), ScalarProfile::cosine(1.5, 0.5, 4.0),
                                   ScalarProfile::table({0, 0.5, 1}, {1, 1.4, 1.1})}) {
        const CoefficientFamily cf = fixture::family(p);
        for (int n : {1, 8, 24}) {
            for (int s : {0, 25}) {
                const BoundMeasures m = measure_bounds(solve_mode(ModeIndex(n), s, cf, grid), cf);
                EXPECT_LE(m.wronskian_defect, 50 * 1e-8) << p.family() << " n=" << n;
                EXPECT_LE(m.energy_excess, 1e-6);
            }
        }
    }
}

TEST(Oscillator, TranslationInvarianceForConstantAlpha) {
    const CoefficientFamily cf = fixture::family(ScalarProfile::constant(3.0), BetaProfile::zero(), 1.0);
    const TimeGrid grid(1.0, 30);
    const OscillatorSolution a = solve_mode(ModeIndex(4), 0, cf, grid);
    const OscillatorSolution b = solve_mode(ModeIndex(4), 11, cf, grid);
    for (int k = 0; k < b.size(); ++k) {
        EXPECT_EQ(a.r[k], b.r[k]);
        EXPECT_EQ(a.cdot[k], b.cdot[k]);
    }
}

TEST(Oscillator, FourthOrderConvergenceUnderSubstepHalving) {
    const CoefficientFamily cf = fixture::family(ScalarProfile::affine(1.0, 1.0));
    const TimeGrid grid(1.0, 10);
    const auto ref = oracle::oscillator(6, [](double t) { return 1.0 + t; }, 0.0, 1.0, 1e-13);
    auto error = [&](double scale) {
        OscillatorOptions opt;
        opt.max_phase_step = 0.4;
        opt.substep_scale = scale;
        const OscillatorSolution sol = solve_mode(ModeIndex(6), 0, cf, grid, opt);
        return std::max(std::abs(sol.r.back() - ref[0]), std::abs(sol.c.back() - ref[2]));
    };
    const double coarse = error(1.0), fine = error(0.5);
    EXPECT_GE(coarse / fine, 12.0) << coarse << " " << fine;
}

TEST(Oscillator, StatedBoundsHoldForConstantAlpha) {
    const CoefficientFamily cf = fixture::family(ScalarProfile::constant(1.0), BetaProfile::zero(), 3.0);
    const TimeGrid grid(3.0, 60);
    for (int n = 1; n <= 16; ++n) {
        const BoundMeasures m = measure_bounds(solve_mode(ModeIndex(n), 0, cf, grid), cf);
        EXPECT_LE(m.r_ratio, 1.0 + 1e-8);
        EXPECT_LE(m.rdot_max, 1.0 + 1e-8);
        EXPECT_LE(m.mixed_ratio, 1.0 + 1e-8);
    }
}

TEST(Oscillator, AmplitudeBoundHoldsForNondecreasingAlpha) {
    // r² + r'²/(n²α) is nonincreasing when α' ≥ 0, which gives |r| ≤ 1/(n√α(s)).
    const CoefficientFamily cf = fixture::family(fixture::ramp());
    const TimeGrid grid(1.0, 100);
    for (int n : {1, 3, 17, 40}) {
        for (int s : {0, 50, 99}) {
            EXPECT_LE(measure_bounds(solve_mode(ModeIndex(n), s, cf, grid), cf).r_ratio, 1.0 + 1e-6);
        }
    }
}

TEST(Oscillator, LogVariationIsExactForOscillatingAlpha) {
    const CoefficientFamily cf = fixture::family(ScalarProfile::cosine(2.0, 0.5, 10.0));
    const TimeGrid grid(1.0, 3);
    const std::vector<double> v = log_alpha_variation(cf, grid);
    double dense = 0.0;
    const int points = 200000;
    for (int k = 1; k <= points; ++k) {
        dense += std::abs(std::log(cf.alpha_at(double(k) / points)) - std::log(cf.alpha_at(double(k - 1) / points)));
    }
    EXPECT_NEAR(v.back(), dense, 1e-9);
    EXPECT_EQ(v.front(), 0.0);
}
