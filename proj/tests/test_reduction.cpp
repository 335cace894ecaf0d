#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace evofam;

namespace {

FundamentalSolutionField harmonic(int n_modes, double horizon, int intervals) {
    return FundamentalSolutionField(fixture::family(ScalarProfile::constant(1.0), BetaProfile::zero(), horizon),
                                    Truncation(n_modes), TimeGrid(horizon, intervals));
}

}  // namespace

TEST(BuildU, IdentityOnDiagonal) {
    const FundamentalSolutionField f(fixture::family(fixture::ramp()), Truncation(4), TimeGrid(1.0, 8));
    for (int i = 0; i <= 8; ++i) {
        const PropagatorSample u = build_U_from_S(f, i, i);
        EXPECT_EQ(u.matrix(), Eigen::MatrixXd::Identity(8, 8));
        EXPECT_DOUBLE_EQ(u.norm(), 1.0);
    }
    EXPECT_THROW(build_U_from_S(f, 2, 3), DomainError);
}

TEST(BuildU, HarmonicRotationBlocks) {
    const double theta = 0.7;
    const FundamentalSolutionField f = harmonic(3, theta, 1);
    const PropagatorSample u = build_U_from_S(f, 1, 0);
    for (int n = 1; n <= 3; ++n) {
        const int k = n - 1;
        EXPECT_NEAR(u.top_left()(k, k), std::cos(n * theta), 1e-15);
        EXPECT_NEAR(u.top_right()(k, k), std::sin(n * theta) / n, 1e-15);
        EXPECT_NEAR(u.bottom_left()(k, k), -n * std::sin(n * theta), 1e-14);
        EXPECT_NEAR(u.bottom_right()(k, k), std::cos(n * theta), 1e-15);
    }
    EXPECT_EQ(u.top_left().norm() - u.top_left().diagonal().norm(), 0.0);
}

TEST(BuildU, BlockDeterminantsEqualWronskian) {
    const FundamentalSolutionField f(fixture::family(ScalarProfile::cosine(1.5, 0.5, 3.0)), Truncation(10),
                                     TimeGrid(1.0, 40));
    EXPECT_LE(symplectic_defect(f), 50 * 1e-8);
    double wronskian = 0.0;
    for (int n = 1; n <= 10; ++n) {
        for (int j = 0; j <= 40; j += 7) {
            wronskian = std::max(wronskian, measure_bounds(f.oscillator(n, j), f.coefficients()).wronskian_defect);
        }
    }
    EXPECT_LE(wronskian, 50 * 1e-8);
    EXPECT_EQ(symplectic_defect(harmonic(5, 2.0, 20)) <= 1e-12, true);
}

TEST(ExtractS, RoundTripIsBitwise) {
    const FundamentalSolutionField f(fixture::family(fixture::ramp()), Truncation(5), TimeGrid(1.0, 12));
    for (int j = 0; j <= 12; j += 3) {
        for (int i = j; i <= 12; i += 2) {
            const Eigen::MatrixXd s = extract_S_from_U(build_U_from_S(f, i, j));
            EXPECT_EQ(Eigen::VectorXd(s.diagonal()), f.multipliers(Multiplier::sine, i, j));
            EXPECT_EQ((s - Eigen::MatrixXd(s.diagonal().asDiagonal())).norm(), 0.0);
        }
    }
    EXPECT_EQ(extract_S_from_U(PropagatorSample::identity(0, 3)), Eigen::MatrixXd::Zero(3, 3));
}

TEST(ExtractS, QuarterPeriodExample) {
    const FundamentalSolutionField f = harmonic(2, M_PI / 2, 2);
    const Eigen::MatrixXd s = extract_S_from_U(build_U_from_S(f, 2, 0));
    EXPECT_NEAR((s - Eigen::Vector2d(1.0, 0.0).asDiagonal().toDenseMatrix()).norm(), 0.0, 1e-15);
}

TEST(ExtractS, AppliedToProductVector) {
    const FundamentalSolutionField f(fixture::family(fixture::ramp()), Truncation(3), TimeGrid(1.0, 6));
    const PropagatorSample u = build_U_from_S(f, 5, 1);
    const Eigen::Vector3d x(0.2, -1.0, 0.5);
    const ProductVector out = u.apply({SpectralVector::zero(3, Space::Z), SpectralVector(x, Space::X)});
    EXPECT_EQ(out.first.coeffs(), Eigen::VectorXd(extract_S_from_U(u) * x));
    EXPECT_EQ(out.second.coeffs(), apply_dtS(f, 5, 1, SpectralVector(x, Space::X)).coeffs());
}

TEST(Generators, FirstOrderFormMatchesMatrixFlow) {
    // The per-mode block U(t,s) solves d/dt U = 𝒜(t)U; compare with an adaptive matrix-ODE oracle.
    const CoefficientFamily cf = fixture::family(fixture::ramp());
    const FundamentalSolutionField f(cf, Truncation(3), TimeGrid(1.0, 20));
    auto generator = [&](double t) { return first_order_generator(cf.alpha_at(t), 3); };
    for (int j : {0, 8}) {
        for (int i : {j, j + 5, 20}) {
            const auto flat = oracle::matrix_flow(generator, 6, f.grid().node(j), f.grid().node(i));
            const Eigen::MatrixXd flow = Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(flat.data());
            EXPECT_LE(z_operator_norm(build_U_from_S(f, i, j).matrix() - flow), 1e-7) << i << "," << j;
        }
    }
}

TEST(PropagatorAxioms, HarmonicGroupLaw) {
    const FundamentalSolutionField f = harmonic(8, 1.0, 200);
    const InvariantReport r = u_axiom_residuals(UnperturbedPropagatorView(f));
    EXPECT_LE(r.residual("propagator_composition"), 1e-9);
    EXPECT_EQ(r.residual("propagator_identity_on_diagonal"), 0.0);
    EXPECT_EQ(r.at("propagator_domain_invariance").kind, CheckKind::structural);
    EXPECT_EQ(r.at("propagator_continuity_modulus").kind, CheckKind::measurement);
    EXPECT_TRUE(r.all_pass());
}

TEST(PropagatorAxioms, RampDerivativesWithinDifferencingError) {
    const FundamentalSolutionField f(fixture::family(fixture::ramp()), Truncation(16), TimeGrid(1.0, 200));
    const InvariantReport r = u_axiom_residuals(UnperturbedPropagatorView(f));
    EXPECT_LE(r.residual("propagator_t_derivative"), 1e-3);
    EXPECT_LE(r.residual("propagator_s_derivative"), 1e-3);
    EXPECT_LE(r.residual("propagator_composition"), 1e-4);
}

TEST(PropagatorAxioms, DifferencingResidualIsSecondOrder) {
    const CoefficientFamily cf = fixture::family(fixture::ramp());
    const double coarse =
        u_axiom_residuals(UnperturbedPropagatorView(FundamentalSolutionField(cf, Truncation(6), TimeGrid(1.0, 50))))
            .residual("propagator_t_derivative");
    const double fine =
        u_axiom_residuals(UnperturbedPropagatorView(FundamentalSolutionField(cf, Truncation(6), TimeGrid(1.0, 100))))
            .residual("propagator_t_derivative");
    EXPECT_NEAR(coarse / fine, 4.0, 0.4);
}

TEST(OperatorNorm, WeightedSpectralNormRoutesAgree) {
    const FundamentalSolutionField f(fixture::family(fixture::ramp()), Truncation(6), TimeGrid(1.0, 10));
    const Eigen::MatrixXd u = build_U_from_S(f, 9, 2).matrix();
    const Eigen::VectorXd w = product_weights(6);
    const Eigen::MatrixXd scaled = w.asDiagonal() * u * w.cwiseInverse().asDiagonal();
    EXPECT_NEAR(spectral_norm_svd(scaled), spectral_norm_power(scaled, 1e-12, 5000), 1e-6);
    EXPECT_NEAR(z_operator_norm(u), spectral_norm_svd(scaled), 1e-12);
}
