// Builds the fundamental solution for α(t) = 1 + t/2 on [0, 1], perturbs it by β(t, ξ) = 0.1ξ, and
// compares the Volterra propagator with the direct matrix integration.
#include <cstdio>

#include "evofam/evofam.hpp"

int main() {
    using namespace evofam;

    CoefficientFamily cf;
    cf.alpha = ScalarProfile::affine(1.0, 0.5);
    cf.beta = BetaProfile::separable(ScalarProfile::constant(0.1), Polynomial({0.0, 1.0}));
    cf.horizon = 1.0;

    const Truncation truncation(8);
    const TimeGrid grid(1.0, 200);
    const FundamentalSolutionField u(cf, truncation, grid);

    std::printf("mode   r_n(1,0)        dt r_n(1,0)\n");
    for (int n = 1; n <= truncation.modes(); ++n) {
        const OscillatorSolution sol = solve_mode(ModeIndex(n), 0, cf, grid);
        std::printf("%4d   % .10f   % .10f\n", n, sol.r.back(), sol.rdot.back());
    }

    const PerturbationMatrixField b(cf, truncation, grid);
    const VolterraColumn column = solve_volterra(u, b, 0);
    const double gap = column_gap(column.samples, direct_oracle(cf, b, 0, grid));
    std::printf("\nPicard sweeps: %d\n", column.iterations);
    std::printf("max gap to the direct integration: %.3e\n", gap);
    return 0;
}
