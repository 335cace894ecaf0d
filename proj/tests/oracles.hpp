#pragma once

// Independent reference computations used by the tests. None of them share code paths with the
// library's integrators or quadrature.

#include <array>
#include <cmath>
#include <functional>

#include <boost/numeric/odeint.hpp>

namespace oracle {

/// State (r, r', c, c') at time t for r'' = −n²α(t)r with r(s)=0, r'(s)=1 and c(s)=1, c'(s)=0, by
/// adaptive Dormand–Prince 5(4) with absolute and relative tolerance `tol`.
inline std::array<double, 4> oscillator(int n, const std::function<double(double)>& alpha, double s, double t,
                                        double tol = 1e-12) {
    using State = std::array<double, 4>;
    namespace odeint = boost::numeric::odeint;
    State y{0.0, 1.0, 1.0, 0.0};
    if (t == s) return y;
    const double n2 = static_cast<double>(n) * n;
    auto rhs = [&](const State& x, State& dx, double tau) {
        const double k = n2 * alpha(tau);
        dx = {x[1], -k * x[0], x[3], -k * x[2]};
    };
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_adaptive(stepper, rhs, y, s, t, 1e-3);
    return y;
}

/// (2/π)∫₀^π w(ξ) sin(nξ) sin(mξ) dξ by the composite midpoint rule with `points` cells.
inline double projection(const std::function<double(double)>& w, int n, int m, int points = 1'000'000) {
    const double h = M_PI / points;
    double acc = 0.0;
    for (int k = 0; k < points; ++k) {
        const double xi = (k + 0.5) * h;
        acc += w(xi) * std::sin(n * xi) * std::sin(m * xi);
    }
    return 2.0 / M_PI * acc * h;
}

/// max of f over `points` equispaced samples of [a, b].
inline double dense_max(const std::function<double(double)>& f, double a, double b, int points = 10'000) {
    double best = -INFINITY;
    for (int k = 0; k < points; ++k) best = std::max(best, f(a + (b - a) * k / (points - 1)));
    return best;
}

/// Dense propagator of the truncated first-order system d/dt V = G(t)V, V(s)=I, by odeint's
/// adaptive Cash–Karp stepper on the flattened matrix.
template <class Generator>
std::vector<double> matrix_flow(const Generator& generator, int dim, double s, double t, double tol = 1e-11) {
    using State = std::vector<double>;
    namespace odeint = boost::numeric::odeint;
    State y(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int k = 0; k < dim; ++k) y[static_cast<std::size_t>(k) * dim + k] = 1.0;
    if (t == s) return y;
    auto rhs = [&](const State& x, State& dx, double tau) {
        const auto g = generator(tau);
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                double acc = 0.0;
                for (int k = 0; k < dim; ++k) acc += g(i, k) * x[static_cast<std::size_t>(k) * dim + j];
                dx[static_cast<std::size_t>(i) * dim + j] = acc;
            }
        }
    };
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_cash_karp54<State>());
    odeint::integrate_adaptive(stepper, rhs, y, s, t, 1e-3);
    return y;
}

}  // namespace oracle
