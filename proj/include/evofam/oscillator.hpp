#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "evofam/coefficients.hpp"
#include "evofam/core.hpp"

namespace evofam {

struct OscillatorOptions {
    /// Upper bound on the phase n·√(sup α)·h advanced by one internal RK4 substep.
    double max_phase_step = 0.025;
    /// Multiplies the internal substep; 0.5 halves it.
    double substep_scale = 1.0;
    /// Integrate even when α is constant (bypasses the closed form).
    bool force_integrator = false;
};

/// Per-mode fundamental pair for base node s on nodes t_i ≥ s:
///   r'' + n²α(t) r = 0, r(s) = 0, r'(s) = 1   (sine type, r = r_n(·,s))
///   c'' + n²α(t) c = 0, c(s) = 1, c'(s) = 0   (cosine type, c = −∂s r_n(·,s))
/// Entry k of each array belongs to node base_node + k.
struct OscillatorSolution {
    int mode = 1;
    int base_node = 0;
    TimeGrid grid{1.0, 1};
    bool closed_form = false;
    std::vector<double> r, rdot, c, cdot;

    int size() const { return static_cast<int>(r.size()); }
    double base_time() const { return grid.node(base_node); }
    double time_at(int k) const { return grid.node(base_node + k); }

    double r_at(int node) const { return r[offset(node)]; }
    double rdot_at(int node) const { return rdot[offset(node)]; }
    double c_at(int node) const { return c[offset(node)]; }
    double cdot_at(int node) const { return cdot[offset(node)]; }

private:
    std::size_t offset(int node) const {
        if (node < base_node || node > grid.intervals()) {
            throw DomainError("node outside [s, T] for this oscillator solution");
        }
        return static_cast<std::size_t>(node - base_node);
    }
};

/// Number of RK4 substeps per grid interval for mode n: the count for h_n = min(T/M, θ/(n√sup α)),
/// divided by `substep_scale` (scale 1/2 doubles the count exactly).
inline int substeps_per_interval(int n, const CoefficientFamily& cf, const TimeGrid& grid,
                                 const OscillatorOptions& opt = {}) {
    const double freq = n * std::sqrt(std::max(std::abs(cf.sup_alpha()), 1e-12));
    const double h = std::min(grid.step(), opt.max_phase_step / freq);
    const int base = std::max(1, static_cast<int>(std::ceil(grid.step() / h - 1e-9)));
    return std::max(1, static_cast<int>(std::ceil(base / opt.substep_scale - 1e-9)));
}

namespace detail {

using OscState = std::array<double, 4>;

inline OscState osc_rhs(const OscState& y, double k2alpha) {
    return {y[1], -k2alpha * y[0], y[3], -k2alpha * y[2]};
}

inline void rk4_step(OscState& y, double t, double h, double n2, const ScalarProfile& alpha) {
    const double a0 = n2 * alpha.value(t);
    const double am = n2 * alpha.value(t + 0.5 * h);
    const double a1 = n2 * alpha.value(t + h);
    const OscState k1 = osc_rhs(y, a0);
    OscState tmp;
    for (int q = 0; q < 4; ++q) tmp[q] = y[q] + 0.5 * h * k1[q];
    const OscState k2 = osc_rhs(tmp, am);
    for (int q = 0; q < 4; ++q) tmp[q] = y[q] + 0.5 * h * k2[q];
    const OscState k3 = osc_rhs(tmp, am);
    for (int q = 0; q < 4; ++q) tmp[q] = y[q] + h * k3[q];
    const OscState k4 = osc_rhs(tmp, a1);
    for (int q = 0; q < 4; ++q) y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
}

}  // namespace detail

/// Solves the mode-n pair from base node `base_node` to T. Constant α uses the closed forms
/// r = sin(ωτ)/ω, c = cos(ωτ) with ω = n√α, τ = t − s; otherwise classical RK4 with a fixed,
/// mode-dependent substep, reported at grid nodes.
inline OscillatorSolution solve_mode(ModeIndex mode, int base_node, const CoefficientFamily& cf, const TimeGrid& grid,
                                     const OscillatorOptions& opt = {}) {
    if (base_node < 0 || base_node > grid.intervals()) throw DomainError("base node outside the grid");
    const int n = mode.value();
    OscillatorSolution sol;
    sol.mode = n;
    sol.base_node = base_node;
    sol.grid = grid;
    const int count = grid.intervals() - base_node + 1;
    sol.r.resize(count);
    sol.rdot.resize(count);
    sol.c.resize(count);
    sol.cdot.resize(count);

    const double alpha0 = cf.alpha.value(0.0);
    if (cf.alpha.is_constant() && alpha0 > 0.0 && !opt.force_integrator) {
        sol.closed_form = true;
        const double omega = n * std::sqrt(alpha0);
        for (int k = 0; k < count; ++k) {
            const double tau = grid.elapsed(base_node + k, base_node);
            const double sn = std::sin(omega * tau), cs = std::cos(omega * tau);
            sol.r[k] = sn / omega;
            sol.rdot[k] = cs;
            sol.c[k] = cs;
            sol.cdot[k] = -omega * sn;
        }
        return sol;
    }

    const int sub = substeps_per_interval(n, cf, grid, opt);
    const double h = grid.step() / sub;
    const double n2 = static_cast<double>(n) * n;
    detail::OscState y{0.0, 1.0, 1.0, 0.0};
    sol.r[0] = y[0];
    sol.rdot[0] = y[1];
    sol.c[0] = y[2];
    sol.cdot[0] = y[3];
    for (int k = 1; k < count; ++k) {
        const double t0 = grid.node(base_node + k - 1);
        for (int q = 0; q < sub; ++q) detail::rk4_step(y, t0 + q * h, h, n2, cf.alpha);
        sol.r[k] = y[0];
        sol.rdot[k] = y[1];
        sol.c[k] = y[2];
        sol.cdot[k] = y[3];
    }
    return sol;
}

/// ∂t∂s r_n(t, s) = −ċ(t); zero at t = s.
inline double mixed_partial(const OscillatorSolution& sol, int node) {
    if (node < sol.base_node) throw DomainError("mixed_partial requires t >= s");
    return -sol.cdot_at(node);
}

/// Cumulative total variation of log α from 0 to each grid node. Breakpoints include every
/// stationary point of α, so each piece is monotone and the sum is exact.
inline std::vector<double> log_alpha_variation(const CoefficientFamily& cf, const TimeGrid& grid) {
    std::vector<double> breaks;
    for (int i = 0; i < grid.nodes(); ++i) breaks.push_back(grid.node(i));
    for (double t : cf.alpha.critical_points(grid.horizon())) breaks.push_back(t);
    std::sort(breaks.begin(), breaks.end());

    std::vector<double> cumulative(grid.nodes(), 0.0);
    double acc = 0.0;
    std::size_t b = 0;
    double prev_t = 0.0;
    double prev_log = std::log(cf.alpha.value(0.0));
    for (int i = 1; i < grid.nodes(); ++i) {
        const double ti = grid.node(i);
        while (b < breaks.size() && breaks[b] <= ti) {
            if (breaks[b] > prev_t) {
                const double lg = std::log(cf.alpha.value(breaks[b]));
                acc += std::abs(lg - prev_log);
                prev_log = lg;
                prev_t = breaks[b];
            }
            ++b;
        }
        cumulative[i] = acc;
    }
    return cumulative;
}

/// Measured maxima of the per-mode quantities against the stated and the energy bounds.
struct BoundMeasures {
    /// max |r|·√α(s)·n (stated bound ≤ 1)
    double r_ratio = 0.0;
    /// max |∂t r| (stated bound ≤ 1)
    double rdot_max = 0.0;
    /// max |∂t∂s r| / n (stated bound ≤ 1)
    double mixed_ratio = 0.0;
    /// Largest excess of |r|, |∂t r|, |c|, |∂t c| over the Grönwall energy bounds
    ///   |r| ≤ e^{V/2}/(n√α(s)), |∂t r| ≤ √(α(t)/α(s)) e^{V/2}, |c| ≤ e^{V/2}, |∂t c| ≤ n√α(t) e^{V/2},
    /// where V is the variation of log α over [s, t]. Valid for every C¹ α > 0.
    double energy_excess = -std::numeric_limits<double>::infinity();
    /// max |c ṙ − ċ r − 1|
    double wronskian_defect = 0.0;
};

inline BoundMeasures measure_bounds(const OscillatorSolution& sol, const CoefficientFamily& cf,
                                    const std::vector<double>& log_variation) {
    BoundMeasures m;
    const int n = sol.mode;
    const double alpha_s = cf.alpha.value(sol.base_time());
    const double sqrt_as = std::sqrt(alpha_s);
    for (int k = 0; k < sol.size(); ++k) {
        const int node = sol.base_node + k;
        m.r_ratio = std::max(m.r_ratio, std::abs(sol.r[k]) * sqrt_as * n);
        m.rdot_max = std::max(m.rdot_max, std::abs(sol.rdot[k]));
        m.mixed_ratio = std::max(m.mixed_ratio, std::abs(sol.cdot[k]) / n);
        const double defect = std::abs(sol.c[k] * sol.rdot[k] - sol.cdot[k] * sol.r[k] - 1.0);
        if (!(defect <= m.wronskian_defect)) m.wronskian_defect = defect;

        const double growth = std::exp(0.5 * (log_variation[node] - log_variation[sol.base_node]));
        const double alpha_t = cf.alpha.value(sol.time_at(k));
        const double excess = std::max({
            std::abs(sol.r[k]) - growth / (n * sqrt_as),
            std::abs(sol.rdot[k]) - std::sqrt(alpha_t / alpha_s) * growth,
            std::abs(sol.c[k]) - growth,
            std::abs(sol.cdot[k]) - n * std::sqrt(alpha_t) * growth,
        });
        m.energy_excess = std::max(m.energy_excess, excess);
    }
    return m;
}

inline BoundMeasures measure_bounds(const OscillatorSolution& sol, const CoefficientFamily& cf) {
    return measure_bounds(sol, cf, log_alpha_variation(cf, sol.grid));
}

}  // namespace evofam
