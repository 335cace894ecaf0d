#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "evofam/coefficients.hpp"
#include "evofam/core.hpp"
#include "evofam/oscillator.hpp"
#include "evofam/parallel.hpp"
#include "evofam/probes.hpp"
#include "evofam/report.hpp"

namespace evofam {

/// Per-mode multiplier families of S and its partial derivatives.
enum class Multiplier {
    /// r_n: S
    sine,
    /// ṙ_n: ∂t S
    sine_dt,
    /// c_n: −∂s S
    cosine,
    /// ċ_n: −∂t∂s S
    cosine_dt,
};

/// S(t,s) on the truncation, stored as per-mode tables over node pairs (i, j), i ≥ j.
/// S acts diagonally: (S(t_i,t_j)x)_n = r_n(t_i,t_j) x_n.
class FundamentalSolutionField {
public:
    FundamentalSolutionField(CoefficientFamily cf, Truncation truncation, TimeGrid grid, OscillatorOptions opt = {})
        : cf_(std::move(cf)), truncation_(truncation), grid_(grid), options_(opt) {
        const int n_modes = truncation_.modes();
        const int nodes = grid_.nodes();
        tables_.resize(n_modes);
        for (auto& mode : tables_) {
            for (auto& table : mode) table = Eigen::MatrixXd::Zero(nodes, nodes);
        }
        const std::size_t tasks = static_cast<std::size_t>(n_modes) * nodes;
        std::vector<char> closed(tasks, 0);
        parallel_for(tasks, [&](std::size_t k) {
            const int n = static_cast<int>(k / nodes) + 1;
            const int j = static_cast<int>(k % nodes);
            const OscillatorSolution sol = solve_mode(ModeIndex(n), j, cf_, grid_, options_);
            auto& mode = tables_[n - 1];
            for (int q = 0; q < sol.size(); ++q) {
                mode[0](j + q, j) = sol.r[q];
                mode[1](j + q, j) = sol.rdot[q];
                mode[2](j + q, j) = sol.c[q];
                mode[3](j + q, j) = sol.cdot[q];
            }
            closed[k] = sol.closed_form;
        });
        closed_form_ = std::all_of(closed.begin(), closed.end(), [](char c) { return c != 0; });
    }

    const CoefficientFamily& coefficients() const { return cf_; }
    const TimeGrid& grid() const { return grid_; }
    int modes() const { return truncation_.modes(); }
    Truncation truncation() const { return truncation_; }
    const OscillatorOptions& options() const { return options_; }
    /// True when every mode used the constant-coefficient closed form.
    bool closed_form() const { return closed_form_; }

    /// Dense (M+1)×(M+1) table of one multiplier for mode n; only the lower triangle i ≥ j is meaningful.
    const Eigen::MatrixXd& table(Multiplier q, int n) const {
        if (n < 1 || n > modes()) throw DomainError("mode outside the truncation");
        return tables_[n - 1][static_cast<int>(q)];
    }

    double value(Multiplier q, int n, int t_node, int s_node) const {
        require_pair(t_node, s_node);
        return table(q, n)(t_node, s_node);
    }

    /// (m_1, ..., m_N) at (t_i, t_j).
    Eigen::VectorXd multipliers(Multiplier q, int t_node, int s_node) const {
        require_pair(t_node, s_node);
        Eigen::VectorXd out(modes());
        for (int n = 1; n <= modes(); ++n) out(n - 1) = tables_[n - 1][static_cast<int>(q)](t_node, s_node);
        return out;
    }

    /// The stored oscillator pair of mode n with base node j.
    OscillatorSolution oscillator(int n, int s_node) const {
        require_pair(grid_.intervals(), s_node);
        OscillatorSolution sol;
        sol.mode = n;
        sol.base_node = s_node;
        sol.grid = grid_;
        sol.closed_form = closed_form_;
        const int count = grid_.intervals() - s_node + 1;
        const auto& mode = tables_.at(n - 1);
        for (int q = 0; q < count; ++q) {
            sol.r.push_back(mode[0](s_node + q, s_node));
            sol.rdot.push_back(mode[1](s_node + q, s_node));
            sol.c.push_back(mode[2](s_node + q, s_node));
            sol.cdot.push_back(mode[3](s_node + q, s_node));
        }
        return sol;
    }

    void require_pair(int t_node, int s_node) const {
        if (s_node < 0 || t_node > grid_.intervals()) throw DomainError("node outside the grid");
        if (t_node < s_node) throw DomainError("(t, s) must satisfy t >= s");
    }

private:
    CoefficientFamily cf_;
    Truncation truncation_;
    TimeGrid grid_;
    OscillatorOptions options_;
    bool closed_form_ = false;
    std::vector<std::array<Eigen::MatrixXd, 4>> tables_;
};

namespace detail {

inline SpectralVector diagonal_apply(const FundamentalSolutionField& f, Multiplier q, double sign, int t, int s,
                                     const SpectralVector& x, Space out) {
    if (x.size() != f.modes()) throw DomainError("vector length does not match the truncation");
    Eigen::VectorXd y = sign * f.multipliers(q, t, s).cwiseProduct(x.coeffs());
    return SpectralVector(std::move(y), out);
}

inline void require_z(const SpectralVector& x) {
    if (!x.belongs_to(Space::Z)) throw DomainError("operation requires a Z- or D-tagged vector");
}

}  // namespace detail

/// S(t,s)x; Z-tagged.
inline SpectralVector apply_S(const FundamentalSolutionField& f, int t, int s, const SpectralVector& x) {
    return detail::diagonal_apply(f, Multiplier::sine, 1.0, t, s, x, Space::Z);
}

/// ∂t S(t,s)x; keeps the tag of x.
inline SpectralVector apply_dtS(const FundamentalSolutionField& f, int t, int s, const SpectralVector& x) {
    return detail::diagonal_apply(f, Multiplier::sine_dt, 1.0, t, s, x, x.tag());
}

/// ∂s S(t,s)x = −c_n x_n; x must be Z- or D-tagged.
inline SpectralVector apply_dsS(const FundamentalSolutionField& f, int t, int s, const SpectralVector& x) {
    detail::require_z(x);
    return detail::diagonal_apply(f, Multiplier::cosine, -1.0, t, s, x, Space::Z);
}

/// ∂t∂s S(t,s)x = −ċ_n x_n; x must be Z- or D-tagged.
inline SpectralVector apply_dtdsS(const FundamentalSolutionField& f, int t, int s, const SpectralVector& x) {
    detail::require_z(x);
    return detail::diagonal_apply(f, Multiplier::cosine_dt, -1.0, t, s, x, Space::X);
}

/// Coefficients of a trajectory on the grid; column i belongs to t_i.
struct Trajectory {
    TimeGrid grid{1.0, 1};
    Eigen::MatrixXd values;
    Eigen::MatrixXd velocities;
};

/// u(t) = −∂s S(t,0)x + S(t,0)y and u'(t) = −∂t∂s S(t,0)x + ∂t S(t,0)y.
inline Trajectory classical_solution(const FundamentalSolutionField& f, const SpectralVector& x,
                                     const SpectralVector& y) {
    if (x.size() != f.modes() || y.size() != f.modes()) throw DomainError("vector length does not match the truncation");
    Trajectory out;
    out.grid = f.grid();
    out.values.resize(f.modes(), f.grid().nodes());
    out.velocities.resize(f.modes(), f.grid().nodes());
    for (int i = 0; i < f.grid().nodes(); ++i) {
        out.values.col(i) = f.multipliers(Multiplier::cosine, i, 0).cwiseProduct(x.coeffs()) +
                            f.multipliers(Multiplier::sine, i, 0).cwiseProduct(y.coeffs());
        out.velocities.col(i) = f.multipliers(Multiplier::cosine_dt, i, 0).cwiseProduct(x.coeffs()) +
                                f.multipliers(Multiplier::sine_dt, i, 0).cwiseProduct(y.coeffs());
    }
    return out;
}

/// Read access to a second-order fundamental solution through its action on probe blocks.
/// `has_column(j)` tells whether the pairs (·, t_j) are available.
template <class V>
concept SineFieldView = requires(const V& v, int i, int j, const Eigen::MatrixXd& x) {
    { v.modes() } -> std::convertible_to<int>;
    { v.grid() } -> std::convertible_to<const TimeGrid&>;
    { v.has_column(j) } -> std::convertible_to<bool>;
    { v.sine(i, j, x) } -> std::convertible_to<Eigen::MatrixXd>;
    { v.sine_dt(i, j, x) } -> std::convertible_to<Eigen::MatrixXd>;
    { v.sine_ds(i, j, x) } -> std::convertible_to<Eigen::MatrixXd>;
    { v.sine_dtds(i, j, x) } -> std::convertible_to<Eigen::MatrixXd>;
    { v.generator(i, x) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Unperturbed field as a view; the generator is A(t) = −α(t) diag(n²).
class DiagonalSineView {
public:
    explicit DiagonalSineView(const FundamentalSolutionField& f) : f_(f), eigen_(f.modes()) {
        for (int n = 1; n <= f.modes(); ++n) eigen_(n - 1) = -static_cast<double>(n) * n;
    }
    int modes() const { return f_.modes(); }
    const TimeGrid& grid() const { return f_.grid(); }
    bool has_column(int j) const { return j >= 0 && j <= f_.grid().intervals(); }

    Eigen::MatrixXd sine(int i, int j, const Eigen::MatrixXd& x) const { return apply(Multiplier::sine, 1.0, i, j, x); }
    Eigen::MatrixXd sine_dt(int i, int j, const Eigen::MatrixXd& x) const { return apply(Multiplier::sine_dt, 1.0, i, j, x); }
    Eigen::MatrixXd sine_ds(int i, int j, const Eigen::MatrixXd& x) const { return apply(Multiplier::cosine, -1.0, i, j, x); }
    Eigen::MatrixXd sine_dtds(int i, int j, const Eigen::MatrixXd& x) const {
        return apply(Multiplier::cosine_dt, -1.0, i, j, x);
    }
    Eigen::MatrixXd generator(int i, const Eigen::MatrixXd& x) const {
        const double a = f_.coefficients().alpha.value(f_.grid().node(i));
        return (a * eigen_).asDiagonal() * x;
    }

private:
    Eigen::MatrixXd apply(Multiplier q, double sign, int i, int j, const Eigen::MatrixXd& x) const {
        return (sign * f_.multipliers(q, i, j)).asDiagonal() * x;
    }

    const FundamentalSolutionField& f_;
    Eigen::VectorXd eigen_;
};

struct SineSuiteTolerances {
    /// identities that hold by construction
    double exact = 1e-12;
    /// ∂²t S = A S via central differences of the carried ∂t S
    double second_t = 1e-4;
    /// second differences in s and the third-order identities
    double finite_difference = 1e-3;
    /// the evolutionary composition identity
    double composition = 1e-4;
};

namespace detail {

/// Max with NaN propagation, so a non-finite residual cannot be masked.
inline double worst(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
    return std::max(a, b);
}

}  // namespace detail

/// Residuals of the second-order fundamental-solution axioms over the probe panel (e_1..e_min(N,8)
/// plus 3 seeded random D-vectors) and the subsampled base nodes.
///
/// Identities that involve the generator are measured in X relative to the probe's D-norm; the
/// others relative to its X-norm. Second t-derivatives are central differences of the carried first
/// t-derivative; second s-derivatives are central second differences across the columns s±h.
/// The composition identity reads (−∂s S(t,s)) S(s,r)x + S(t,s) ∂₁S(s,r)x = S(t,r)x, where ∂₁ is the
/// derivative in the first argument, so the middle factor is ∂t S(s,r)x.
template <SineFieldView View>
InvariantReport s_axiom_residuals(const View& v, std::uint64_t seed = default_seed, const SineSuiteTolerances& tol = {}) {
    const TimeGrid& grid = v.grid();
    const int m = grid.intervals();
    const double h = grid.step();
    const Eigen::MatrixXd probes = domain_probe_panel(v.modes(), seed);
    const Eigen::VectorXd x_norm = column_norms(probes, Space::X);
    const Eigen::VectorXd d_norm = column_norms(probes, Space::D);

    std::vector<int> diag_nodes;
    for (int j = 0; j <= m; ++j)
        if (v.has_column(j)) diag_nodes.push_back(j);
    std::vector<int> bases;
    for (int j : base_nodes(grid))
        if (v.has_column(j)) bases.push_back(j);

    enum Slot { zero_diag, dt_diag, ds_diag, dtds_diag, second_t, second_s, ds_second_t, dt_second_s,
                gen_ds_modulus, composition, bound_S, bound_dtS, slot_count };
    using Row = std::array<double, slot_count>;

    std::vector<Row> diag_rows(diag_nodes.size(), Row{});
    parallel_for(diag_nodes.size(), [&](std::size_t k) {
        const int j = diag_nodes[k];
        Row& row = diag_rows[k];
        row[zero_diag] = max_relative(v.sine(j, j, probes), Space::X, x_norm);
        row[dt_diag] = max_relative(v.sine_dt(j, j, probes) - probes, Space::X, x_norm);
        row[ds_diag] = max_relative(v.sine_ds(j, j, probes) + probes, Space::X, x_norm);
        row[dtds_diag] = max_relative(v.sine_dtds(j, j, probes), Space::X, x_norm);
    });

    std::vector<Row> rows(bases.size(), Row{});
    std::vector<char> second_s_ran(bases.size(), 0);
    parallel_for(bases.size(), [&](std::size_t k) {
        const int j = bases[k];
        Row& row = rows[k];
        const bool neighbours = v.has_column(j - 1) && v.has_column(j + 1);
        second_s_ran[k] = neighbours;
        const Eigen::MatrixXd gen_x = v.generator(j, probes);
        Eigen::MatrixXd prev_gen_ds;
        for (int i = j; i <= m; ++i) {
            const Eigen::MatrixXd s_ij = v.sine(i, j, probes);
            const Eigen::MatrixXd ds_ij = v.sine_ds(i, j, probes);
            row[bound_S] = detail::worst(row[bound_S], max_relative(s_ij, Space::X, x_norm));
            row[bound_dtS] = detail::worst(row[bound_dtS], max_relative(v.sine_dt(i, j, probes), Space::X, x_norm));

            const Eigen::MatrixXd gen_ds = v.generator(i, ds_ij);
            if (i > j) {
                row[gen_ds_modulus] =
                    detail::worst(row[gen_ds_modulus], max_relative(gen_ds - prev_gen_ds, Space::X, d_norm));
            }
            prev_gen_ds = gen_ds;

            if (i > j && i < m) {
                const Eigen::MatrixXd d2t = (v.sine_dt(i + 1, j, probes) - v.sine_dt(i - 1, j, probes)) / (2.0 * h);
                row[second_t] = detail::worst(row[second_t], max_relative(d2t - v.generator(i, s_ij), Space::X, d_norm));
                const Eigen::MatrixXd d2t_ds =
                    (v.sine_dtds(i + 1, j, probes) - v.sine_dtds(i - 1, j, probes)) / (2.0 * h);
                row[ds_second_t] = detail::worst(row[ds_second_t], max_relative(d2t_ds - gen_ds, Space::X, d_norm));
            }
            if (neighbours && i > j) {
                const Eigen::MatrixXd d2s =
                    (v.sine(i, j + 1, probes) - 2.0 * s_ij + v.sine(i, j - 1, probes)) / (h * h);
                row[second_s] = detail::worst(row[second_s], max_relative(d2s - v.sine(i, j, gen_x), Space::X, d_norm));
                const Eigen::MatrixXd d2s_dt =
                    (v.sine_dt(i, j + 1, probes) - 2.0 * v.sine_dt(i, j, probes) + v.sine_dt(i, j - 1, probes)) / (h * h);
                row[dt_second_s] =
                    detail::worst(row[dt_second_s], max_relative(d2s_dt - v.sine_dt(i, j, gen_x), Space::X, d_norm));
            }
        }
        // Composition: this base node plays r; s ranges over later base nodes, t over all nodes ≥ s.
        for (std::size_t b = k; b < bases.size(); ++b) {
            const int s = bases[b];
            const Eigen::MatrixXd s_sr = v.sine(s, j, probes);
            const Eigen::MatrixXd dt_sr = v.sine_dt(s, j, probes);
            for (int t = s; t <= m; ++t) {
                const Eigen::MatrixXd lhs = -v.sine_ds(t, s, s_sr) + v.sine(t, s, dt_sr);
                row[composition] =
                    detail::worst(row[composition], max_relative(lhs - v.sine(t, j, probes), Space::X, x_norm));
            }
        }
    });

    Row total{};
    for (const Row& r : diag_rows)
        for (int q = 0; q < slot_count; ++q) total[q] = detail::worst(total[q], r[q]);
    for (const Row& r : rows)
        for (int q = 0; q < slot_count; ++q) total[q] = detail::worst(total[q], r[q]);
    const bool any_second_s = std::any_of(second_s_ran.begin(), second_s_ran.end(), [](char c) { return c != 0; });

    InvariantReport report;
    report.add("sine_zero_on_diagonal", total[zero_diag], tol.exact, "max ‖S(t,t)x‖/‖x‖ over all available t");
    report.add("sine_dt_identity_on_diagonal", total[dt_diag], tol.exact, "max ‖∂t S(t,s)x|_{t=s} − x‖/‖x‖");
    report.add("sine_ds_minus_identity_on_diagonal", total[ds_diag], tol.exact, "max ‖∂s S(t,s)x|_{t=s} + x‖/‖x‖");
    report.add("sine_dtds_zero_on_diagonal", total[dtds_diag], tol.exact, "max ‖∂t∂s S(t,s)x|_{t=s}‖/‖x‖");
    report.add("sine_second_t_derivative", total[second_t], tol.second_t,
               "∂²t S x vs A(t) S x; central difference of ∂t S; X-norm over D-norm of x");
    report.add("sine_ds_second_t_derivative", total[ds_second_t], tol.finite_difference,
               "∂²t ∂s S x vs A(t) ∂s S x; central difference of ∂t∂s S; X-norm over D-norm of x");
    if (any_second_s) {
        report.add("sine_second_s_derivative", total[second_s], tol.finite_difference,
                   "∂²s S x vs S A(s) x; second difference across s±h; X-norm over D-norm of x");
        report.add("sine_dt_second_s_derivative", total[dt_second_s], tol.finite_difference,
                   "∂²s ∂t S x vs ∂t S A(s) x; second difference across s±h; X-norm over D-norm of x");
    } else {
        report.add_structural("sine_second_s_derivative", "no base node with both neighbouring columns available");
        report.add_structural("sine_dt_second_s_derivative", "no base node with both neighbouring columns available");
    }
    report.add_measurement("sine_generator_ds_continuity_modulus", total[gen_ds_modulus],
                           "max over adjacent t of ‖A(t)∂s S(t,s)x − A(t−h)∂s S(t−h,s)x‖/‖x‖_D");
    report.add("sine_evolutionary_composition", total[composition], tol.composition,
               "(−∂s S(t,s))S(s,r)x + S(t,s)∂₁S(s,r)x − S(t,r)x over base r ≤ s and all t ≥ s; X-norm over X-norm");
    report.add_measurement("sine_uniform_bound_S", total[bound_S], "max ‖S(t,s)x‖_X/‖x‖_X over sampled pairs and probes");
    report.add_measurement("sine_uniform_bound_dtS", total[bound_dtS],
                           "max ‖∂t S(t,s)x‖_X/‖x‖_X over sampled pairs and probes");
    report.add_structural("sine_domain_invariance",
                          "at finite truncation every vector lies in D, so S(t,s)D ⊆ D and ∂s S(t,s)D ⊆ D hold trivially");
    return report;
}

/// sup over the whole grid Δ of ‖S(t,s)‖_{L(X)} = max_n |r_n(t,s)| and of ‖∂t S(t,s)‖_{L(X)}.
struct UniformBounds {
    double sine = 0.0;
    double sine_dt = 0.0;
};

inline UniformBounds uniform_bounds(const FundamentalSolutionField& f) {
    UniformBounds b;
    for (int n = 1; n <= f.modes(); ++n) {
        // Entries above the diagonal are stored as zero.
        b.sine = std::max(b.sine, f.table(Multiplier::sine, n).cwiseAbs().maxCoeff());
        b.sine_dt = std::max(b.sine_dt, f.table(Multiplier::sine_dt, n).cwiseAbs().maxCoeff());
    }
    return b;
}

}  // namespace evofam
