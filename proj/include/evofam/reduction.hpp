#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "evofam/core.hpp"
#include "evofam/fundsol.hpp"
#include "evofam/linalg.hpp"
#include "evofam/parallel.hpp"
#include "evofam/probes.hpp"
#include "evofam/report.hpp"

namespace evofam {

/// A 2N×2N block operator on 𝒵 = Z × X at one node pair (t_i, t_j):
///   [ top-left  (Z←Z)   top-right    (Z←X) ]
///   [ bottom-left (X←Z) bottom-right (X←X) ]
class PropagatorSample {
public:
    PropagatorSample(int t_node, int s_node, Eigen::MatrixXd matrix)
        : t_(t_node), s_(s_node), m_(std::move(matrix)) {
        if (m_.rows() != m_.cols() || m_.rows() % 2 != 0 || m_.rows() == 0) {
            throw DomainError("propagator sample must be a non-empty 2N×2N matrix");
        }
        if (t_node < s_node) throw DomainError("(t, s) must satisfy t >= s");
    }

    static PropagatorSample identity(int node, int n_modes) {
        return PropagatorSample(node, node, Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes));
    }

    int t_node() const { return t_; }
    int s_node() const { return s_; }
    int modes() const { return static_cast<int>(m_.rows() / 2); }
    const Eigen::MatrixXd& matrix() const { return m_; }

    auto top_left() const { return m_.topLeftCorner(modes(), modes()); }
    auto top_right() const { return m_.topRightCorner(modes(), modes()); }
    auto bottom_left() const { return m_.bottomLeftCorner(modes(), modes()); }
    auto bottom_right() const { return m_.bottomRightCorner(modes(), modes()); }

    /// First block row, π₁.
    auto first_row() const { return m_.topRows(modes()); }
    /// Second block row, π₂.
    auto second_row() const { return m_.bottomRows(modes()); }

    ProductVector apply(const ProductVector& p) const {
        const Eigen::VectorXd out = m_ * p.stacked();
        return {SpectralVector(out.head(modes()), Space::Z), SpectralVector(out.tail(modes()), Space::X)};
    }

    /// Operator norm 𝒵 → 𝒵.
    double norm() const { return z_operator_norm(m_); }

private:
    int t_;
    int s_;
    Eigen::MatrixXd m_;
};

/// U(t,s) = [ −∂s S, S ; −∂t∂s S, ∂t S ], i.e. per mode [[c_n, r_n], [ċ_n, ṙ_n]].
inline PropagatorSample build_U_from_S(const FundamentalSolutionField& f, int t_node, int s_node) {
    const int n = f.modes();
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    u.topLeftCorner(n, n).diagonal() = f.multipliers(Multiplier::cosine, t_node, s_node);
    u.topRightCorner(n, n).diagonal() = f.multipliers(Multiplier::sine, t_node, s_node);
    u.bottomLeftCorner(n, n).diagonal() = f.multipliers(Multiplier::cosine_dt, t_node, s_node);
    u.bottomRightCorner(n, n).diagonal() = f.multipliers(Multiplier::sine_dt, t_node, s_node);
    return PropagatorSample(t_node, s_node, std::move(u));
}

/// S(t,s)x = π₁ U(t,s)(0, x): the top-right block.
inline Eigen::MatrixXd extract_S_from_U(const PropagatorSample& u) { return u.top_right(); }

/// A(t) + B(t) on X: −α(t) diag(n²) + B(t). `perturbation` may be empty (B = 0).
inline Eigen::MatrixXd second_order_generator(double alpha, int n_modes, const Eigen::MatrixXd& perturbation = {}) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n_modes, n_modes);
    for (int n = 1; n <= n_modes; ++n) g(n - 1, n - 1) = -alpha * n * n;
    if (perturbation.size() != 0) g += perturbation;
    return g;
}

/// 𝒜(t) + 𝓑(t) = [ 0, Id ; A(t) + B(t), 0 ] on 𝒵.
inline Eigen::MatrixXd first_order_generator(double alpha, int n_modes, const Eigen::MatrixXd& perturbation = {}) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
    g.topRightCorner(n_modes, n_modes).setIdentity();
    g.bottomLeftCorner(n_modes, n_modes) = second_order_generator(alpha, n_modes, perturbation);
    return g;
}

/// max over Δ and modes of |det[[c, r], [ċ, ṙ]] − 1|.
inline double symplectic_defect(const FundamentalSolutionField& f) {
    double worst = 0.0;
    for (int n = 1; n <= f.modes(); ++n) {
        const auto& c = f.table(Multiplier::cosine, n);
        const auto& r = f.table(Multiplier::sine, n);
        const auto& cd = f.table(Multiplier::cosine_dt, n);
        const auto& rd = f.table(Multiplier::sine_dt, n);
        for (int j = 0; j < f.grid().nodes(); ++j)
            for (int i = j; i < f.grid().nodes(); ++i)
                worst = detail::worst(worst, std::abs(c(i, j) * rd(i, j) - r(i, j) * cd(i, j) - 1.0));
    }
    return worst;
}

/// Read access to a first-order propagator over the grid Δ.
template <class V>
concept PropagatorFieldView = requires(const V& v, int i, int j) {
    { v.modes() } -> std::convertible_to<int>;
    { v.grid() } -> std::convertible_to<const TimeGrid&>;
    { v.has_column(j) } -> std::convertible_to<bool>;
    { v.sample(i, j) } -> std::convertible_to<Eigen::MatrixXd>;
    { v.generator(i) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// U built from the unperturbed field; generator 𝒜(t).
class UnperturbedPropagatorView {
public:
    explicit UnperturbedPropagatorView(const FundamentalSolutionField& f) : f_(f) {}
    int modes() const { return f_.modes(); }
    const TimeGrid& grid() const { return f_.grid(); }
    bool has_column(int j) const { return j >= 0 && j <= f_.grid().intervals(); }
    Eigen::MatrixXd sample(int i, int j) const { return build_U_from_S(f_, i, j).matrix(); }
    Eigen::MatrixXd generator(int i) const {
        return first_order_generator(f_.coefficients().alpha.value(f_.grid().node(i)), f_.modes());
    }

private:
    const FundamentalSolutionField& f_;
};

struct PropagatorSuiteTolerances {
    double exact = 1e-12;
    double composition = 1e-4;
    double finite_difference = 1e-3;
};

/// Residuals of the first-order evolution-family axioms.
///
/// Composition is the 𝒵-operator norm of U(t,s)U(s,r) − U(t,r) over at most 200 seeded triples from
/// the base nodes together with 0 and T. The continuity modulus is recorded without a threshold.
/// Derivative identities use central differences of step T/M applied to 𝒟 = D × Z probes, measured
/// in 𝒵 relative to the probe's 𝒟-norm.
template <PropagatorFieldView View>
InvariantReport u_axiom_residuals(const View& v, std::uint64_t seed = default_seed,
                                  const PropagatorSuiteTolerances& tol = {}) {
    const TimeGrid& grid = v.grid();
    const int m = grid.intervals();
    const int n = v.modes();
    const double h = grid.step();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    const Eigen::MatrixXd probes = product_probe_panel(n, seed);
    const Eigen::VectorXd z_norm = product_column_norms(probes, false);
    const Eigen::VectorXd d_norm = product_column_norms(probes, true);

    std::vector<int> diag_nodes;
    for (int j = 0; j <= m; ++j)
        if (v.has_column(j)) diag_nodes.push_back(j);
    std::vector<double> diag_defect(diag_nodes.size(), 0.0);
    parallel_for(diag_nodes.size(), [&](std::size_t k) {
        const int j = diag_nodes[k];
        diag_defect[k] = z_operator_norm(v.sample(j, j) - identity);
    });

    std::vector<int> triple_nodes{0, m};
    for (int j : base_nodes(grid)) triple_nodes.push_back(j);
    std::vector<NodeTriple> triples;
    for (const NodeTriple& tr : composition_triples(triple_nodes, seed)) {
        if (v.has_column(tr.s) && v.has_column(tr.r)) triples.push_back(tr);
    }
    std::vector<double> comp(triples.size(), 0.0);
    parallel_for(triples.size(), [&](std::size_t k) {
        const NodeTriple& tr = triples[k];
        comp[k] = z_operator_norm(v.sample(tr.t, tr.s) * v.sample(tr.s, tr.r) - v.sample(tr.t, tr.r));
    });

    std::vector<int> bases;
    for (int j : base_nodes(grid))
        if (v.has_column(j)) bases.push_back(j);
    struct Row {
        double modulus = 0.0, dt = 0.0, ds = 0.0;
        bool ds_ran = false;
    };
    std::vector<Row> rows(bases.size());
    parallel_for(bases.size(), [&](std::size_t k) {
        const int j = bases[k];
        Row& row = rows[k];
        const bool neighbours = v.has_column(j - 1) && v.has_column(j + 1);
        row.ds_ran = neighbours;
        const Eigen::MatrixXd gen_s = v.generator(j) * probes;
        Eigen::MatrixXd before;
        Eigen::MatrixXd here = v.sample(j, j) * probes;
        for (int i = j; i <= m; ++i) {
            Eigen::MatrixXd after;
            if (i < m) after = v.sample(i + 1, j) * probes;
            if (i > j) row.modulus = detail::worst(row.modulus, max_relative_product(here - before, z_norm));
            if (i > j && i < m) {
                const Eigen::MatrixXd d_t = (after - before) / (2.0 * h) - v.generator(i) * here;
                row.dt = detail::worst(row.dt, max_relative_product(d_t, d_norm));
            }
            before = std::move(here);
            here = std::move(after);
            if (neighbours && i > j) {
                const Eigen::MatrixXd d_s =
                    (v.sample(i, j + 1) - v.sample(i, j - 1)) * probes / (2.0 * h) + v.sample(i, j) * gen_s;
                row.ds = detail::worst(row.ds, max_relative_product(d_s, d_norm));
            }
        }
    });

    double diag_max = 0.0, comp_max = 0.0, modulus = 0.0, dt_max = 0.0, ds_max = 0.0;
    bool ds_ran = false;
    for (double d : diag_defect) diag_max = detail::worst(diag_max, d);
    for (double c : comp) comp_max = detail::worst(comp_max, c);
    for (const Row& r : rows) {
        modulus = detail::worst(modulus, r.modulus);
        dt_max = detail::worst(dt_max, r.dt);
        ds_max = detail::worst(ds_max, r.ds);
        ds_ran = ds_ran || r.ds_ran;
    }

    InvariantReport report;
    report.add("propagator_identity_on_diagonal", diag_max, tol.exact, "max ‖U(t,t) − Id‖ in the 𝒵-operator norm");
    report.add("propagator_composition", comp_max, tol.composition,
               "max ‖U(t,s)U(s,r) − U(t,r)‖ in the 𝒵-operator norm over " + std::to_string(triples.size()) +
                   " seeded triples");
    report.add_measurement("propagator_continuity_modulus", modulus,
                           "max over adjacent t of ‖(U(t+h,s) − U(t,s))p‖_𝒵/‖p‖_𝒵; no quantitative modulus is claimed");
    report.add_structural("propagator_domain_invariance",
                          "at finite truncation every vector lies in 𝒟, so U(t,s)𝒟 ⊆ 𝒟 cannot fail");
    report.add("propagator_t_derivative", dt_max, tol.finite_difference,
               "central difference in t vs 𝒜(t)U(t,s)p; 𝒵-norm over 𝒟-norm of p");
    if (ds_ran) {
        report.add("propagator_s_derivative", ds_max, tol.finite_difference,
                   "central difference in s vs −U(t,s)𝒜(s)p; 𝒵-norm over 𝒟-norm of p");
    } else {
        report.add_structural("propagator_s_derivative", "no base node with both neighbouring columns available");
    }
    return report;
}

}  // namespace evofam
