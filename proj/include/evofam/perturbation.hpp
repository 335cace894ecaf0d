#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evofam/coefficients.hpp"
#include "evofam/core.hpp"
#include "evofam/fundsol.hpp"
#include "evofam/linalg.hpp"
#include "evofam/parallel.hpp"
#include "evofam/probes.hpp"
#include "evofam/reduction.hpp"
#include "evofam/report.hpp"

namespace evofam {

/// Composite Simpson panel count for projecting β onto the sine basis.
inline int quadrature_panels(int n_modes) { return std::max(1024, 32 * n_modes); }

/// Galerkin matrix of the multiplication operator f ↦ w·f in the basis z_n = √(2/π) sin(nξ):
///   M_{mn} = (2/π) ∫₀^π w(ξ) sin(nξ) sin(mξ) dξ, composite Simpson with `panels` subintervals.
inline Eigen::MatrixXd project_multiplier(const std::function<double(double)>& w, int n_modes,
                                          int panels = 0) {
    if (panels <= 0) panels = quadrature_panels(n_modes);
    if (panels % 2 != 0) ++panels;
    const double h = std::numbers::pi / panels;
    Eigen::MatrixXd sines(panels + 1, n_modes);
    Eigen::VectorXd weights(panels + 1);
    for (int k = 0; k <= panels; ++k) {
        const double xi = k == panels ? std::numbers::pi : k * h;
        const double simpson = (k == 0 || k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        weights(k) = simpson * h / 3.0 * (2.0 / std::numbers::pi) * w(xi);
        for (int n = 1; n <= n_modes; ++n) sines(k, n - 1) = std::sin(n * xi);
    }
    Eigen::MatrixXd out = sines.transpose() * weights.asDiagonal() * sines;
    return 0.5 * (out + out.transpose());
}

/// B(t) on the truncation: B_{mn}(t) = (2/π) ∫₀^π β(t,ξ) sin(nξ) sin(mξ) dξ, cached at the grid
/// nodes and evaluated exactly (same quadrature) off the grid.
///
/// Separable β = g(t)p(ξ) gives B(t) = g(t)B_p. A tabulated β is a natural cubic spline in t of
/// row splines in ξ; the t-spline is linear in its data, so B(t) = Σ_k L_k(t) B_k with cardinal
/// spline weights L_k and per-row projections B_k.
class PerturbationMatrixField {
public:
    PerturbationMatrixField(const CoefficientFamily& cf, Truncation truncation, TimeGrid grid, int panels = 0)
        : truncation_(truncation), grid_(grid) {
        const int n = truncation.modes();
        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ZeroBeta>) {
                    zero_ = true;
                } else if constexpr (std::is_same_v<B, SeparableBeta>) {
                    g_ = b.g;
                    components_.push_back(project_multiplier([&](double xi) { return b.p.value(xi); }, n, panels));
                } else {
                    table_times_ = b.times();
                    for (const auto& row : b.values()) {
                        NaturalCubicSpline spline(b.xi(), row);
                        components_.push_back(
                            project_multiplier([&](double xi) { return spline.value(xi); }, n, panels));
                    }
                }
            },
            cf.beta.variant());
        zero_ = zero_ || cf.beta.is_zero();
        nodes_.resize(grid.nodes());
        for (int i = 0; i < grid.nodes(); ++i) nodes_[i] = at(grid.node(i));
    }

    int modes() const { return truncation_.modes(); }
    const TimeGrid& grid() const { return grid_; }
    bool is_zero() const { return zero_; }

    const Eigen::MatrixXd& at_node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }

    Eigen::MatrixXd at(double t) const {
        const int n = modes();
        if (zero_) return Eigen::MatrixXd::Zero(n, n);
        if (g_) return scale_ * g_->value(t) * components_.front();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t k = 0; k < components_.size(); ++k) {
            std::vector<double> unit(table_times_.size(), 0.0);
            unit[k] = 1.0;
            out += NaturalCubicSpline(table_times_, std::move(unit)).value(t) * components_[k];
        }
        return scale_ * out;
    }

    /// The field of ε·B.
    PerturbationMatrixField scaled(double factor) const {
        PerturbationMatrixField out = *this;
        out.scale_ *= factor;
        for (auto& m : out.nodes_) m *= factor;
        out.zero_ = zero_ || factor == 0.0;
        return out;
    }

    /// max_{m,n,i} |B_mn(t_i) − B_nm(t_i)|
    double symmetry_defect() const {
        double worst = 0.0;
        for (const auto& b : nodes_) worst = std::max(worst, (b - b.transpose()).cwiseAbs().maxCoeff());
        return worst;
    }

    /// max over adjacent nodes of ‖B(t_{i+1}) − B(t_i)‖ in L(X) (space X) or L(Z) (space Z).
    double continuity_modulus(Space space) const {
        Eigen::VectorXd w(modes());
        for (int n = 1; n <= modes(); ++n) w(n - 1) = std::sqrt(norm_weight(space, n));
        double worst = 0.0;
        for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
            const Eigen::MatrixXd d = w.asDiagonal() * (nodes_[i + 1] - nodes_[i]) * w.cwiseInverse().asDiagonal();
            worst = std::max(worst, spectral_norm_svd(d));
        }
        return worst;
    }

private:
    Truncation truncation_;
    TimeGrid grid_;
    bool zero_ = false;
    double scale_ = 1.0;
    std::optional<ScalarProfile> g_;
    std::vector<double> table_times_;
    std::vector<Eigen::MatrixXd> components_;
    std::vector<Eigen::MatrixXd> nodes_;
};

/// Picard iteration did not reach its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_increment)
        : Error(what), last_increment_(last_increment) {}
    double last_increment() const { return last_increment_; }

private:
    double last_increment_;
};

struct VolterraOptions {
    double tolerance = 1e-10;
    int max_iterations = 200;
    bool keep_first_correction = false;
};

/// V(t_i, t_s) for i = s..M; entry k belongs to node s + k.
struct VolterraColumn {
    int base_node = 0;
    std::vector<Eigen::MatrixXd> samples;
    /// Picard sweeps performed; 0 when B ≡ 0.
    int iterations = 0;
    /// max_i ‖V^{k+1}(t_i,s) − V^k(t_i,s)‖ (weighted Frobenius) per sweep.
    std::vector<double> increments;
    /// V¹ − V⁰ = ∫ U 𝓑 U, the first-order term in B.
    std::optional<std::vector<Eigen::MatrixXd>> first_correction;

    const Eigen::MatrixXd& at(int t_node) const {
        if (t_node < base_node || t_node - base_node >= static_cast<int>(samples.size())) {
            throw DomainError("node outside the computed column");
        }
        return samples[static_cast<std::size_t>(t_node - base_node)];
    }

    /// Successive increment ratios; all < 1 for a contracting iteration.
    std::vector<double> contraction_ratios() const {
        std::vector<double> out;
        for (std::size_t k = 1; k < increments.size(); ++k) {
            out.push_back(increments[k - 1] > 0.0 ? increments[k] / increments[k - 1] : 0.0);
        }
        return out;
    }
};

/// Column V(·, t_s) of the first-form variation-of-constants equation
///   V(t,s) = U(t,s) + ∫_s^t U(t,r)𝓑(r)V(r,s) dr,   𝓑 = [[0, 0], [B, 0]],
/// by Picard iteration from V⁰ = U with composite trapezoidal product integration.
///
/// Since 𝓑V = [0; B·V_top], the integrand only needs the right block column of U(t_i, t_j), which
/// per mode m is (r_m(t_i,t_j), ṙ_m(t_i,t_j)). With Y_j = B(t_j)V_top(t_j,s) the sweep is one lower
/// triangular product per mode and block row.
inline VolterraColumn solve_volterra(const FundamentalSolutionField& u, const PerturbationMatrixField& b, int s_node,
                                     const VolterraOptions& opt = {}) {
    const TimeGrid& grid = u.grid();
    const int m = grid.intervals();
    if (s_node < 0 || s_node > m) throw DomainError("base node outside the grid");
    if (!(grid == b.grid()) || u.modes() != b.modes()) throw DomainError("field and perturbation grids differ");
    const int n = u.modes();
    const int len = m - s_node + 1;
    const double h = grid.step();

    VolterraColumn col;
    col.base_node = s_node;
    col.samples.reserve(len);
    for (int i = s_node; i <= m; ++i) col.samples.push_back(build_U_from_S(u, i, s_node).matrix());
    if (b.is_zero()) {
        if (opt.keep_first_correction) {
            col.first_correction = std::vector<Eigen::MatrixXd>(len, Eigen::MatrixXd::Zero(2 * n, 2 * n));
        }
        return col;
    }
    const std::vector<Eigen::MatrixXd> base = col.samples;

    Eigen::MatrixXd weighted(len, 2 * n);
    Eigen::MatrixXd top(len, 2 * n), bottom(len, 2 * n);
    std::vector<Eigen::MatrixXd> y(len);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        for (int k = 0; k < len; ++k) y[k] = b.at_node(s_node + k) * col.samples[k].topRows(n);
        std::vector<Eigen::MatrixXd> next = base;
        for (int mode = 0; mode < n; ++mode) {
            for (int k = 0; k < len; ++k) weighted.row(k) = (k == 0 ? 0.5 * h : h) * y[k].row(mode);
            const auto& r = u.table(Multiplier::sine, mode + 1);
            const auto& rd = u.table(Multiplier::sine_dt, mode + 1);
            top.noalias() = r.bottomRightCorner(len, len).triangularView<Eigen::Lower>() * weighted;
            bottom.noalias() = rd.bottomRightCorner(len, len).triangularView<Eigen::Lower>() * weighted;
            for (int k = 0; k < len; ++k) {
                // The endpoint r = t carries weight h/2 and ṙ(t,t) = 1; r(t,t) = 0 needs no correction.
                next[k].row(mode) += top.row(k);
                next[k].row(n + mode) += bottom.row(k) - 0.5 * h * y[k].row(mode);
            }
        }
        double increment = 0.0;
        for (int k = 0; k < len; ++k) increment = detail::worst(increment, z_frobenius_norm(next[k] - col.samples[k]));
        if (it == 1 && opt.keep_first_correction) {
            std::vector<Eigen::MatrixXd> first(len);
            for (int k = 0; k < len; ++k) first[k] = next[k] - base[k];
            col.first_correction = std::move(first);
        }
        col.samples = std::move(next);
        col.increments.push_back(increment);
        col.iterations = it;
        if (!std::isfinite(increment)) break;
        if (increment <= opt.tolerance) return col;
    }
    const double last = col.increments.empty() ? 0.0 : col.increments.back();
    throw ConvergenceError("Picard iteration for base node " + std::to_string(s_node) + " did not converge in " +
                               std::to_string(opt.max_iterations) + " iterations (last increment " +
                               std::to_string(last) + ")",
                           last);
}

/// Default cap on materialized propagator entries.
inline constexpr std::size_t default_memory_budget = 10'000'000;

/// Entries needed to hold V at every node pair of Δ.
inline std::size_t full_delta_entries(int n_modes, int intervals) {
    const std::size_t nodes = static_cast<std::size_t>(intervals) + 1;
    return nodes * (nodes + 1) / 2 * 4 * static_cast<std::size_t>(n_modes) * n_modes;
}

/// Perturbed propagator columns V(·, t_j) for a chosen set of base nodes.
class PerturbedPropagatorField {
public:
    PerturbedPropagatorField(const FundamentalSolutionField& u, const PerturbationMatrixField& b,
                             const std::vector<int>& columns, const VolterraOptions& opt = {})
        : cf_(u.coefficients()), b_(&b), grid_(u.grid()), modes_(u.modes()) {
        std::set<int> unique(columns.begin(), columns.end());
        std::vector<int> list(unique.begin(), unique.end());
        std::vector<std::optional<VolterraColumn>> solved(list.size());
        parallel_for(list.size(), [&](std::size_t k) { solved[k] = solve_volterra(u, b, list[k], opt); });
        for (std::size_t k = 0; k < list.size(); ++k) columns_.emplace(list[k], std::move(*solved[k]));
    }

    /// Every column s = 0..M.
    static PerturbedPropagatorField full(const FundamentalSolutionField& u, const PerturbationMatrixField& b,
                                         const VolterraOptions& opt = {}) {
        std::vector<int> all(u.grid().nodes());
        for (int j = 0; j < u.grid().nodes(); ++j) all[j] = j;
        return PerturbedPropagatorField(u, b, all, opt);
    }

    int modes() const { return modes_; }
    const TimeGrid& grid() const { return grid_; }
    const CoefficientFamily& coefficients() const { return cf_; }
    const PerturbationMatrixField& perturbation() const { return *b_; }

    bool has_column(int j) const { return columns_.count(j) != 0; }
    const VolterraColumn& column(int j) const {
        auto it = columns_.find(j);
        if (it == columns_.end()) throw DomainError("column " + std::to_string(j) + " was not computed");
        return it->second;
    }
    const Eigen::MatrixXd& sample(int i, int j) const { return column(j).at(i); }
    const std::map<int, VolterraColumn>& columns() const { return columns_; }

    int max_iterations() const {
        int worst = 0;
        for (const auto& [j, c] : columns_) worst = std::max(worst, c.iterations);
        return worst;
    }

private:
    CoefficientFamily cf_;
    const PerturbationMatrixField* b_;
    TimeGrid grid_;
    int modes_;
    std::map<int, VolterraColumn> columns_;
};

/// V as a first-order propagator view with generator 𝒜(t) + 𝓑(t).
class PerturbedPropagatorView {
public:
    explicit PerturbedPropagatorView(const PerturbedPropagatorField& v) : v_(v) {}
    int modes() const { return v_.modes(); }
    const TimeGrid& grid() const { return v_.grid(); }
    bool has_column(int j) const { return v_.has_column(j); }
    Eigen::MatrixXd sample(int i, int j) const { return v_.sample(i, j); }
    Eigen::MatrixXd generator(int i) const {
        return first_order_generator(v_.coefficients().alpha.value(grid().node(i)), modes(),
                                     v_.perturbation().at_node(i));
    }

private:
    const PerturbedPropagatorField& v_;
};

/// S_V = π₁V(0, ·) as a second-order view: S = V_tr, ∂t S = V_br, ∂s S = −V_tl, ∂t∂s S = −V_bl;
/// generator A(t) + B(t).
class PerturbedSineView {
public:
    explicit PerturbedSineView(const PerturbedPropagatorField& v) : v_(v) {}
    int modes() const { return v_.modes(); }
    const TimeGrid& grid() const { return v_.grid(); }
    bool has_column(int j) const { return v_.has_column(j); }
    Eigen::MatrixXd sine(int i, int j, const Eigen::MatrixXd& x) const {
        return block(i, j, 0, 1) * x;
    }
    Eigen::MatrixXd sine_dt(int i, int j, const Eigen::MatrixXd& x) const { return block(i, j, 1, 1) * x; }
    Eigen::MatrixXd sine_ds(int i, int j, const Eigen::MatrixXd& x) const { return -block(i, j, 0, 0) * x; }
    Eigen::MatrixXd sine_dtds(int i, int j, const Eigen::MatrixXd& x) const { return -block(i, j, 1, 0) * x; }
    Eigen::MatrixXd generator(int i, const Eigen::MatrixXd& x) const {
        return second_order_generator(v_.coefficients().alpha.value(grid().node(i)), modes(),
                                      v_.perturbation().at_node(i)) *
               x;
    }

private:
    Eigen::MatrixXd block(int i, int j, int row, int col) const {
        const int n = modes();
        return v_.sample(i, j).block(row * n, col * n, n, n);
    }
    const PerturbedPropagatorField& v_;
};

struct DirectOracleOptions {
    /// Upper bound on N·√(sup α)·h for one RK4 substep.
    double max_phase_step = 0.025;
};

/// Independent propagation of d/dt V(t,s) = (𝒜(t) + 𝓑(t))V(t,s), V(s,s) = Id, by classical RK4 on
/// the 2N×2N system with substep min(T/M, θ/(N√sup α)); values at nodes s..M.
inline std::vector<Eigen::MatrixXd> direct_oracle(const CoefficientFamily& cf, const PerturbationMatrixField& b,
                                                  int s_node, const TimeGrid& grid,
                                                  const DirectOracleOptions& opt = {}) {
    if (s_node < 0 || s_node > grid.intervals()) throw DomainError("base node outside the grid");
    const int n = b.modes();
    const double freq = n * std::sqrt(std::max(cf.sup_alpha(), 1e-12));
    const double target = std::min(grid.step(), opt.max_phase_step / freq);
    const int sub = std::max(1, static_cast<int>(std::ceil(grid.step() / target - 1e-9)));
    const double h = grid.step() / sub;

    Eigen::VectorXd n2(n);
    for (int k = 1; k <= n; ++k) n2(k - 1) = static_cast<double>(k) * k;
    auto rhs = [&](double t, const Eigen::MatrixXd& v, const Eigen::MatrixXd& bt) {
        Eigen::MatrixXd out(2 * n, 2 * n);
        out.topRows(n) = v.bottomRows(n);
        out.bottomRows(n) = (-cf.alpha.value(t) * n2).asDiagonal() * v.topRows(n) + bt * v.topRows(n);
        return out;
    };

    std::vector<Eigen::MatrixXd> out;
    out.reserve(grid.intervals() - s_node + 1);
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    out.push_back(v);
    for (int i = s_node; i < grid.intervals(); ++i) {
        const double t0 = grid.node(i);
        for (int q = 0; q < sub; ++q) {
            const double t = t0 + q * h;
            const Eigen::MatrixXd b0 = b.at(t), bm = b.at(t + 0.5 * h), b1 = b.at(t + h);
            const Eigen::MatrixXd k1 = rhs(t, v, b0);
            const Eigen::MatrixXd k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1, bm);
            const Eigen::MatrixXd k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2, bm);
            const Eigen::MatrixXd k4 = rhs(t + h, v + h * k3, b1);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push_back(v);
    }
    return out;
}

/// max over the column of the 𝒵-operator-norm gap between two samplings of V(·, t_s).
inline double column_gap(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
    if (a.size() != b.size()) throw DomainError("columns have different lengths");
    std::vector<double> gaps(a.size());
    parallel_for(a.size(), [&](std::size_t k) { gaps[k] = z_operator_norm(a[k] - b[k]); });
    double worst = 0.0;
    for (double g : gaps) worst = detail::worst(worst, g);
    return worst;
}

namespace detail {

/// Shared accumulation of the second-form Duhamel residual. `columns(j_begin, j_end)` must return the
/// V columns for base nodes [j_begin, j_end).
template <class ColumnBatch>
double duhamel_residual(const FundamentalSolutionField& u, const PerturbationMatrixField& b, int s_node,
                        const VolterraColumn& v_s, ColumnBatch&& columns, int batch) {
    const TimeGrid& grid = u.grid();
    const int m = grid.intervals();
    const int n = u.modes();
    const double h = grid.step();
    const int len = m - s_node + 1;

    std::vector<Eigen::MatrixXd> z(len);
    for (int k = 0; k < len; ++k) z[k] = b.at_node(s_node + k) * build_U_from_S(u, s_node + k, s_node).matrix().topRows(n);

    std::vector<Eigen::MatrixXd> acc(len, Eigen::MatrixXd::Zero(2 * n, 2 * n));
    for (int j0 = s_node; j0 <= m; j0 += batch) {
        const int j1 = std::min(m + 1, j0 + batch);
        const std::vector<const VolterraColumn*> cols = columns(j0, j1);
        for (int j = j0; j < j1; ++j) {
            const VolterraColumn& c = *cols[static_cast<std::size_t>(j - j0)];
            for (int i = std::max(j, s_node + 1); i <= m; ++i) {
                const double w = (j == s_node || j == i) ? 0.5 * h : h;
                acc[i - s_node].noalias() += w * c.at(i).rightCols(n) * z[j - s_node];
            }
        }
    }
    std::vector<double> res(len, 0.0);
    parallel_for(static_cast<std::size_t>(len), [&](std::size_t k) {
        const int i = s_node + static_cast<int>(k);
        res[k] = z_operator_norm(v_s.at(i) - build_U_from_S(u, i, s_node).matrix() - acc[k]);
    });
    double result = 0.0;
    for (double r : res) result = worst(result, r);
    return result;
}

}  // namespace detail

/// max_t ‖V(t,s) − U(t,s) − Σ_j w_j V(t,t_j)𝓑(t_j)U(t_j,s)‖ in the 𝒵-operator norm (trapezoidal
/// weights); `v` must hold every column s..M.
inline double duhamel_second_form_residual(const FundamentalSolutionField& u, const PerturbationMatrixField& b,
                                           const PerturbedPropagatorField& v, int s_node) {
    for (int j = s_node; j <= u.grid().intervals(); ++j) {
        if (!v.has_column(j)) {
            throw DomainError("second-form residual needs column " + std::to_string(j) + " of V");
        }
    }
    auto provider = [&](int j0, int j1) {
        std::vector<const VolterraColumn*> out;
        for (int j = j0; j < j1; ++j) out.push_back(&v.column(j));
        return out;
    };
    return detail::duhamel_residual(u, b, s_node, v.column(s_node), provider, u.grid().nodes());
}

/// Same residual without materializing Δ: columns are solved in parallel batches, folded into the
/// running sums in node order and released.
inline double duhamel_second_form_residual_streaming(const FundamentalSolutionField& u,
                                                     const PerturbationMatrixField& b, int s_node,
                                                     const VolterraOptions& opt = {}) {
    const VolterraColumn v_s = solve_volterra(u, b, s_node, opt);
    std::vector<VolterraColumn> held;
    auto provider = [&](int j0, int j1) {
        std::vector<std::optional<VolterraColumn>> solved(static_cast<std::size_t>(j1 - j0));
        parallel_for(solved.size(), [&](std::size_t k) { solved[k] = solve_volterra(u, b, j0 + static_cast<int>(k), opt); });
        held.clear();
        for (auto& c : solved) held.push_back(std::move(*c));
        std::vector<const VolterraColumn*> out;
        for (const auto& c : held) out.push_back(&c);
        return out;
    };
    const int batch = static_cast<int>(std::max(4u, 2 * thread_count()));
    return detail::duhamel_residual(u, b, s_node, v_s, provider, batch);
}

/// Base nodes whose columns the perturbed axiom suite reads: 0, T, the subsampled base nodes and
/// their neighbours.
inline std::vector<int> perturbed_suite_columns(const TimeGrid& grid) {
    std::set<int> cols{0, grid.intervals()};
    for (int j : base_nodes(grid)) {
        cols.insert(j);
        if (j > 0) cols.insert(j - 1);
        if (j < grid.intervals()) cols.insert(j + 1);
    }
    return {cols.begin(), cols.end()};
}

struct PerturbedSuiteTolerances {
    double exact = 1e-12;
    double residual = 1e-3;
};

/// First-order axioms of V against 𝒜 + 𝓑 and second-order axioms of S_V = π₁V(0,·) against A + B.
inline InvariantReport perturbed_axiom_suite(const PerturbedPropagatorField& v, std::uint64_t seed = default_seed,
                                             const PerturbedSuiteTolerances& tol = {}) {
    InvariantReport report;
    const InvariantReport first = u_axiom_residuals(PerturbedPropagatorView(v), seed,
                                                    PropagatorSuiteTolerances{tol.exact, tol.residual, tol.residual});
    const InvariantReport second = s_axiom_residuals(
        PerturbedSineView(v), seed, SineSuiteTolerances{tol.exact, tol.residual, tol.residual, tol.residual});
    report.merge(first, "perturbed_");
    report.merge(second, "perturbed_");
    return report;
}

}  // namespace evofam
