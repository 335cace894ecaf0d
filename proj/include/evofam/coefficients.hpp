#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "evofam/core.hpp"

namespace evofam {

/// Natural cubic spline through (x_i, y_i); C² inside, second derivative zero at both ends.
class NaturalCubicSpline {
public:
    NaturalCubicSpline() = default;

    NaturalCubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        if (x_.size() != y_.size()) throw DomainError("spline knots and values differ in length");
        if (x_.size() < 2) throw DomainError("spline needs at least two knots");
        for (std::size_t i = 1; i < x_.size(); ++i) {
            if (!(x_[i] > x_[i - 1])) throw DomainError("spline knots must be strictly increasing");
        }
        solve_moments();
    }

    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }

    double value(double t) const {
        const auto [i, a, b, h] = locate(t);
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

    double derivative(double t) const {
        const auto [i, a, b, h] = locate(t);
        return (y_[i + 1] - y_[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m_[i] +
               (3.0 * b * b - 1.0) / 6.0 * h * m_[i + 1];
    }

    /// Interior critical points (S' = 0) of the spline inside (lo, hi), knots included.
    std::vector<double> critical_points(double lo, double hi) const {
        std::vector<double> out;
        auto consider = [&](double t) {
            if (t > lo && t < hi) out.push_back(t);
        };
        for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
            consider(x_[i]);
            const double h = x_[i + 1] - x_[i];
            const double d = y_[i + 1] - y_[i];
            // S'(B) = a2 B² + a1 B + a0 with B = (t - x_i)/h.
            const double a2 = -0.5 * h * (m_[i] - m_[i + 1]);
            const double a1 = h * m_[i];
            const double a0 = d / h - h / 6.0 * (2.0 * m_[i] + m_[i + 1]);
            for (double b : quadratic_roots(a2, a1, a0)) {
                if (b > 0.0 && b < 1.0) consider(x_[i] + b * h);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Exact minimum and maximum over [lo, hi].
    std::pair<double, double> extrema(double lo, double hi) const {
        double mn = std::min(value(lo), value(hi));
        double mx = std::max(value(lo), value(hi));
        for (double t : critical_points(lo, hi)) {
            const double v = value(t);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        return {mn, mx};
    }

    friend bool operator==(const NaturalCubicSpline& l, const NaturalCubicSpline& r) {
        return l.x_ == r.x_ && l.y_ == r.y_;
    }

private:
    struct Segment {
        std::size_t i;
        double a, b, h;
    };

    Segment locate(double t) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), t);
        std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        i = std::min(i, x_.size() - 2);
        const double h = x_[i + 1] - x_[i];
        const double b = (t - x_[i]) / h;
        return {i, 1.0 - b, b, h};
    }

    static std::vector<double> quadratic_roots(double a, double b, double c) {
        const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
        if (scale == 0.0) return {};
        if (std::abs(a) <= 1e-14 * scale) {
            if (std::abs(b) <= 1e-14 * scale) return {};
            return {-c / b};
        }
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) return {};
        const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        std::vector<double> roots{q / a};
        if (q != 0.0) roots.push_back(c / q);
        return roots;
    }

    void solve_moments() {
        const std::size_t n = x_.size();
        m_.assign(n, 0.0);
        if (n < 3) return;
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            diag[i] = (h0 + h1) / 3.0;
            upper[i] = h1 / 6.0;
            rhs[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
        }
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double lower = (x_[i] - x_[i - 1]) / 6.0;
            const double w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
            if (i == 1) break;
        }
    }

    std::vector<double> x_, y_, m_;
};

/// α(t) ≡ c
struct ConstantProfile {
    double c = 1.0;
    friend bool operator==(const ConstantProfile&, const ConstantProfile&) = default;
};
/// α(t) = a + b t
struct AffineProfile {
    double a = 1.0, b = 0.0;
    friend bool operator==(const AffineProfile&, const AffineProfile&) = default;
};
/// α(t) = a + b cos(ωt)
struct CosineProfile {
    double a = 1.0, b = 0.0, omega = 0.0;
    friend bool operator==(const CosineProfile&, const CosineProfile&) = default;
};
/// α given by samples, interpolated with a natural cubic spline.
struct TableProfile {
    NaturalCubicSpline spline;
    friend bool operator==(const TableProfile&, const TableProfile&) = default;
};

/// Scalar C¹ function of time drawn from a closed parametric menu.
class ScalarProfile {
public:
    using Variant = std::variant<ConstantProfile, AffineProfile, CosineProfile, TableProfile>;

    ScalarProfile() : v_(ConstantProfile{}) {}
    ScalarProfile(Variant v) : v_(std::move(v)) {}

    static ScalarProfile constant(double c) { return ScalarProfile(ConstantProfile{c}); }
    static ScalarProfile affine(double a, double b) { return ScalarProfile(AffineProfile{a, b}); }
    static ScalarProfile cosine(double a, double b, double omega) { return ScalarProfile(CosineProfile{a, b, omega}); }
    static ScalarProfile table(std::vector<double> times, std::vector<double> values) {
        return ScalarProfile(TableProfile{NaturalCubicSpline(std::move(times), std::move(values))});
    }

    const Variant& variant() const { return v_; }

    std::string family() const {
        return std::visit(
            [](const auto& p) -> std::string {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, ConstantProfile>) return "constant";
                else if constexpr (std::is_same_v<P, AffineProfile>) return "affine";
                else if constexpr (std::is_same_v<P, CosineProfile>) return "cosine";
                else return "table";
            },
            v_);
    }

    bool is_constant() const {
        if (std::holds_alternative<ConstantProfile>(v_)) return true;
        if (auto* a = std::get_if<AffineProfile>(&v_)) return a->b == 0.0;
        if (auto* c = std::get_if<CosineProfile>(&v_)) return c->b == 0.0 || c->omega == 0.0;
        return false;
    }

    double value(double t) const {
        return std::visit(
            [t](const auto& p) -> double {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, ConstantProfile>) return p.c;
                else if constexpr (std::is_same_v<P, AffineProfile>) return p.a + p.b * t;
                else if constexpr (std::is_same_v<P, CosineProfile>) return p.a + p.b * std::cos(p.omega * t);
                else return p.spline.value(t);
            },
            v_);
    }

    double derivative(double t) const {
        return std::visit(
            [t](const auto& p) -> double {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, ConstantProfile>) return 0.0;
                else if constexpr (std::is_same_v<P, AffineProfile>) return p.b;
                else if constexpr (std::is_same_v<P, CosineProfile>) return -p.b * p.omega * std::sin(p.omega * t);
                else return p.spline.derivative(t);
            },
            v_);
    }

    /// Exact (min, max) over [0, T].
    std::pair<double, double> extrema(double horizon) const {
        return std::visit(
            [horizon](const auto& p) -> std::pair<double, double> {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, ConstantProfile>) {
                    return {p.c, p.c};
                } else if constexpr (std::is_same_v<P, AffineProfile>) {
                    const double e = p.a + p.b * horizon;
                    return {std::min(p.a, e), std::max(p.a, e)};
                } else if constexpr (std::is_same_v<P, CosineProfile>) {
                    const double w = std::abs(p.omega);
                    double lo = std::min(1.0, std::cos(w * horizon));
                    double hi = 1.0;
                    if (w * horizon >= std::numbers::pi) lo = -1.0;
                    const double v1 = p.a + p.b * lo, v2 = p.a + p.b * hi;
                    return {std::min(v1, v2), std::max(v1, v2)};
                } else {
                    return p.spline.extrema(0.0, horizon);
                }
            },
            v_);
    }

    /// Points of (0, T) between which α is monotone (stationary points of the profile; table knots).
    std::vector<double> critical_points(double horizon) const {
        std::vector<double> out;
        if (auto* c = std::get_if<CosineProfile>(&v_)) {
            const double w = std::abs(c->omega);
            if (w > 0.0 && c->b != 0.0) {
                for (int k = 1; k * std::numbers::pi / w < horizon; ++k) out.push_back(k * std::numbers::pi / w);
            }
        } else if (auto* t = std::get_if<TableProfile>(&v_)) {
            out = t->spline.critical_points(0.0, horizon);
        }
        return out;
    }

    friend bool operator==(const ScalarProfile&, const ScalarProfile&) = default;

private:
    Variant v_;
};

/// p(ξ) = Σ_k c_k ξ^k with degree ≤ 4.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {
        if (c_.size() > 5) throw DomainError("polynomial degree must be <= 4");
    }
    const std::vector<double>& coeffs() const { return c_; }
    double value(double xi) const {
        double acc = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * xi + *it;
        return acc;
    }
    bool is_zero() const {
        return std::all_of(c_.begin(), c_.end(), [](double c) { return c == 0.0; });
    }
    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    std::vector<double> c_;
};

struct ZeroBeta {
    friend bool operator==(const ZeroBeta&, const ZeroBeta&) = default;
};

/// β(t, ξ) = g(t) p(ξ)
struct SeparableBeta {
    ScalarProfile g;
    Polynomial p;
    friend bool operator==(const SeparableBeta&, const SeparableBeta&) = default;
};

/// β sampled on a (t, ξ) lattice; natural cubic splines in ξ per time row, then in t.
class TableBeta {
public:
    TableBeta() = default;
    TableBeta(std::vector<double> times, std::vector<double> xi, std::vector<std::vector<double>> values)
        : times_(std::move(times)), xi_(std::move(xi)), values_(std::move(values)) {
        if (times_.size() < 2 || xi_.size() < 2) throw DomainError("beta table needs at least 2x2 samples");
        if (values_.size() != times_.size()) throw DomainError("beta table row count must match times");
        for (const auto& row : values_) {
            if (row.size() != xi_.size()) throw DomainError("beta table row length must match xi");
            rows_.emplace_back(xi_, row);
        }
        // Validates monotone times.
        NaturalCubicSpline(times_, std::vector<double>(times_.size(), 0.0));
    }

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& xi() const { return xi_; }
    const std::vector<std::vector<double>>& values() const { return values_; }

    double value(double t, double xi) const {
        std::vector<double> column(rows_.size());
        for (std::size_t k = 0; k < rows_.size(); ++k) column[k] = rows_[k].value(xi);
        return NaturalCubicSpline(times_, std::move(column)).value(t);
    }

    friend bool operator==(const TableBeta& l, const TableBeta& r) {
        return l.times_ == r.times_ && l.xi_ == r.xi_ && l.values_ == r.values_;
    }

private:
    std::vector<double> times_, xi_;
    std::vector<std::vector<double>> values_;
    std::vector<NaturalCubicSpline> rows_;
};

/// Multiplicative potential β(t, ξ) of the bounded perturbation B(t)f = β(t,·)f.
class BetaProfile {
public:
    using Variant = std::variant<ZeroBeta, SeparableBeta, TableBeta>;

    BetaProfile() : v_(ZeroBeta{}) {}
    BetaProfile(Variant v) : v_(std::move(v)) {}

    static BetaProfile zero() { return BetaProfile(ZeroBeta{}); }
    static BetaProfile separable(ScalarProfile g, Polynomial p) { return BetaProfile(SeparableBeta{std::move(g), std::move(p)}); }

    const Variant& variant() const { return v_; }

    std::string family() const {
        if (std::holds_alternative<ZeroBeta>(v_)) return "zero";
        if (std::holds_alternative<SeparableBeta>(v_)) return "separable";
        return "table";
    }

    bool is_zero() const {
        if (std::holds_alternative<ZeroBeta>(v_)) return true;
        if (auto* s = std::get_if<SeparableBeta>(&v_)) {
            return s->p.is_zero() || (s->g.is_constant() && s->g.value(0.0) == 0.0);
        }
        return false;
    }

    double value(double t, double xi) const {
        return std::visit(
            [t, xi](const auto& b) -> double {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, ZeroBeta>) return 0.0;
                else if constexpr (std::is_same_v<B, SeparableBeta>) return b.g.value(t) * b.p.value(xi);
                else return b.value(t, xi);
            },
            v_);
    }

    friend bool operator==(const BetaProfile&, const BetaProfile&) = default;

private:
    Variant v_;
};

/// Coefficients of w_tt = α(t) w_ξξ + β(t,ξ) w on [0,T]: A(t) = α(t)A₀, B(t) = β(t,·).
///
/// Construction does not validate; `validate` certifies α ≥ 1 on [0,T]. With A(t) = α(t)A₀ the
/// domain is constant and graph norms are equivalent automatically; C¹ regularity of α comes from
/// the menu (table mode uses a natural cubic spline).
struct CoefficientFamily {
    ScalarProfile alpha;
    BetaProfile beta;
    double horizon = 1.0;

    double alpha_at(double t) const { return alpha.value(t); }
    double beta_at(double t, double xi) const { return beta.value(t, xi); }

    /// sup_{[0,T]} α
    double sup_alpha() const { return alpha.extrema(horizon).second; }
    double inf_alpha() const { return alpha.extrema(horizon).first; }

    /// Throws DomainError when α < 1 somewhere on [0,T]: sampled on the 10× refined grid and at the
    /// exact extrema of the profile.
    void validate(const TimeGrid& grid) const {
        const TimeGrid fine = grid.refined(10);
        double worst = inf_alpha();
        double where = std::numeric_limits<double>::quiet_NaN();
        for (int i = 0; i < fine.nodes(); ++i) {
            const double v = alpha.value(fine.node(i));
            if (v < worst || !std::isfinite(v)) {
                worst = v;
                where = fine.node(i);
            }
        }
        if (!(worst >= 1.0)) {
            std::ostringstream msg;
            msg << "alpha violates α ≥ 1 (min " << worst;
            if (std::isfinite(where)) msg << " at t=" << where;
            msg << ")";
            throw DomainError(msg.str());
        }
    }

    friend bool operator==(const CoefficientFamily&, const CoefficientFamily&) = default;
};

/// Constant C of the graph-norm equivalence ‖·‖_{A₀} ≤ ‖·‖_{A(t)} ≤ C‖·‖_{A₀}: C = sup_t α(t) ≥ 1.
/// Exact supremum of the profile, so refinement-invariant. Rejects families violating α ≥ 1.
inline double graph_norm_equivalence_constant(const CoefficientFamily& cf, const TimeGrid& grid) {
    cf.validate(grid);
    return std::max(1.0, cf.sup_alpha());
}

}  // namespace evofam
