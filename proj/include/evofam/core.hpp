#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace evofam {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A call violated a documented precondition (t < s, wrong space tag, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Index of a sine eigenfunction z_n(ξ) = √(2/π) sin(nξ); eigenvalue −n² of the Dirichlet Laplacian.
class ModeIndex {
public:
    explicit ModeIndex(int n) : n_(n) {
        if (n < 1) {
            throw DomainError("mode index must be >= 1, got " + std::to_string(n));
        }
    }
    int value() const { return n_; }
    friend bool operator==(ModeIndex, ModeIndex) = default;

private:
    int n_;
};

/// Highest retained mode of the Galerkin truncation.
class Truncation {
public:
    explicit Truncation(int n_max) : n_(n_max) {
        if (n_max < 1) {
            throw DomainError("truncation N must be >= 1, got " + std::to_string(n_max));
        }
    }
    int modes() const { return n_; }
    friend bool operator==(Truncation, Truncation) = default;

private:
    int n_;
};

/// Uniform grid t_i = i·T/M, i = 0..M, on [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, int intervals) : horizon_(horizon), intervals_(intervals) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw DomainError("time horizon T must be positive");
        }
        if (intervals < 1) {
            throw DomainError("grid interval count M must be >= 1");
        }
    }

    double horizon() const { return horizon_; }
    int intervals() const { return intervals_; }
    int nodes() const { return intervals_ + 1; }
    double step() const { return horizon_ / intervals_; }

    /// Node time; the last node is exactly T.
    double node(int i) const {
        if (i == intervals_) return horizon_;
        return static_cast<double>(i) * horizon_ / intervals_;
    }

    /// Time elapsed between nodes j ≤ i, computed from the index difference so that it is
    /// translation invariant bitwise.
    double elapsed(int i, int j) const { return static_cast<double>(i - j) * horizon_ / intervals_; }

    /// Locates a node matching t within a relative tolerance of the step.
    std::optional<int> index_of(double t, double rel_tol = 1e-9) const {
        const double x = t / step();
        const double k = std::round(x);
        if (k < 0 || k > intervals_ || std::abs(x - k) > rel_tol) return std::nullopt;
        return static_cast<int>(k);
    }

    TimeGrid refined(int factor) const { return TimeGrid(horizon_, intervals_ * factor); }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double horizon_;
    int intervals_;
};

/// Spaces of the scale D ⊂ Z ⊂ X (X = L², Z = H¹₀, D = H² ∩ H¹₀) realized in the sine basis.
enum class Space { X, Z, D };

inline const char* to_string(Space s) {
    switch (s) {
        case Space::X: return "X";
        case Space::Z: return "Z";
        case Space::D: return "D";
    }
    return "?";
}

/// Squared norm weight of mode n: 1, 1+n², 1+n⁴.
inline double norm_weight(Space space, int n) {
    const double nn = static_cast<double>(n) * n;
    switch (space) {
        case Space::X: return 1.0;
        case Space::Z: return 1.0 + nn;
        case Space::D: return 1.0 + nn * nn;
    }
    return 1.0;
}

/// Coefficients (a_1..a_N) in the sine basis together with the space the vector is meant to live in.
/// The tag records intent only; every vector is an element of X.
class SpectralVector {
public:
    SpectralVector(Eigen::VectorXd coeffs, Space tag) : coeffs_(std::move(coeffs)), tag_(tag) {
        if (coeffs_.size() < 1) throw DomainError("spectral vector needs at least one coefficient");
    }

    static SpectralVector zero(int n_modes, Space tag) {
        return SpectralVector(Eigen::VectorXd::Zero(n_modes), tag);
    }

    /// e_n, the coefficient vector of z_n.
    static SpectralVector unit(int n_modes, ModeIndex n, Space tag) {
        if (n.value() > n_modes) throw DomainError("unit mode exceeds truncation");
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n_modes);
        v(n.value() - 1) = 1.0;
        return SpectralVector(std::move(v), tag);
    }

    int size() const { return static_cast<int>(coeffs_.size()); }
    Space tag() const { return tag_; }
    const Eigen::VectorXd& coeffs() const { return coeffs_; }
    /// Coefficient of mode n (1-based).
    double operator[](int n) const { return coeffs_(n - 1); }

    SpectralVector with_tag(Space tag) const { return SpectralVector(coeffs_, tag); }

    /// True when the tag places the vector in `space` (D ⊂ Z ⊂ X).
    bool belongs_to(Space space) const { return static_cast<int>(tag_) >= static_cast<int>(space); }

private:
    Eigen::VectorXd coeffs_;
    Space tag_;
};

/// Weighted ℓ² norm of raw coefficients.
inline double norm(const Eigen::Ref<const Eigen::VectorXd>& a, Space space) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        acc += norm_weight(space, static_cast<int>(k + 1)) * a(k) * a(k);
    }
    return std::sqrt(acc);
}

inline double norm(const SpectralVector& v, Space space) { return norm(v.coeffs(), space); }

/// Element of the product space 𝒵 = Z × X (or 𝒟 = D × Z).
struct ProductVector {
    SpectralVector first;
    SpectralVector second;

    /// Stacked coefficient vector (first block, then second block).
    Eigen::VectorXd stacked() const {
        Eigen::VectorXd out(first.size() + second.size());
        out << first.coeffs(), second.coeffs();
        return out;
    }
};

/// ‖(x, y)‖_𝒵 = (‖x‖_Z² + ‖y‖_X²)^{1/2}.
inline double product_norm(const Eigen::Ref<const Eigen::VectorXd>& stacked) {
    const Eigen::Index n = stacked.size() / 2;
    const double a = norm(stacked.head(n), Space::Z);
    const double b = norm(stacked.tail(n), Space::X);
    return std::hypot(a, b);
}

inline double product_norm(const ProductVector& p) {
    return std::hypot(norm(p.first, Space::Z), norm(p.second, Space::X));
}

/// ‖(x, y)‖_𝒟 = (‖x‖_D² + ‖y‖_Z²)^{1/2}, the graph norm of the first-order generator's domain.
inline double product_domain_norm(const Eigen::Ref<const Eigen::VectorXd>& stacked) {
    const Eigen::Index n = stacked.size() / 2;
    return std::hypot(norm(stacked.head(n), Space::D), norm(stacked.tail(n), Space::Z));
}

}  // namespace evofam
