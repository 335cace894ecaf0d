#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "evofam/core.hpp"

namespace evofam {

/// Diagonal of W_𝒵: √(1+n²) on the Z block, 1 on the X block, so ‖p‖_𝒵 = ‖W p‖₂.
inline Eigen::VectorXd product_weights(int n_modes) {
    Eigen::VectorXd w(2 * n_modes);
    for (int n = 1; n <= n_modes; ++n) {
        w(n - 1) = std::sqrt(norm_weight(Space::Z, n));
        w(n_modes + n - 1) = 1.0;
    }
    return w;
}

/// Largest singular value by dense SVD.
inline double spectral_norm_svd(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues()(0);
}

/// Largest singular value by power iteration on AᵀA.
inline double spectral_norm_power(const Eigen::MatrixXd& a, double tol = 1e-8, int max_iterations = 500) {
    if (a.size() == 0) return 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(a.cols());
    // Deterministic, non-degenerate start vector.
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += 0.01 * static_cast<double>(k % 7);
    v.normalize();
    double sigma = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
        Eigen::VectorXd w = a.transpose() * (a * v);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        const double next = std::sqrt(nw);
        v = w / nw;
        if (std::abs(next - sigma) <= tol * std::max(1.0, next)) return next;
        sigma = next;
    }
    return sigma;
}

/// Operator norm of P: 𝒵 → 𝒵, i.e. σ_max(W P W⁻¹). Dense SVD up to N = 64, power iteration above.
inline double z_operator_norm(const Eigen::MatrixXd& p) {
    const int n_modes = static_cast<int>(p.rows() / 2);
    const Eigen::VectorXd w = product_weights(n_modes);
    const Eigen::MatrixXd scaled = w.asDiagonal() * p * w.cwiseInverse().asDiagonal();
    return n_modes <= 64 ? spectral_norm_svd(scaled) : spectral_norm_power(scaled);
}

/// Frobenius norm of W P W⁻¹; an upper bound of z_operator_norm.
inline double z_frobenius_norm(const Eigen::MatrixXd& p) {
    const int n_modes = static_cast<int>(p.rows() / 2);
    const Eigen::VectorXd w = product_weights(n_modes);
    return (w.asDiagonal() * p * w.cwiseInverse().asDiagonal()).norm();
}

}  // namespace evofam
