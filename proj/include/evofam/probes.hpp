#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "evofam/core.hpp"

namespace evofam {

/// Deterministic random source. Only mt19937_64 (whose output sequence is fixed by the standard) is
/// used; distributions are derived here because the standard library's are implementation-defined.
class ProbeRng {
public:
    explicit ProbeRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal by Box–Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform integer in [0, bound).
    std::size_t below(std::size_t bound) { return static_cast<std::size_t>(uniform() * static_cast<double>(bound)); }

    /// The first `count` entries of a Fisher–Yates shuffle of `items`.
    template <class T>
    std::vector<T> sample(std::vector<T> items, std::size_t count) {
        count = std::min(count, items.size());
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t pick = k + below(items.size() - k);
            std::swap(items[k], items[pick]);
        }
        items.resize(count);
        return items;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Coefficients g_n · n^{-decay} with standard normal g_n.
inline Eigen::VectorXd random_decaying(int n_modes, double decay, ProbeRng& rng) {
    Eigen::VectorXd v(n_modes);
    for (int n = 1; n <= n_modes; ++n) v(n - 1) = rng.normal() * std::pow(static_cast<double>(n), -decay);
    return v;
}

inline constexpr int max_unit_probes = 8;
inline constexpr int random_probe_count = 3;

/// Columns: e_1..e_min(N,8), then 3 seeded random vectors with a_n = g_n n⁻³ (D-type data).
inline Eigen::MatrixXd domain_probe_panel(int n_modes, std::uint64_t seed) {
    const int units = std::min(n_modes, max_unit_probes);
    Eigen::MatrixXd panel = Eigen::MatrixXd::Zero(n_modes, units + random_probe_count);
    for (int k = 0; k < units; ++k) panel(k, k) = 1.0;
    ProbeRng rng(seed);
    for (int k = 0; k < random_probe_count; ++k) panel.col(units + k) = random_decaying(n_modes, 3.0, rng);
    return panel;
}

/// Columns: e_1..e_min(N,8), then 3 seeded random vectors with a_n = g_n n⁻² (Z-type data).
inline Eigen::MatrixXd z_probe_panel(int n_modes, std::uint64_t seed) {
    const int units = std::min(n_modes, max_unit_probes);
    Eigen::MatrixXd panel = Eigen::MatrixXd::Zero(n_modes, units + random_probe_count);
    for (int k = 0; k < units; ++k) panel(k, k) = 1.0;
    ProbeRng rng(seed ^ 0x5A5A5A5AULL);
    for (int k = 0; k < random_probe_count; ++k) panel.col(units + k) = random_decaying(n_modes, 2.0, rng);
    return panel;
}

/// Stacked probes in 𝒟 = D × Z: (e_n, 0), (0, e_n) for n ≤ min(N,8), then 3 random pairs (n⁻³, n⁻²).
inline Eigen::MatrixXd product_probe_panel(int n_modes, std::uint64_t seed) {
    const int units = std::min(n_modes, max_unit_probes);
    Eigen::MatrixXd panel = Eigen::MatrixXd::Zero(2 * n_modes, 2 * units + random_probe_count);
    for (int k = 0; k < units; ++k) {
        panel(k, k) = 1.0;
        panel(n_modes + k, units + k) = 1.0;
    }
    ProbeRng rng(seed ^ 0xA5A5A5A5ULL);
    for (int k = 0; k < random_probe_count; ++k) {
        panel.col(2 * units + k).head(n_modes) = random_decaying(n_modes, 3.0, rng);
        panel.col(2 * units + k).tail(n_modes) = random_decaying(n_modes, 2.0, rng);
    }
    return panel;
}

inline constexpr int max_base_nodes = 20;

/// Evenly spaced interior nodes with integer stride ceil(M/K), K ≤ 20. Grids whose M differ by an
/// integer factor share the same base times.
inline std::vector<int> base_nodes(const TimeGrid& grid, int max_count = max_base_nodes) {
    const int m = grid.intervals();
    const int stride = std::max(1, (m + max_count - 1) / max_count);
    std::vector<int> out;
    for (int j = stride; j < m; j += stride) out.push_back(j);
    return out;
}

struct NodeTriple {
    int t, s, r;
    friend bool operator==(const NodeTriple&, const NodeTriple&) = default;
};

inline constexpr std::size_t max_composition_triples = 200;

/// Ordered triples r ≤ s ≤ t drawn from `nodes`; at most `cap`, seeded.
inline std::vector<NodeTriple> composition_triples(std::vector<int> nodes, std::uint64_t seed,
                                                   std::size_t cap = max_composition_triples) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    std::vector<NodeTriple> all;
    for (std::size_t a = 0; a < nodes.size(); ++a)
        for (std::size_t b = a; b < nodes.size(); ++b)
            for (std::size_t c = b; c < nodes.size(); ++c) all.push_back({nodes[c], nodes[b], nodes[a]});
    if (all.size() <= cap) return all;
    ProbeRng rng(seed ^ 0x7121E5ULL);
    return rng.sample(std::move(all), cap);
}

/// Column norms of a probe panel in the given space.
inline Eigen::VectorXd column_norms(const Eigen::MatrixXd& panel, Space space) {
    Eigen::VectorXd out(panel.cols());
    for (Eigen::Index k = 0; k < panel.cols(); ++k) out(k) = norm(panel.col(k), space);
    return out;
}

inline Eigen::VectorXd product_column_norms(const Eigen::MatrixXd& panel, bool domain) {
    Eigen::VectorXd out(panel.cols());
    for (Eigen::Index k = 0; k < panel.cols(); ++k) {
        out(k) = domain ? product_domain_norm(panel.col(k)) : product_norm(panel.col(k));
    }
    return out;
}

/// max_k ‖residual_k‖_space / scale_k over the probe columns.
inline double max_relative(const Eigen::MatrixXd& residual, Space space, const Eigen::VectorXd& scale) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < residual.cols(); ++k) {
        const double r = norm(residual.col(k), space) / scale(k);
        worst = std::isnan(r) ? r : std::max(worst, r);
        if (std::isnan(worst)) return worst;
    }
    return worst;
}

inline double max_relative_product(const Eigen::MatrixXd& residual, const Eigen::VectorXd& scale) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < residual.cols(); ++k) {
        const double r = product_norm(residual.col(k)) / scale(k);
        if (std::isnan(r)) return r;
        worst = std::max(worst, r);
    }
    return worst;
}

}  // namespace evofam
