#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evofam/coefficients.hpp"
#include "evofam/core.hpp"

namespace evofam {

/// Invalid run configuration; `key()` names the offending entry ("N", "alpha.params.c", ...).
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error("config error at '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct Tolerances {
    /// Finite-difference limited residual checks.
    double residual = 1e-3;
    /// Picard increment threshold for the Volterra solve.
    double picard = 1e-10;
    /// Integrator tolerance scale (Wronskian check uses 50× this).
    double ode = 1e-8;
    friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

/// Sine coefficients of w(0,·) = φ and ∂t w(0,·) = ψ, zero-padded to N.
struct InitialData {
    std::vector<double> phi;
    std::vector<double> psi;
    friend bool operator==(const InitialData&, const InitialData&) = default;
};

/// Fully validated run specification.
struct RunSpec {
    CoefficientFamily coefficients;
    Truncation truncation{1};
    TimeGrid grid{1.0, 1};
    Tolerances tolerances;
    InitialData initial;

    int modes() const { return truncation.modes(); }

    Eigen::VectorXd phi() const { return padded(initial.phi); }
    Eigen::VectorXd psi() const { return padded(initial.psi); }

    friend bool operator==(const RunSpec&, const RunSpec&) = default;

private:
    Eigen::VectorXd padded(const std::vector<double>& a) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(modes());
        for (std::size_t k = 0; k < a.size() && static_cast<int>(k) < modes(); ++k) v(k) = a[k];
        return v;
    }
};

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path.empty() ? key : path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(path.empty() ? key : path + "." + key, "missing required key");
    return *it;
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline double number(const json& obj, const std::string& key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(join(path, key), "expected a finite number");
    return d;
}

inline std::vector<double> number_array(const json& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(key, "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline ScalarProfile parse_scalar(const json& node, const std::string& path, double horizon) {
    const json& fam = require(node, "family", path);
    if (!fam.is_string()) throw ConfigError(join(path, "family"), "expected a string");
    const std::string family = fam.get<std::string>();
    const std::string ppath = join(path, "params");
    static const json empty = json::object();
    const json& params = node.contains("params") ? node.at("params") : empty;
    if (family == "constant") return ScalarProfile::constant(number(params, "c", ppath));
    if (family == "affine") return ScalarProfile::affine(number(params, "a", ppath), number(params, "b", ppath));
    if (family == "cosine") {
        return ScalarProfile::cosine(number(params, "a", ppath), number(params, "b", ppath),
                                     number(params, "omega", ppath));
    }
    if (family == "table") {
        auto values = number_array(require(params, "values", ppath), join(ppath, "values"));
        std::vector<double> times;
        if (params.contains("times")) {
            times = number_array(params.at("times"), join(ppath, "times"));
        } else {
            if (values.size() < 2) throw ConfigError(join(ppath, "values"), "table needs at least two samples");
            for (std::size_t k = 0; k < values.size(); ++k) {
                times.push_back(horizon * static_cast<double>(k) / static_cast<double>(values.size() - 1));
            }
        }
        try {
            return ScalarProfile::table(std::move(times), std::move(values));
        } catch (const DomainError& e) {
            throw ConfigError(ppath, e.what());
        }
    }
    throw ConfigError(join(path, "family"), "unknown family '" + family + "'");
}

inline json scalar_to_json(const ScalarProfile& p) {
    json params = std::visit(
        [](const auto& v) -> json {
            using P = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<P, ConstantProfile>) return {{"c", v.c}};
            else if constexpr (std::is_same_v<P, AffineProfile>) return {{"a", v.a}, {"b", v.b}};
            else if constexpr (std::is_same_v<P, CosineProfile>) return {{"a", v.a}, {"b", v.b}, {"omega", v.omega}};
            else return {{"times", v.spline.knots()}, {"values", v.spline.values()}};
        },
        p.variant());
    return {{"family", p.family()}, {"params", params}};
}

inline BetaProfile parse_beta(const json& node, const std::string& path, double horizon) {
    const json& fam = require(node, "family", path);
    if (!fam.is_string()) throw ConfigError(join(path, "family"), "expected a string");
    const std::string family = fam.get<std::string>();
    const std::string ppath = join(path, "params");
    if (family == "zero") return BetaProfile::zero();
    if (family == "separable") {
        const json& params = require(node, "params", path);
        ScalarProfile g = parse_scalar(require(params, "g", ppath), join(ppath, "g"), horizon);
        auto coeffs = number_array(require(params, "p", ppath), join(ppath, "p"));
        if (coeffs.size() > 5) throw ConfigError(join(ppath, "p"), "polynomial degree must be <= 4");
        return BetaProfile::separable(std::move(g), Polynomial(std::move(coeffs)));
    }
    if (family == "table") {
        const json& params = require(node, "params", path);
        auto times = number_array(require(params, "times", ppath), join(ppath, "times"));
        auto xi = number_array(require(params, "xi", ppath), join(ppath, "xi"));
        const json& rows = require(params, "values", ppath);
        if (!rows.is_array()) throw ConfigError(join(ppath, "values"), "expected an array of rows");
        std::vector<std::vector<double>> values;
        for (const auto& row : rows) values.push_back(number_array(row, join(ppath, "values")));
        try {
            return BetaProfile(TableBeta(std::move(times), std::move(xi), std::move(values)));
        } catch (const DomainError& e) {
            throw ConfigError(ppath, e.what());
        }
    }
    throw ConfigError(join(path, "family"), "unknown family '" + family + "'");
}

inline json beta_to_json(const BetaProfile& b) {
    return std::visit(
        [&b](const auto& v) -> json {
            using B = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<B, ZeroBeta>) {
                return {{"family", b.family()}, {"params", json::object()}};
            } else if constexpr (std::is_same_v<B, SeparableBeta>) {
                return {{"family", b.family()}, {"params", {{"g", scalar_to_json(v.g)}, {"p", v.p.coeffs()}}}};
            } else {
                return {{"family", b.family()},
                        {"params", {{"times", v.times()}, {"xi", v.xi()}, {"values", v.values()}}}};
            }
        },
        b.variant());
}

inline int positive_int(const json& doc, const std::string& key) {
    const json& v = require(doc, key, "");
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    const auto i = v.get<std::int64_t>();
    if (i <= 0) throw ConfigError(key, "must be positive, got " + std::to_string(i));
    if (i > 1'000'000) throw ConfigError(key, "unreasonably large");
    return static_cast<int>(i);
}

}  // namespace detail

/// Parses and validates a JSON run configuration:
/// {T, N, M, alpha{family, params}, beta{family, params}, tolerances{residual, picard, ode},
///  initial{phi, psi}}. `tolerances` and `initial` are optional.
inline RunSpec parse_config(std::string_view text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<document>", std::string("malformed document: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("<document>", "top level must be an object");

    const double horizon = detail::number(doc, "T", "");
    if (!(horizon > 0.0)) throw ConfigError("T", "must be positive");
    const int n_modes = detail::positive_int(doc, "N");
    const int intervals = detail::positive_int(doc, "M");

    RunSpec spec;
    spec.truncation = Truncation(n_modes);
    spec.grid = TimeGrid(horizon, intervals);
    spec.coefficients.horizon = horizon;
    spec.coefficients.alpha = detail::parse_scalar(detail::require(doc, "alpha", ""), "alpha", horizon);
    spec.coefficients.beta = detail::parse_beta(detail::require(doc, "beta", ""), "beta", horizon);
    try {
        spec.coefficients.validate(spec.grid);
    } catch (const DomainError& e) {
        throw ConfigError("alpha", e.what());
    }

    if (doc.contains("tolerances")) {
        const json& tol = doc.at("tolerances");
        if (!tol.is_object()) throw ConfigError("tolerances", "expected an object");
        auto read = [&](const char* key, double& slot) {
            if (tol.contains(key)) {
                slot = detail::number(tol, key, "tolerances");
                if (!(slot > 0.0)) throw ConfigError(std::string("tolerances.") + key, "must be positive");
            }
        };
        read("residual", spec.tolerances.residual);
        read("picard", spec.tolerances.picard);
        read("ode", spec.tolerances.ode);
    }

    if (doc.contains("initial")) {
        const json& init = doc.at("initial");
        if (!init.is_object()) throw ConfigError("initial", "expected an object");
        if (init.contains("phi")) spec.initial.phi = detail::number_array(init.at("phi"), "initial.phi");
        if (init.contains("psi")) spec.initial.psi = detail::number_array(init.at("psi"), "initial.psi");
        if (static_cast<int>(spec.initial.phi.size()) > n_modes) throw ConfigError("initial.phi", "more coefficients than N");
        if (static_cast<int>(spec.initial.psi.size()) > n_modes) throw ConfigError("initial.psi", "more coefficients than N");
    }
    return spec;
}

inline RunSpec parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

inline nlohmann::json config_to_json(const RunSpec& spec) {
    using nlohmann::json;
    return json{
        {"T", spec.grid.horizon()},
        {"N", spec.modes()},
        {"M", spec.grid.intervals()},
        {"alpha", detail::scalar_to_json(spec.coefficients.alpha)},
        {"beta", detail::beta_to_json(spec.coefficients.beta)},
        {"tolerances",
         {{"residual", spec.tolerances.residual}, {"picard", spec.tolerances.picard}, {"ode", spec.tolerances.ode}}},
        {"initial", {{"phi", spec.initial.phi}, {"psi", spec.initial.psi}}},
    };
}

/// Canonical JSON text; parse_config(serialize_config(s)) == s.
inline std::string serialize_config(const RunSpec& spec) { return config_to_json(spec).dump(2); }

/// FNV-1a 64-bit hash of the canonical serialization.
inline std::uint64_t config_hash(const RunSpec& spec) {
    const std::string text = config_to_json(spec).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace evofam
