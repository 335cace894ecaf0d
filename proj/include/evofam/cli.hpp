#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evofam/config.hpp"
#include "evofam/fundsol.hpp"
#include "evofam/oscillator.hpp"
#include "evofam/perturbation.hpp"
#include "evofam/report.hpp"
#include "evofam/verify.hpp"

namespace evofam::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failures = 1,
    exit_usage = 2,
    exit_runtime = 3,
};

/// Failure to create or replace an output file; the message carries the path.
class IoError : public Error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : Error("cannot write '" + path.string() + "': " + what) {}
};

/// 17 significant digits, enough for an exact double round trip.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes `content` to a sibling temporary file and renames it over `path`, so readers never see a
/// partially written file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(path, ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(tmp, "cannot open for writing");
        out << content;
        out.flush();
        if (!out) throw IoError(tmp, "write failed");
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError(path, ec.message());
    }
}

struct RunManifest {
    std::string subcommand;
    RunSpec config;
    std::filesystem::path output_directory;
    std::uint64_t seed = default_seed;
    std::string version = format_version;
    std::vector<std::string> files;

    nlohmann::json to_json() const {
        return {{"subcommand", subcommand},
                {"config", config_to_json(config)},
                {"output_directory", output_directory.string()},
                {"seed", seed},
                {"format_version", version},
                {"files", files}};
    }
};

/// Parses CSV text with a header row into its header and numeric rows.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream cells(s);
        while (std::getline(cells, cell, ',')) out.push_back(cell);
        return out;
    };
    if (std::getline(in, line)) header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const std::string& cell : split(line)) {
            // strtod keeps subnormals, which std::stod rejects as out of range.
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size()) throw DomainError("CSV cell is not a number: " + cell);
            row.push_back(v);
        }
        if (row.size() != header.size()) throw DomainError("CSV row width differs from the header");
        rows.push_back(std::move(row));
    }
    return {header, rows};
}

/// Locates the grid node for a user-supplied time; non-grid times are rejected.
inline int require_node(const TimeGrid& grid, double t, const std::string& flag) {
    const std::optional<int> node = grid.index_of(t);
    if (!node) {
        throw ConfigError(flag, "time " + format_double(t) + " is not a grid node (step " + format_double(grid.step()) +
                                    ")");
    }
    return *node;
}

/// Rows t, r, ṙ, c, ċ for mode n from base node s to T.
inline std::string oscillator_csv(const RunSpec& spec, int n, int s_node, const OscillatorOptions& opt = {}) {
    const OscillatorSolution sol = solve_mode(ModeIndex(n), s_node, spec.coefficients, spec.grid, opt);
    std::string out = "t,r,rdot,c,cdot\n";
    for (int k = 0; k < sol.size(); ++k) {
        out += format_double(sol.time_at(k)) + ',' + format_double(sol.r[k]) + ',' + format_double(sol.rdot[k]) + ',' +
               format_double(sol.c[k]) + ',' + format_double(sol.cdot[k]) + '\n';
    }
    return out;
}

enum class Method { volterra, direct };

/// Solution of w'' = (A + B)w with w(0) = φ, w'(0) = ψ on the grid. Without a perturbation the
/// fundamental solution is used directly; otherwise V(·, 0) from the selected method.
inline Trajectory solve_trajectory(const RunSpec& spec, Method method) {
    const Eigen::VectorXd phi = spec.phi(), psi = spec.psi();
    const PerturbationMatrixField b(spec.coefficients, spec.truncation, spec.grid);
    if (b.is_zero()) {
        const FundamentalSolutionField f(spec.coefficients, spec.truncation, spec.grid);
        return classical_solution(f, SpectralVector(phi, Space::X), SpectralVector(psi, Space::X));
    }
    if (method == Method::direct) {
        return trajectory_from_column(direct_oracle(spec.coefficients, b, 0, spec.grid), spec.grid, phi, psi);
    }
    const FundamentalSolutionField f(spec.coefficients, spec.truncation, spec.grid);
    const VolterraColumn col = solve_volterra(f, b, 0, VolterraOptions{spec.tolerances.picard, 200, false});
    return trajectory_from_column(col.samples, spec.grid, phi, psi);
}

inline std::string trajectory_csv(const Trajectory& u) {
    std::string out = "t";
    for (Eigen::Index n = 1; n <= u.values.rows(); ++n) out += ",a_" + std::to_string(n);
    out += '\n';
    for (int i = 0; i < u.grid.nodes(); ++i) {
        out += format_double(u.grid.node(i));
        for (Eigen::Index n = 0; n < u.values.rows(); ++n) out += ',' + format_double(u.values(n, i));
        out += '\n';
    }
    return out;
}

/// The `check` document: {meta, checks, first_order_axioms}. Everything outside meta.elapsed_seconds
/// is a pure function of the configuration and seed.
inline nlohmann::json check_document(const InvariantReport& report, double elapsed_seconds) {
    const auto [rest, first] = split_first_order(report);
    nlohmann::json meta = report.meta_json();
    meta["elapsed_seconds"] = elapsed_seconds;
    meta["failures"] = report.failure_count();
    return {{"meta", meta}, {"checks", rest.checks_json()}, {"first_order_axioms", first.checks_json()}};
}

struct PerturbResult {
    nlohmann::json document;
    std::string norms_csv;
};

/// Perturbed propagator column V(·, s) by the requested methods, with the method gap, Picard history
/// and second-form Duhamel residual.
inline PerturbResult perturb_report(const RunSpec& spec, int s_node, bool volterra, bool direct) {
    const FundamentalSolutionField f(spec.coefficients, spec.truncation, spec.grid);
    const PerturbationMatrixField b(spec.coefficients, spec.truncation, spec.grid);
    const VolterraOptions vopt{spec.tolerances.picard, 200, false};
    nlohmann::json doc;
    doc["s"] = spec.grid.node(s_node);
    doc["s_node"] = s_node;

    std::optional<VolterraColumn> vcol;
    std::optional<std::vector<Eigen::MatrixXd>> dcol;
    if (volterra) {
        vcol = solve_volterra(f, b, s_node, vopt);
        nlohmann::json inc = nlohmann::json::array();
        for (double x : vcol->increments) inc.push_back(InvariantReport::number_json(x));
        doc["volterra"] = {{"iterations", vcol->iterations}, {"increments", inc}};
        doc["duhamel_second_form_residual"] =
            InvariantReport::number_json(duhamel_second_form_residual_streaming(f, b, s_node, vopt));
    }
    if (direct) dcol = direct_oracle(spec.coefficients, b, s_node, spec.grid);
    if (vcol && dcol) doc["gap_z_operator_norm"] = InvariantReport::number_json(column_gap(vcol->samples, *dcol));

    std::string csv = "t";
    if (vcol) csv += ",volterra";
    if (dcol) csv += ",direct";
    csv += '\n';
    for (int i = s_node; i < spec.grid.nodes(); ++i) {
        const auto k = static_cast<std::size_t>(i - s_node);
        csv += format_double(spec.grid.node(i));
        if (vcol) csv += ',' + format_double(z_operator_norm(vcol->samples[k]));
        if (dcol) csv += ',' + format_double(z_operator_norm((*dcol)[k]));
        csv += '\n';
    }
    return {doc, csv};
}

/// Levels (N/2^{K−1}, M/2^{K−1}), ..., (N, M) of the configuration, each compared with its doubling.
inline std::vector<std::pair<int, int>> refinement_levels(const RunSpec& spec, int count) {
    if (count < 1) throw ConfigError("--refinements", "must be at least 1");
    const int div = 1 << (count - 1);
    if (spec.modes() % div != 0 || spec.grid.intervals() % div != 0) {
        throw ConfigError("--refinements", "N and M must be divisible by 2^(refinements-1) = " + std::to_string(div));
    }
    std::vector<std::pair<int, int>> out;
    for (int k = count - 1; k >= 0; --k) out.emplace_back(spec.modes() >> k, spec.grid.intervals() >> k);
    return out;
}

inline std::string convergence_csv(const ConvergenceTable& table) {
    std::string out = "N,M,difference\n";
    for (const auto& r : table.rows) {
        out += std::to_string(r.modes) + ',' + std::to_string(r.intervals) + ',' + format_double(r.difference) + '\n';
    }
    return out;
}

/// Parses arguments, dispatches the subcommand and maps errors onto exit codes. Diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    CLI::App app{"Fundamental solutions of the non-autonomous wave equation at finite spectral truncation", "evofam"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = default_seed;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "probe seed")->default_str("0xE70F");
    };

    int mode = 1;
    double s_time = 0.0;
    auto* osc = app.add_subcommand("oscillator", "oscillator pair (r, c) for one mode as CSV");
    common(osc);
    osc->add_option("--n", mode, "mode index")->required()->check(CLI::PositiveNumber);
    osc->add_option("--s", s_time, "base time, must be a grid node")->required();

    std::string method = "volterra";
    auto* solve = app.add_subcommand("solve", "solution trajectory as CSV");
    common(solve);
    solve->add_option("--method", method, "perturbed propagator method")
        ->check(CLI::IsMember({"volterra", "direct"}));

    auto* check = app.add_subcommand("check", "invariant report as JSON");
    common(check);

    std::string perturb_method = "volterra";
    bool write_csv = false;
    double perturb_s = 0.0;
    auto* perturb = app.add_subcommand("perturb", "perturbed propagator report as JSON");
    common(perturb);
    perturb->add_option("--s", perturb_s, "base time, must be a grid node");
    perturb->add_option("--method", perturb_method, "solver")->check(CLI::IsMember({"volterra", "direct", "both"}));
    perturb->add_flag("--csv", write_csv, "also write the per-node norms of V(t,s)");

    int refinements = 3;
    auto* conv = app.add_subcommand("convergence", "self-convergence table as CSV");
    common(conv);
    conv->add_option("--refinements", refinements, "number of levels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream out, diag;
        const int code = app.exit(e, out, diag);
        err << out.str() << diag.str();
        return code == 0 ? exit_ok : exit_usage;
    }

    namespace fs = std::filesystem;
    try {
        const RunSpec spec = parse_config_file(config_path);
        RunManifest manifest;
        manifest.config = spec;
        manifest.output_directory = out_dir;
        manifest.seed = seed;
        const fs::path dir(out_dir);
        auto emit = [&](const std::string& name, const std::string& content) {
            write_atomic(dir / name, content);
            manifest.files.push_back(name);
        };
        int code = exit_ok;

        if (*osc) {
            manifest.subcommand = "oscillator";
            if (mode > spec.modes()) throw ConfigError("--n", "exceeds the truncation N");
            emit("oscillator.csv", oscillator_csv(spec, mode, require_node(spec.grid, s_time, "--s")));
        } else if (*solve) {
            manifest.subcommand = "solve";
            emit("trajectory.csv", trajectory_csv(solve_trajectory(spec, method == "direct" ? Method::direct
                                                                                              : Method::volterra)));
        } else if (*check) {
            manifest.subcommand = "check";
            const auto start = std::chrono::steady_clock::now();
            SuiteOptions opt;
            opt.seed = seed;
            const InvariantReport report = run_full_suite(spec, opt);
            const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            emit("check.json", check_document(report, elapsed).dump(2) + '\n');
            if (!report.all_pass()) {
                err << "check: " << report.failure_count() << " failing check(s)\n";
                code = exit_failures;
            }
        } else if (*perturb) {
            manifest.subcommand = "perturb";
            const int s_node = require_node(spec.grid, perturb_s, "--s");
            const bool both = perturb_method == "both";
            PerturbResult r = perturb_report(spec, s_node, both || perturb_method == "volterra",
                                             both || perturb_method == "direct");
            r.document["meta"] = {{"config_hash", hash_hex(config_hash(spec))},
                                  {"format_version", format_version},
                                  {"seed", seed},
                                  {"method", perturb_method}};
            emit("perturb.json", r.document.dump(2) + '\n');
            if (write_csv) emit("perturb_norms.csv", r.norms_csv);
        } else if (*conv) {
            manifest.subcommand = "convergence";
            const ConvergenceTable table = convergence_study(spec, refinement_levels(spec, refinements));
            emit("convergence.csv", convergence_csv(table));
            if (!table.monotone) {
                err << "convergence: differences are not decreasing\n";
                code = exit_failures;
            }
        }
        write_atomic(dir / "manifest.json", manifest.to_json().dump(2) + '\n');
        return code;
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return exit_usage;
    } catch (const ConvergenceError& e) {
        err << e.what() << '\n';
        return exit_runtime;
    } catch (const IoError& e) {
        err << e.what() << '\n';
        return exit_runtime;
    } catch (const DomainError& e) {
        err << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return exit_runtime;
    }
}

}  // namespace evofam::cli
