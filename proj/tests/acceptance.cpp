#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evofam/evofam.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace evofam;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    /// Records `value ≤ limit` under `label`.
    void at_most(const std::string& label, double value, double limit) {
        const bool ok = std::isfinite(value) && value <= limit;
        pass = pass && ok;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s%s %.3g %s %.3g", detail.empty() ? "" : "; ", label.c_str(), value,
                      ok ? "<=" : ">", limit);
        detail += buf;
    }

    /// Records `value ≥ limit` under `label`.
    void at_least(const std::string& label, double value, double limit) {
        const bool ok = std::isfinite(value) && value >= limit;
        pass = pass && ok;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s%s %.3g %s %.3g", detail.empty() ? "" : "; ", label.c_str(), value,
                      ok ? ">=" : "<", limit);
        detail += buf;
    }

    void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

struct Criterion {
    std::string id;
    std::string title;
    /// Wall-clock limit in seconds; part of the verdict.
    double runtime_limit;
    std::function<Verdict()> body;
};

RunSpec perturbed_spec(int intervals) {
    return parse_config(fixture::config_text(1.0, 8, intervals, fixture::ramp_alpha, fixture::beta_tenth_xi));
}

/// Largest thresholded residual among entries whose name starts with `prefix`; `worst` receives its name.
double worst_residual(const InvariantReport& r, const std::string& prefix, std::string& worst) {
    double value = 0.0;
    for (const auto& [name, e] : r.entries()) {
        if (e.kind != CheckKind::thresholded || name.rfind(prefix, 0) != 0) continue;
        if (!(e.residual <= value)) {
            value = e.residual;
            worst = name;
        }
    }
    return value;
}

Verdict constant_coefficient_exactness() {
    const CoefficientFamily cf = fixture::family(ScalarProfile::constant(1.0), BetaProfile::zero(), M_PI);
    const TimeGrid grid(M_PI, 314);
    OscillatorOptions forced;
    forced.force_integrator = true;
    double closed = 0.0, integrated = 0.0;
    for (int n = 1; n <= 16; ++n) {
        for (int s = 0; s <= grid.intervals(); ++s) {
            const OscillatorSolution a = solve_mode(ModeIndex(n), s, cf, grid);
            const OscillatorSolution b = solve_mode(ModeIndex(n), s, cf, grid, forced);
            for (int k = 0; k < a.size(); ++k) {
                const double exact = std::sin(n * (a.time_at(k) - a.base_time())) / n;
                closed = std::max(closed, std::abs(a.r[k] - exact));
                integrated = std::max(integrated, std::abs(b.r[k] - exact));
            }
        }
    }
    Verdict v;
    v.at_most("closed form", closed, 1e-10);
    v.at_most("integrator", integrated, 1e-6);
    return v;
}

Verdict stated_bounds() {
    const std::vector<std::pair<std::string, ScalarProfile>> menu{
        {"1+t/2", ScalarProfile::affine(1.0, 0.5)},
        {"1+0.5cos(2t)", ScalarProfile::cosine(1.0, 0.5, 2.0)},
    };
    const TimeGrid grid(1.0, 200);
    Verdict v;
    for (const auto& [label, alpha] : menu) {
        const CoefficientFamily cf = fixture::family(alpha);
        const std::vector<double> variation = log_alpha_variation(cf, grid);
        BoundMeasures worst;
        for (int n = 1; n <= 64; ++n) {
            for (int s = 0; s <= grid.intervals(); ++s) {
                const BoundMeasures m = measure_bounds(solve_mode(ModeIndex(n), s, cf, grid), cf, variation);
                worst.r_ratio = std::max(worst.r_ratio, m.r_ratio);
                worst.rdot_max = std::max(worst.rdot_max, m.rdot_max);
                worst.mixed_ratio = std::max(worst.mixed_ratio, m.mixed_ratio);
            }
        }
        v.at_most(label + " |r|n√α(s)", worst.r_ratio, 1.0 + 1e-6);
        v.at_most(label + " |∂t r|", worst.rdot_max, 1.0 + 1e-6);
        v.at_most(label + " |∂t∂s r|/n", worst.mixed_ratio, 1.0 + 1e-6);
    }
    return v;
}

Verdict axiom_suite() {
    const InvariantReport r =
        run_full_suite(parse_config(fixture::config_text(1.0, 16, 400, fixture::ramp_alpha)));
    Verdict v;
    v.at_most("(U1)", r.residual("propagator_composition"), 1e-4);
    v.at_most("(U4)", std::max(r.residual("propagator_t_derivative"), r.residual("propagator_s_derivative")), 1e-3);
    v.at_most("(S1)(a,c,d)",
              std::max({r.residual("sine_zero_on_diagonal"), r.residual("sine_dt_identity_on_diagonal"),
                        r.residual("sine_ds_minus_identity_on_diagonal")}),
              1e-12);
    v.at_most("(S2)(a)", r.residual("sine_second_t_derivative"), 1e-4);
    v.at_most("(S2)(b),(S3)(a,b)",
              std::max({r.residual("sine_second_s_derivative"), r.residual("sine_ds_second_t_derivative"),
                        r.residual("sine_dt_second_s_derivative")}),
              1e-3);
    v.at_most("(S4)", r.residual("sine_evolutionary_composition"), 1e-4);
    return v;
}

Verdict oracle_equivalence() {
    const RunSpec spec = perturbed_spec(200);
    const FundamentalSolutionField u(spec.coefficients, spec.truncation, spec.grid);
    const PerturbationMatrixField b(spec.coefficients, spec.truncation, spec.grid);
    const VolterraOptions opt;
    const PerturbedPropagatorField v = PerturbedPropagatorField::full(u, b, opt);
    Verdict out;
    out.at_most("gap", column_gap(v.column(0).samples, direct_oracle(spec.coefficients, b, 0, spec.grid)), 1e-5);
    out.at_most("Duhamel second form", duhamel_second_form_residual(u, b, v, 0), 5e-6);
    out.at_most("Picard sweeps", v.max_iterations(), 30);
    return out;
}

Verdict perturbed_round_trip() {
    const InvariantReport r = run_full_suite(perturbed_spec(200));
    std::string worst;
    const double sine = worst_residual(r, "perturbed_sine_", worst);
    Verdict v;
    v.at_most("worst (S1)-(S4) [" + worst + "]", sine, 1e-3);
    std::string worst_u;
    const double propagator = worst_residual(r, "perturbed_propagator_", worst_u);
    v.at_most("worst (U1)-(U4) [" + worst_u + "]", propagator, 1e-3);
    return v;
}

Verdict perturbation_closed_forms() {
    const PerturbationMatrixField b(fixture::family(ScalarProfile::constant(1.0), fixture::linear_xi(1.0)),
                                    Truncation(16), TimeGrid(1.0, 2));
    double diagonal = 0.0, parity = 0.0;
    for (int node = 0; node <= 2; ++node) {
        const Eigen::MatrixXd& m = b.at_node(node);
        for (int n = 1; n <= 16; ++n) {
            diagonal = std::max(diagonal, std::abs(m(n - 1, n - 1) - M_PI / 2));
            for (int k = 1; k <= 16; ++k) {
                if (n != k && (n + k) % 2 == 0) parity = std::max(parity, std::abs(m(n - 1, k - 1)));
            }
        }
    }
    Verdict v;
    v.at_most("|B_nn − π/2|", diagonal, 1e-8);
    v.at_most("|B_12 + 16/(9π)|", std::abs(b.at_node(1)(0, 1) + 16.0 / (9.0 * M_PI)), 1e-8);
    v.at_most("parity zeros", parity, 1e-10);
    return v;
}

Verdict order_scaling() {
    const InvariantReport coarse = run_full_suite(perturbed_spec(200));
    const InvariantReport fine = run_full_suite(perturbed_spec(400));
    auto ratio = [&](const std::string& name) { return coarse.residual(name) / fine.residual(name); };
    Verdict v;
    v.at_least("(U1) ratio", ratio("perturbed_propagator_composition"), 3.5);
    v.at_least("(S4) ratio", ratio("perturbed_sine_evolutionary_composition"), 3.5);
    v.at_least("Duhamel ratio", ratio("duhamel_second_form"), 3.5);
    char buf[96];
    std::snprintf(buf, sizeof buf, "oracle gap ratio %.3g (informational)", ratio("oracle_equivalence"));
    v.note(buf);

    const CoefficientFamily cf = fixture::family(ScalarProfile::affine(1.0, 1.0));
    const TimeGrid grid(1.0, 10);
    const auto ref = oracle::oscillator(6, [](double t) { return 1.0 + t; }, 0.0, 1.0, 1e-13);
    auto error = [&](double scale) {
        OscillatorOptions opt;
        opt.max_phase_step = 0.4;
        opt.substep_scale = scale;
        const OscillatorSolution sol = solve_mode(ModeIndex(6), 0, cf, grid, opt);
        return std::max(std::abs(sol.r.back() - ref[0]), std::abs(sol.c.back() - ref[2]));
    };
    v.at_least("substep halving ratio", error(1.0) / error(0.5), 12.0);
    return v;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "evofam_acceptance_a8";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "config.json";
    std::ofstream(cfg) << fixture::config_text(1.0, 8, 200, fixture::ramp_alpha, fixture::beta_tenth_xi);
    std::vector<std::string> sections;
    for (const char* run : {"first", "second"}) {
        const std::string cmd = std::string("\"") + EVOFAM_CLI_PATH + "\" check --seed 4242 --config \"" +
                                cfg.string() + "\" --out \"" + (dir / run).string() + "\" > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        if (status == -1 || !fs::exists(dir / run / "check.json")) {
            Verdict v;
            v.pass = false;
            v.note(std::string("CLI run '") + run + "' produced no check.json");
            return v;
        }
        const nlohmann::json doc = nlohmann::json::parse(read_file(dir / run / "check.json"));
        sections.push_back(doc.at("checks").dump() + doc.at("first_order_axioms").dump());
    }
    fs::remove_all(dir);
    Verdict v;
    v.pass = sections[0] == sections[1];
    v.note(v.pass ? "check sections byte-identical" : "check sections differ");
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria A1-A8", "acceptance"};
    std::vector<std::string> only;
    app.add_option("--only", only, "run only the named criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {"A1", "constant-coefficient exactness", 5.0, constant_coefficient_exactness},
        {"A2", "stated oscillator bounds", 30.0, stated_bounds},
        {"A3", "unperturbed axiom suite", 60.0, axiom_suite},
        {"A4", "Volterra vs direct oracle", 60.0, oracle_equivalence},
        {"A5", "perturbed round trip", 90.0, perturbed_round_trip},
        {"A6", "perturbation matrix closed forms", 1.0, perturbation_closed_forms},
        {"A7", "order scaling", 0.0, order_scaling},
        {"A8", "determinism of check", 0.0, determinism},
    };

    int failures = 0, selected = 0;
    for (const Criterion& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        ++selected;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.body();
        } catch (const std::exception& e) {
            v.pass = false;
            v.note(std::string("exception: ") + e.what());
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.runtime_limit > 0.0) v.at_most("runtime s", elapsed, c.runtime_limit);
        failures += !v.pass;
        std::printf("%s %s %s (%.2fs): %s\n", c.id.c_str(), v.pass ? "PASS" : "FAIL", c.title.c_str(), elapsed,
                    v.detail.c_str());
        std::fflush(stdout);
    }
    if (selected == 0) {
        std::fprintf(stderr, "no criterion matched --only\n");
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
