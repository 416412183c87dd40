#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "varcert/certificates.hpp"
#include "varcert/config.hpp"
#include "varcert/derivative_check.hpp"
#include "varcert/gridfunction_io.hpp"
#include "varcert/json_canonical.hpp"
#include "varcert/synthetic.hpp"

namespace fs = std::filesystem;
using namespace varcert;

namespace {

// Exit codes (stable contract): 0 success, 1 check/verification failure or
// internal error, 2 solver non-convergence, 3 infeasible query pair,
// 64 configuration or usage error.

bool contains_ci(const std::string& hay, const std::string& needle) {
    auto low = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return s;
    };
    return low(hay).find(low(needle)) != std::string::npos;
}

SolveOptions solve_options(const RunConfig& c) {
    SolveOptions o;
    o.tol = c.solver.tol;
    o.max_iter = c.solver.max_iter;
    if (c.solver.method == "exact-dual")
        o.method = SolveMethod::ExactDual;
    else if (c.solver.method == "pdhg")
        o.method = SolveMethod::PDHG;
    else
        o.method = SolveMethod::Auto;
    return o;
}

GridFunction load_field(const std::string& path, const Grid& g) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
        return read_csv_gridfunction(path, g);
    GridFunction f = read_gf01(path);
    if (f.grid().dim() != g.dim() || f.grid().n_per_axis() != g.n_per_axis())
        throw io_error("'" + path + "' is on a " + std::to_string(f.grid().dim()) + "-d grid with n=" +
                       std::to_string(f.grid().n_per_axis()) + ", but the config asks for dim=" +
                       std::to_string(g.dim()) + ", n=" + std::to_string(g.n_per_axis()));
    return f;
}

/// Assemble the saddle problem a config describes. Synthetic data solves the
/// state equation at the configured true control and corrupts the
/// observation with seeded noise; file data is loaded as-is.
SaddleProblem build_problem(const RunConfig& c) {
    Grid g(c.grid.dim, c.grid.n);
    EllipticOperator op(g, c.epsilon);
    GridFunction f = synth_field(g, c.forcing, "forcing");
    GridFunction y(g);
    if (c.data.source == "synthetic") {
        GridFunction u_true = synth_field(g, c.data.u_true, "data.u_true");
        for (std::size_t i = 0; i < u_true.size(); ++i)
            if (u_true[i] < c.epsilon)
                throw config_error("data.u_true",
                                   "true control dips below the admissibility floor at node " +
                                       std::to_string(i));
        y = solve_state(op, u_true, f).y();
        Rng rng(c.seed);
        if (c.data.noise == "impulsive")
            add_impulsive_noise(y, c.data.level, rng);
        else
            add_uniform_noise(y, c.data.level, rng);
    } else {
        y = load_field(c.data.path, g);
    }
    if (c.problem == "l1fit")
        return SaddleProblem::l1_fitting(std::move(op), std::move(f), std::move(y), c.alpha,
                                         c.gamma);
    return SaddleProblem::linf_fitting(std::move(op), std::move(f), std::move(y), c.alpha,
                                       c.delta, c.gamma);
}

SaddlePoint initial_point(const SaddleProblem& p, const RunConfig& c) {
    const Grid& g = p.grid();
    return {GridFunction(g, std::max(1.0, 2.0 * c.epsilon)), GridFunction(g, 0.0)};
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);  // binary: LF everywhere
    if (!os) throw io_error("cannot open '" + path.string() + "' for writing");
    os << content;
    if (!os) throw io_error("write failed for '" + path.string() + "'");
}

int run_verify(const RunConfig& cfg, const std::string& integrand_filter,
               const std::string& inject_fault, bool quiet) {
    const auto catalog = derivative_case_catalog();
    JsonValue cases = JsonValue::array();
    int total = 0, failures = 0;
    std::vector<std::string> failing_kinds;
    for (const auto& bc : catalog) {
        const std::string kind = bc.spec.kind_name();
        if (!integrand_filter.empty() && !contains_ci(kind, integrand_filter)) continue;
        const double shift =
            !inject_fault.empty() && contains_ci(kind, inject_fault) ? 0.25 : 0.0;
        const CaseCheckResult res = check_derivative_case(bc, shift);
        ++total;
        JsonValue row = JsonValue::object();
        row["label"] = res.label;
        row["pass"] = res.pass;
        if (!res.pass) row["detail"] = res.detail;
        cases.push_back(std::move(row));
        if (!res.pass) {
            ++failures;
            if (std::find(failing_kinds.begin(), failing_kinds.end(), kind) ==
                failing_kinds.end())
                failing_kinds.push_back(kind);
            std::cout << "FAIL " << res.label << ": " << res.detail << "\n";
        } else if (!quiet) {
            std::cout << "PASS " << res.label << "\n";
        }
    }
    if (total == 0)
        throw config_error("integrand",
                           "no catalog case matches filter '" + integrand_filter + "'");
    JsonValue rep = JsonValue::object();
    rep["total"] = total;
    rep["failures"] = failures;
    rep["cases"] = std::move(cases);
    write_text(fs::path(cfg.out_dir) / "verify_report.json", rep.dump() + "\n");
    std::cout << total << " cases, " << failures << " failures";
    if (!failing_kinds.empty()) {
        std::cout << " (";
        for (std::size_t i = 0; i < failing_kinds.size(); ++i)
            std::cout << (i ? ", " : "") << failing_kinds[i];
        std::cout << ")";
    }
    std::cout << "\n";
    return failures == 0 ? 0 : 1;
}

int run_solve(const RunConfig& cfg, bool quiet) {
    SaddleProblem p = build_problem(cfg);
    const SolveResult res = solve_saddle(p, initial_point(p, cfg), solve_options(cfg));

    const fs::path out(cfg.out_dir);
    write_gf01((out / "u.gf").string(), res.point.u);
    write_gf01((out / "v.gf").string(), res.point.v);
    write_gf01((out / "data.gf").string(), p.data());

    JsonValue d = JsonValue::object();
    d["problem"] = cfg.problem;
    d["grid"] = JsonValue::object();
    d["grid"]["dim"] = cfg.grid.dim;
    d["grid"]["n"] = cfg.grid.n;
    d["alpha"] = cfg.alpha;
    d["gamma"] = cfg.gamma;
    d["method"] = cfg.solver.method;
    d["seed"] = static_cast<std::int64_t>(cfg.seed);
    d["converged"] = res.diagnostics.converged;
    d["iterations"] = res.diagnostics.iterations;
    d["final_residual"] = res.diagnostics.final_residual;
    d["max_iterate_norm"] = res.diagnostics.max_iterate_norm;
    JsonValue hist = JsonValue::array();
    for (const auto& [it, r] : res.diagnostics.residual_history) {
        JsonValue h = JsonValue::object();
        h["iteration"] = it;
        h["residual"] = r;
        hist.push_back(std::move(h));
    }
    d["residual_history"] = std::move(hist);
    write_text(out / "diagnostics.json", d.dump() + "\n");

    if (!quiet)
        std::cout << "solve: converged=" << (res.diagnostics.converged ? "yes" : "no")
                  << " iterations=" << res.diagnostics.iterations
                  << " residual=" << format_number(res.diagnostics.final_residual) << "\n";
    if (!res.diagnostics.converged) {
        std::cerr << "solver did not reach tol " << format_number(cfg.solver.tol) << " within "
                  << cfg.solver.max_iter << " iterations (artifacts written anyway)\n";
        return 2;
    }
    return 0;
}

int run_certify(const RunConfig& cfg, std::string u_path, std::string v_path, bool quiet) {
    SaddleProblem p = build_problem(cfg);
    const Grid& g = p.grid();
    const fs::path out(cfg.out_dir);
    if (u_path.empty()) u_path = (out / "u.gf").string();
    if (v_path.empty()) v_path = (out / "v.gf").string();
    SaddlePoint q{load_field(u_path, g), load_field(v_path, g)};

    CertifyOptions co;
    co.g_mode = cfg.certificate.curvature ? TMode::Curvature : TMode::Plain;
    co.tol_cert = cfg.certificate.tol_cert;
    co.with_tildelip = cfg.certificate.with_tildelip;
    co.neighborhood.t_ladder = cfg.certificate.t_ladder;
    co.neighborhood.sample_count = cfg.certificate.sample_count;
    co.neighborhood.seed = cfg.seed;
    co.conemin.seed = cfg.seed;
    std::optional<ProjectionSpec> proj;
    if (cfg.projection_blocks > 0) {
        proj = ProjectionSpec::uniform(g, static_cast<std::size_t>(cfg.projection_blocks));
        co.projection = &*proj;
    }

    const CertificateReport rep = certify(p, q, co);
    write_text(out / "certificate.json", report_to_json(rep).dump() + "\n");
    if (!quiet)
        std::cout << "verdict: " << verdict_name(rep.verdict)
                  << " (b_bar=" << format_number(rep.b_bar)
                  << ", ell_bound=" << format_number(rep.ell_bound) << ")\n";
    return 0;
}

int run_perturb(const RunConfig& cfg, bool quiet) {
    SaddleProblem p = build_problem(cfg);
    const Grid& g = p.grid();
    const SolveResult base = solve_saddle(p, initial_point(p, cfg), solve_options(cfg));
    if (!base.diagnostics.converged) {
        std::cerr << "base solve did not converge; no perturbation table written\n";
        return 2;
    }

    GridFunction dir(g);
    if (cfg.perturb.direction == "random") {
        Rng rng(cfg.seed + 1);
        for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
        dir = scaled(1.0 / norm(dir), dir);
    } else {
        const auto node = static_cast<std::size_t>(cfg.perturb.node);
        if (node >= g.node_count())
            throw config_error("perturb.node", "node index exceeds the grid");
        dir[node] = cfg.perturb.sign;
    }
    std::vector<GridFunction> deltas;
    for (double m : cfg.perturb.magnitudes) deltas.push_back(scaled(m, dir));

    const AubinTable tab = empirical_aubin(p, base.point, deltas, solve_options(cfg));
    std::string csv = "dy_norm,ratio,converged,blow_up\n";
    int ok = 0;
    for (const AubinRow& row : tab.rows) {
        csv += format_number(row.dy_norm) + "," + format_number(row.ratio) + "," +
               (row.converged ? "1" : "0") + "," + (tab.blow_up ? "1" : "0") + "\n";
        ok += row.converged ? 1 : 0;
    }
    write_text(fs::path(cfg.out_dir) / "perturb.csv", csv);
    if (!quiet)
        std::cout << "perturb: " << tab.rows.size() << " rows, " << ok << " converged, blow_up="
                  << (tab.blow_up ? "yes" : "no") << "\n";
    return (!tab.rows.empty() && ok == 0) ? 2 : 0;
}

int run_sweep(const RunConfig& cfg, bool quiet) {
    if (cfg.sweep.gammas.empty())
        throw config_error("sweep.gammas", "sweep-gamma needs at least one value");
    SaddleProblem p = build_problem(cfg);
    const SolveResult base = solve_saddle(p, initial_point(p, cfg), solve_options(cfg));
    if (!base.diagnostics.converged) {
        std::cerr << "base solve did not converge; no sweep table written\n";
        return 2;
    }
    const GammaSweep sw = gamma_sweep(p, base.point, cfg.sweep.gammas, solve_options(cfg));
    std::string csv = "gamma,distance,converged,ell_hat\n";
    int ok = 0;
    for (const GammaRow& row : sw.rows) {
        csv += format_number(row.gamma) + "," + format_number(row.distance) + "," +
               (row.converged ? "1" : "0") + "," + format_number(sw.ell_hat) + "\n";
        ok += row.converged ? 1 : 0;
    }
    write_text(fs::path(cfg.out_dir) / "sweep_gamma.csv", csv);
    if (!quiet)
        std::cout << "sweep-gamma: " << sw.rows.size() << " rows, " << ok
                  << " converged, ell_hat=" << format_number(sw.ell_hat) << "\n";
    return (!sw.rows.empty() && ok == 0) ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stability certificates for nonsmooth PDE-constrained fitting problems"};
    app.require_subcommand(1);

    std::string config_path, out_override, u_path, v_path, integrand_filter, inject_fault;
    std::uint64_t seed_override = 0;
    bool quiet = false;

    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--out", out_override, "output directory (overrides config)");
    auto* seed_opt = app.add_option("--seed", seed_override, "RNG seed (overrides config)");
    app.add_flag("--quiet", quiet, "only errors and failures are printed");

    auto* cmd_verify = app.add_subcommand(
        "verify-derivatives", "check the case formulas against the difference-quotient oracle");
    cmd_verify->add_option("--integrand", integrand_filter,
                           "only kinds whose name contains this (case-insensitive)");
    cmd_verify->add_option(
        "--inject-fault", inject_fault,
        "test hook: corrupt the formula for matching kinds; the checker must flag them");
    app.add_subcommand("solve", "solve the problem; writes u.gf, v.gf, data.gf, diagnostics.json");
    auto* cmd_certify =
        app.add_subcommand("certify", "evaluate certificates at a solved pair; writes certificate.json");
    cmd_certify->add_option("--u", u_path, "control iterate (default OUT/u.gf)");
    cmd_certify->add_option("--v", v_path, "dual iterate (default OUT/v.gf)");
    app.add_subcommand("perturb", "re-solve under data perturbations; writes perturb.csv");
    app.add_subcommand("sweep-gamma", "re-solve across smoothing weights; writes sweep_gamma.csv");

    // Accept the shared flags on either side of the subcommand name.
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const config_error& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
        return 64;
    } catch (const io_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 64;
    }

    try {
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (seed_opt->count()) cfg.seed = seed_override;
        // A relative data path means "next to the config file", so configs
        // that ship with a data file work from any working directory.
        if (cfg.data.source == "file" && fs::path(cfg.data.path).is_relative())
            cfg.data.path = (fs::path(config_path).parent_path() / cfg.data.path).string();
        fs::create_directories(cfg.out_dir);

        if (app.got_subcommand("verify-derivatives"))
            return run_verify(cfg, integrand_filter, inject_fault, quiet);
        if (app.got_subcommand("solve")) return run_solve(cfg, quiet);
        if (app.got_subcommand("certify")) return run_certify(cfg, u_path, v_path, quiet);
        if (app.got_subcommand("perturb")) return run_perturb(cfg, quiet);
        return run_sweep(cfg, quiet);
    } catch (const config_error& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
        return 64;
    } catch (const infeasible_error& e) {
        std::cerr << "infeasible pair: " << e.what() << "\n  nodes:";
        for (std::size_t i : e.nodes()) std::cerr << " " << i;
        std::cerr << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
