#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "varcert/config.hpp"
#include "varcert/gridfunction_io.hpp"
#include "varcert/synthetic.hpp"

namespace fs = std::filesystem;
using namespace varcert;

namespace {

const fs::path kFixtures{FIXTURE_DIR};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    REQUIRE(os.good());
    os << s;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d =
        fs::temp_directory_path() / ("vcert_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

struct CmdResult {
    int exit_code;
    std::string output;  // stdout and stderr combined
};

CmdResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path log = fs::temp_directory_path() /
                         ("vcert_log_" + std::to_string(::getpid()) + "_" +
                          std::to_string(counter++) + ".txt");
    const std::string cmd =
        std::string(VCERT_BIN_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = status < 0 ? 127 : WEXITSTATUS(status);
    r.output = slurp(log);
    fs::remove(log);
    return r;
}

/// First number following `"key": ` in a JSON text (artifact files only).
double json_number_after(const std::string& text, const std::string& key) {
    const std::string needle = "\"" + key + "\": ";
    const std::size_t at = text.find(needle);
    REQUIRE(at != std::string::npos);
    return std::strtod(text.c_str() + at + needle.size(), nullptr);
}

/// The dotted key path carried by the config_error a callable throws.
template <class F>
std::string thrown_key(F&& f) {
    try {
        f();
    } catch (const config_error& e) {
        return e.key();
    }
    return "<no config_error>";
}

}  // namespace

TEST_CASE("config: defaults materialize and round-trip exactly") {
    const RunConfig d = parse_config("{}");
    REQUIRE(d.problem == "l1fit");
    REQUIRE(d.grid.dim == 1);
    REQUIRE(d.grid.n == 32);
    REQUIRE(d.alpha == 1.0);
    REQUIRE(d.gamma == 0.0);
    REQUIRE(d.epsilon == 1e-3);
    REQUIRE(d.forcing == "1");
    REQUIRE(d.data.source == "synthetic");
    REQUIRE(d.data.noise == "impulsive");
    REQUIRE(d.solver.method == "auto");
    REQUIRE(d.certificate.t_ladder == std::vector<double>{1e-3, 1e-2, 1e-1});
    REQUIRE(d.projection_blocks == 0);
    REQUIRE(d.sweep.gammas.empty());
    REQUIRE(d.out_dir == "out");
    REQUIRE(d.seed == 1);

    const std::string s1 = serialize_config(d);
    REQUIRE(serialize_config(parse_config(s1)) == s1);
}

TEST_CASE("config: doubles survive the round trip bit for bit") {
    // Values that need all 17 digits: a serializer that truncates loses them.
    const std::string text = R"({
        "alpha": 0.30000000000000004,
        "gamma": 0.1,
        "certificate": {"t_ladder": [1e-3, 0.05499999999999999]},
        "seed": 9223372036854775807
    })";
    const RunConfig c = parse_config(text);
    REQUIRE(c.alpha == 0.30000000000000004);
    REQUIRE(c.certificate.t_ladder[1] == 0.05499999999999999);
    REQUIRE(c.seed == 9223372036854775807ull);
    const std::string s1 = serialize_config(c);
    const RunConfig c2 = parse_config(s1);
    REQUIRE(c2.alpha == c.alpha);
    REQUIRE(c2.certificate.t_ladder == c.certificate.t_ladder);
    REQUIRE(c2.seed == c.seed);
    REQUIRE(serialize_config(c2) == s1);
}

TEST_CASE("config: every shipped fixture parses, validates, and round-trips") {
    for (const char* name : {"l1_n32.json", "linf_n32.json", "trivial.json",
                             "l1_gamma0_n16.json", "l1_allactive_n64.json"}) {
        INFO(name);
        const RunConfig c = load_config((kFixtures / name).string());
        const std::string s1 = serialize_config(c);
        REQUIRE(serialize_config(parse_config(s1)) == s1);
    }
}

TEST_CASE("config: unknown keys are rejected with their dotted path") {
    REQUIRE(thrown_key([] { parse_config(R"({"alhpa": 2})"); }) == "alhpa");
    REQUIRE(thrown_key([] { parse_config(R"({"solver": {"tool": 1}})"); }) == "solver.tool");
    REQUIRE(thrown_key([] { parse_config(R"({"grid": {"m": 8}})"); }) == "grid.m");
    REQUIRE(thrown_key([] { parse_config(R"({"data": {"nois": "x"}})"); }) == "data.nois");
    REQUIRE(thrown_key([] { parse_config(R"({"certificate": {"ladder": []}})"); }) ==
            "certificate.ladder");
    REQUIRE(thrown_key([] { parse_config(R"({"perturb": {"magnitude": [1]}})"); }) ==
            "perturb.magnitude");
}

TEST_CASE("config: type and range violations name the offending key") {
    REQUIRE(thrown_key([] { parse_config(R"({"alpha": "1"})"); }) == "alpha");
    REQUIRE(thrown_key([] { parse_config(R"({"grid": {"n": 2.5}})"); }) == "grid.n");
    REQUIRE(thrown_key([] { parse_config(R"({"alpha": 0})"); }) == "alpha");
    REQUIRE(thrown_key([] { parse_config(R"({"gamma": -1})"); }) == "gamma");
    REQUIRE(thrown_key([] { parse_config(R"({"epsilon": 0})"); }) == "epsilon");
    REQUIRE(thrown_key([] { parse_config(R"({"grid": {"n": 1}})"); }) == "grid.n");
    REQUIRE(thrown_key([] { parse_config(R"({"grid": {"dim": 3}})"); }) == "grid.dim");
    REQUIRE(thrown_key([] { parse_config(R"({"problem": "l2fit"})"); }) == "problem");
    REQUIRE(thrown_key([] { parse_config(R"({"solver": {"method": "foo"}})"); }) ==
            "solver.method");
    REQUIRE(thrown_key([] { parse_config(R"({"perturb": {"sign": 0.5}})"); }) == "perturb.sign");
    REQUIRE(thrown_key([] { parse_config(R"({"certificate": {"t_ladder": [0.1, 0.01]}})"); }) ==
            "certificate.t_ladder");
    REQUIRE(thrown_key([] { parse_config(R"({"seed": -1})"); }) == "seed");
    REQUIRE(thrown_key([] { parse_config(R"({"data": {"source": "files"}})"); }) ==
            "data.source");
    REQUIRE(thrown_key([] { parse_config(R"({"data": {"source": "file"}})"); }) == "data.path");
    REQUIRE(thrown_key([] { parse_config(R"({"sweep": {"gammas": [-0.1]}})"); }) ==
            "sweep.gammas");
    REQUIRE(thrown_key([] { parse_config(R"({"projection_blocks": -1})"); }) ==
            "projection_blocks");
    REQUIRE(thrown_key([] { parse_config("{oops"); }).empty());  // not JSON at all
}

TEST_CASE("config: expressions are validated at load time") {
    REQUIRE(thrown_key([] { parse_config(R"js({"data": {"u_true": "frob(x)"}})js"); }) ==
            "data.u_true");
    REQUIRE(thrown_key([] { parse_config(R"js({"forcing": "sin(y)"})js"); }) == "forcing");
    REQUIRE(thrown_key([] { parse_config(R"({"data": {"u_true": "1+y"}})"); }) == "data.u_true");
    // The same expressions are fine on a 2-d grid.
    const RunConfig c =
        parse_config(R"js({"grid": {"dim": 2, "n": 8}, "forcing": "sin(y)"})js");
    REQUIRE(c.forcing == "sin(y)");
}

TEST_CASE("expressions: grammar, precedence, and evaluation") {
    auto ev = [](const std::string& s, double x, double y = 0.0) {
        return Expression::parse(s, "t").eval(x, y);
    };
    REQUIRE(ev("1 + 0.5*sin(2*pi*x)", 0.25) == Catch::Approx(1.5).margin(1e-15));
    REQUIRE(ev("1+2*3^2", 0.0) == 19.0);
    REQUIRE(ev("-x^2", 3.0) == -9.0);          // unary minus binds looser than power
    REQUIRE(ev("2^-2*x", 2.0) == 0.5);         // signed exponent
    REQUIRE(ev("2^3^2", 0.0) == 512.0);        // right-associative power
    REQUIRE(ev("(1+2)*(x-1)", 3.0) == 6.0);
    REQUIRE(ev("abs(0-3)+exp(0)+cos(0)", 0.0) == 5.0);
    REQUIRE(ev("x/4", 2.0) == 0.5);
    REQUIRE(ev("pi", 0.0) == Catch::Approx(3.14159265358979323846));
    REQUIRE(ev("x+y", 1.0, 2.0) == 3.0);

    REQUIRE(Expression::parse("x*2", "t").uses_y() == false);
    REQUIRE(Expression::parse("y", "t").uses_y() == true);

    for (const char* bad : {"1 +", "sin x", "foo(x)", "1)", "x x", "", "(1+2"}) {
        INFO(bad);
        CHECK_THROWS_AS(Expression::parse(bad, "t"), config_error);
    }
}

TEST_CASE("synthetic fields: node coordinates and finiteness") {
    Grid g(1, 8);
    const GridFunction fx = synth_field(g, "x", "t");
    for (std::size_t i = 0; i < g.node_count(); ++i) REQUIRE(fx[i] == g.node(i).x);
    CHECK_THROWS_AS(synth_field(g, "1/(x-x)", "t"), config_error);   // non-finite value
    CHECK_THROWS_AS(synth_field(g, "y", "t"), config_error);         // y on a 1-d grid
}

TEST_CASE("synthetic noise: seeded, bounded, reproducible") {
    Grid g(1, 40);

    SECTION("impulsive hits exactly a tenth of the nodes at full amplitude") {
        GridFunction f(g, 0.0);
        Rng rng(5);
        add_impulsive_noise(f, 1.0, rng);
        int hits = 0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (f[i] != 0.0) {
                ++hits;
                REQUIRE(std::abs(f[i]) == 1.0);
            }
        }
        REQUIRE(hits == 4);

        GridFunction f2(g, 0.0);
        Rng rng2(5);
        add_impulsive_noise(f2, 1.0, rng2);
        for (std::size_t i = 0; i < f.size(); ++i) REQUIRE(f2[i] == f[i]);

        GridFunction f3(g, 0.0);
        Rng rng3(6);
        add_impulsive_noise(f3, 1.0, rng3);
        bool any_diff = false;
        for (std::size_t i = 0; i < f.size(); ++i) any_diff = any_diff || f3[i] != f[i];
        REQUIRE(any_diff);
    }

    SECTION("uniform stays inside the level and reproduces under the seed") {
        GridFunction f(g, 0.0);
        Rng rng(5);
        add_uniform_noise(f, 0.1, rng);
        double mx = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            REQUIRE(std::abs(f[i]) < 0.1);
            mx = std::max(mx, std::abs(f[i]));
        }
        REQUIRE(mx > 0.0);
        GridFunction f2(g, 0.0);
        Rng rng2(5);
        add_uniform_noise(f2, 0.1, rng2);
        for (std::size_t i = 0; i < f.size(); ++i) REQUIRE(f2[i] == f[i]);
    }

    SECTION("zero level leaves the field untouched") {
        GridFunction f(g, 2.0);
        Rng rng(5);
        add_impulsive_noise(f, 0.0, rng);
        add_uniform_noise(f, 0.0, rng);
        for (std::size_t i = 0; i < f.size(); ++i) REQUIRE(f[i] == 2.0);
    }
}

TEST_CASE("cli: solve fixture converges and artifacts land") {
    const fs::path out = fresh_dir("solve");
    const auto r = run_cli("solve --config " + (kFixtures / "l1_n32.json").string() + " --out " +
                           out.string() + " --quiet");
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    for (const char* f : {"u.gf", "v.gf", "data.gf", "diagnostics.json"})
        REQUIRE(fs::exists(out / f));
    const std::string diag = slurp(out / "diagnostics.json");
    REQUIRE(diag.find("\"converged\": true") != std::string::npos);
    REQUIRE(json_number_after(diag, "final_residual") <= 1e-8);
    const GridFunction u = read_gf01((out / "u.gf").string());
    REQUIRE(u.grid().n_per_axis() == 32);
    REQUIRE(u.all_finite());
}

TEST_CASE("cli: repeated runs are byte-identical") {
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    const std::string cfg = (kFixtures / "l1_n32.json").string();
    for (const fs::path& out : {a, b}) {
        REQUIRE(run_cli("solve --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        REQUIRE(run_cli("certify --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        REQUIRE(run_cli("perturb --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        REQUIRE(run_cli("sweep-gamma --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        REQUIRE(run_cli("verify-derivatives --config " + cfg + " --out " + out.string() +
                        " --quiet")
                    .exit_code == 0);
    }
    for (const char* f : {"u.gf", "v.gf", "data.gf", "diagnostics.json", "certificate.json",
                          "perturb.csv", "sweep_gamma.csv", "verify_report.json"}) {
        INFO(f);
        REQUIRE(slurp(a / f) == slurp(b / f));
    }
}

TEST_CASE("cli: exit codes follow the stable contract") {
    const fs::path out = fresh_dir("codes");

    SECTION("unknown config key exits 64 and names the key") {
        spit(out / "bad.json", R"({"alhpa": 2})");
        const auto r = run_cli("solve --config " + (out / "bad.json").string());
        REQUIRE(r.exit_code == 64);
        REQUIRE(r.output.find("alhpa") != std::string::npos);
    }

    SECTION("malformed JSON and missing files exit 64") {
        spit(out / "broken.json", "{oops");
        REQUIRE(run_cli("solve --config " + (out / "broken.json").string()).exit_code == 64);
        REQUIRE(run_cli("solve --config " + (out / "no_such.json").string()).exit_code == 64);
        REQUIRE(run_cli("solve").exit_code == 64);  // --config is required
    }

    SECTION("infeasible query pair exits 3 with node diagnostics") {
        const std::string cfg = (kFixtures / "l1_n32.json").string();
        REQUIRE(run_cli("solve --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        write_gf01((out / "v_bad.gf").string(), GridFunction(Grid(1, 32), 2.0));
        const auto r = run_cli("certify --config " + cfg + " --out " + out.string() + " --v " +
                               (out / "v_bad.gf").string() + " --quiet");
        REQUIRE(r.exit_code == 3);
        REQUIRE(r.output.find("nodes") != std::string::npos);
    }

    SECTION("solver non-convergence exits 2 but still writes artifacts") {
        RunConfig c = load_config((kFixtures / "l1_n32.json").string());
        c.solver.max_iter = 3;
        c.solver.method = "pdhg";
        spit(out / "short.json", serialize_config(c));
        const auto r =
            run_cli("solve --config " + (out / "short.json").string() + " --out " + out.string());
        REQUIRE(r.exit_code == 2);
        REQUIRE(slurp(out / "diagnostics.json").find("\"converged\": false") !=
                std::string::npos);
    }

    SECTION("fault injection makes verification fail loudly") {
        const auto r = run_cli("verify-derivatives --config " +
                               (kFixtures / "l1_n32.json").string() + " --out " + out.string() +
                               " --inject-fault abs --quiet");
        REQUIRE(r.exit_code == 1);
        REQUIRE(r.output.find("WeightedAbs") != std::string::npos);
    }

    SECTION("data file on the wrong grid exits 1") {
        RunConfig c = load_config((kFixtures / "l1_allactive_n64.json").string());
        c.grid.n = 32;  // csv carries 64 values
        c.data.path = (kFixtures / "allactive_n64.csv").string();
        spit(out / "mismatch.json", serialize_config(c));
        const auto r = run_cli("solve --config " + (out / "mismatch.json").string() + " --out " +
                               out.string());
        REQUIRE(r.exit_code == 1);
    }
}

TEST_CASE("cli: seed override controls the synthetic data") {
    const fs::path a = fresh_dir("seed_a"), b = fresh_dir("seed_b"), c = fresh_dir("seed_c");
    const std::string cfg = (kFixtures / "l1_n32.json").string();
    REQUIRE(run_cli("solve --config " + cfg + " --out " + a.string() + " --quiet").exit_code == 0);
    REQUIRE(run_cli("solve --config " + cfg + " --out " + b.string() + " --seed 7 --quiet")
                .exit_code == 0);  // same as the config seed
    REQUIRE(run_cli("solve --config " + cfg + " --out " + c.string() + " --seed 8 --quiet")
                .exit_code == 0);
    REQUIRE(slurp(a / "data.gf") == slurp(b / "data.gf"));
    REQUIRE(slurp(a / "data.gf") != slurp(c / "data.gf"));
}

TEST_CASE("cli: derivative verification filters and reports") {
    const fs::path out = fresh_dir("verify");
    const std::string cfg = (kFixtures / "l1_n32.json").string();

    auto r = run_cli("verify-derivatives --config " + cfg + " --out " + out.string() +
                     " --integrand abs --quiet");
    REQUIRE(r.exit_code == 0);
    std::string rep = slurp(out / "verify_report.json");
    REQUIRE(rep.find("\"total\": 19") != std::string::npos);
    REQUIRE(rep.find("IndicatorInterval") == std::string::npos);

    r = run_cli("verify-derivatives --config " + cfg + " --out " + out.string() + " --quiet");
    REQUIRE(r.exit_code == 0);
    rep = slurp(out / "verify_report.json");
    REQUIRE(rep.find("\"total\": 64") != std::string::npos);
    REQUIRE(rep.find("\"failures\": 0") != std::string::npos);

    REQUIRE(run_cli("verify-derivatives --config " + cfg + " --out " + out.string() +
                    " --integrand zzz")
                .exit_code == 64);
}

TEST_CASE("cli: certificates through the command line match the library verdicts") {
    SECTION("unsmoothed noisy instance is reported uncertified") {
        const fs::path out = fresh_dir("cert_g0");
        const std::string cfg = (kFixtures / "l1_gamma0_n16.json").string();
        REQUIRE(run_cli("solve --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        REQUIRE(run_cli("certify --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        const std::string cert = slurp(out / "certificate.json");
        REQUIRE(cert.find("\"verdict\": \"NotCertified\"") != std::string::npos);
        REQUIRE(cert.find("\"ell_bound\": \"inf\"") != std::string::npos);
    }

    SECTION("all-active file-data instance certifies through the projection route") {
        const fs::path out = fresh_dir("cert_proj");
        const std::string cfg = (kFixtures / "l1_allactive_n64.json").string();
        REQUIRE(run_cli("solve --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        REQUIRE(run_cli("certify --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        const std::string cert = slurp(out / "certificate.json");
        REQUIRE(cert.find("\"verdict\": \"MetricallyRegular\"") != std::string::npos);
        REQUIRE(cert.find("\"sc_holds\": true") != std::string::npos);
        REQUIRE(cert.find("\"b_bar\": 0.000000000000e+00") != std::string::npos);
        REQUIRE(json_number_after(cert, "sigma_min") > 1e-6);
    }

    SECTION("trivial forcing solves to the origin exactly") {
        const fs::path out = fresh_dir("cert_triv");
        const std::string cfg = (kFixtures / "trivial.json").string();
        REQUIRE(run_cli("solve --config " + cfg + " --out " + out.string() + " --quiet")
                    .exit_code == 0);
        for (const char* f : {"u.gf", "v.gf"}) {
            const GridFunction gf = read_gf01((out / f).string());
            for (std::size_t i = 0; i < gf.size(); ++i) REQUIRE(std::abs(gf[i]) <= 1e-8);
        }
    }
}

TEST_CASE("cli: table artifacts carry the documented columns") {
    const fs::path out = fresh_dir("tables");
    const std::string cfg = (kFixtures / "l1_n32.json").string();
    REQUIRE(run_cli("perturb --config " + cfg + " --out " + out.string() + " --quiet")
                .exit_code == 0);
    REQUIRE(run_cli("sweep-gamma --config " + cfg + " --out " + out.string() + " --quiet")
                .exit_code == 0);
    const std::string pcsv = slurp(out / "perturb.csv");
    REQUIRE(pcsv.rfind("dy_norm,ratio,converged,blow_up\n", 0) == 0);
    const std::string scsv = slurp(out / "sweep_gamma.csv");
    REQUIRE(scsv.rfind("gamma,distance,converged,ell_hat\n", 0) == 0);
    // Three magnitudes and three sweep weights: header plus three rows each.
    REQUIRE(std::count(pcsv.begin(), pcsv.end(), '\n') == 4);
    REQUIRE(std::count(scsv.begin(), scsv.end(), '\n') == 4);
}
