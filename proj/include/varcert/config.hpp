#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "varcert/errors.hpp"
#include "varcert/synthetic.hpp"

namespace varcert {

// Run configuration: strict JSON schema shared by every CLI command.
// Unknown keys are rejected with their full dotted path; every field has a
// documented default, so a config file only states what differs. The
// serializer materializes all fields and round-trips exactly
// (parse -> serialize -> parse is the identity).

struct GridConfig {
    int dim = 1;  // 1 or 2
    int n = 32;   // nodes per axis
};

struct DataConfig {
    std::string source = "synthetic";  // "synthetic" | "file"
    std::string path;                  // .gf or .csv, used when source == "file"
    std::string u_true = "1";          // expression in x (and y in 2-d)
    std::string noise = "impulsive";   // "impulsive" | "uniform"
    double level = 0.0;                // noise amplitude
};

struct SolverConfig {
    double tol = 1e-8;
    int max_iter = 20000;
    std::string method = "auto";  // "auto" | "exact-dual" | "pdhg"
};

struct CertificateConfig {
    double tol_cert = 1e-6;
    bool with_tildelip = true;
    int sample_count = 24;                       // neighborhood pairs per radius
    std::vector<double> t_ladder{1e-3, 1e-2, 1e-1};
    bool curvature = false;  // use the curvature-corrected block for the G-modulus
};

struct PerturbConfig {
    std::vector<double> magnitudes{1e-2, 1e-3, 1e-4};
    std::string direction = "random";  // "random" | "node"
    int node = 0;                      // used when direction == "node"
    double sign = 1.0;                 // +1 or -1, orientation of the node impulse
};

struct SweepConfig {
    std::vector<double> gammas;  // must be nonempty to run sweep-gamma
};

struct RunConfig {
    std::string problem = "l1fit";  // "l1fit" | "linffit"
    GridConfig grid;
    double alpha = 1.0;
    double delta = 0.05;    // residual box half-width (linffit only)
    double gamma = 0.0;     // smoothing weight
    double epsilon = 1e-3;  // control admissibility floor
    std::string forcing = "1";  // forcing-term expression
    DataConfig data;
    SolverConfig solver;
    CertificateConfig certificate;
    int projection_blocks = 0;  // 0 = no projection certificate
    PerturbConfig perturb;
    SweepConfig sweep;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
};

namespace detail {

using njson = nlohmann::json;

inline std::string join_key(const std::string& path, const std::string& k) {
    return path.empty() ? k : path + "." + k;
}

inline void expect_keys(const njson& j, const std::string& path,
                        std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw config_error(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known) {
            const std::string full = join_key(path, it.key());
            throw config_error(full, "unknown config key '" + full + "'");
        }
    }
}

inline void get_double(const njson& j, const std::string& path, const char* k, double& out) {
    if (!j.contains(k)) return;
    const njson& v = j.at(k);
    if (!v.is_number()) throw config_error(join_key(path, k), "expected a number");
    out = v.get<double>();
}

inline void get_int(const njson& j, const std::string& path, const char* k, int& out) {
    if (!j.contains(k)) return;
    const njson& v = j.at(k);
    if (!v.is_number_integer()) throw config_error(join_key(path, k), "expected an integer");
    out = v.get<int>();
}

inline void get_uint64(const njson& j, const std::string& path, const char* k,
                       std::uint64_t& out) {
    if (!j.contains(k)) return;
    const njson& v = j.at(k);
    if (!v.is_number_integer())
        throw config_error(join_key(path, k), "expected a nonnegative integer");
    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        throw config_error(join_key(path, k), "expected a nonnegative integer");
    out = v.get<std::uint64_t>();
}

inline void get_bool(const njson& j, const std::string& path, const char* k, bool& out) {
    if (!j.contains(k)) return;
    const njson& v = j.at(k);
    if (!v.is_boolean()) throw config_error(join_key(path, k), "expected true or false");
    out = v.get<bool>();
}

inline void get_string(const njson& j, const std::string& path, const char* k,
                       std::string& out) {
    if (!j.contains(k)) return;
    const njson& v = j.at(k);
    if (!v.is_string()) throw config_error(join_key(path, k), "expected a string");
    out = v.get<std::string>();
}

inline void get_double_list(const njson& j, const std::string& path, const char* k,
                            std::vector<double>& out) {
    if (!j.contains(k)) return;
    const njson& v = j.at(k);
    if (!v.is_array()) throw config_error(join_key(path, k), "expected an array of numbers");
    out.clear();
    for (const njson& e : v) {
        if (!e.is_number()) throw config_error(join_key(path, k), "expected an array of numbers");
        out.push_back(e.get<double>());
    }
}

inline void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw config_error(key, what);
}

inline bool one_of(const std::string& v, std::initializer_list<const char*> options) {
    for (const char* o : options)
        if (v == o) return true;
    return false;
}

}  // namespace detail

/// Range and consistency checks beyond plain types; every violation names
/// the offending key. Expressions are parsed here so a typo fails at load
/// time, not in the middle of a solve.
inline void validate_config(const RunConfig& c) {
    using detail::one_of;
    using detail::require;
    require(one_of(c.problem, {"l1fit", "linffit"}), "problem", "must be 'l1fit' or 'linffit'");
    require(c.grid.dim == 1 || c.grid.dim == 2, "grid.dim", "must be 1 or 2");
    require(c.grid.n >= 2 && c.grid.n <= 4096, "grid.n", "must be between 2 and 4096");
    require(c.alpha > 0, "alpha", "must be positive");
    require(c.delta > 0, "delta", "must be positive");
    require(c.gamma >= 0, "gamma", "must be nonnegative");
    require(c.epsilon > 0, "epsilon", "must be positive");
    require(one_of(c.data.source, {"synthetic", "file"}), "data.source",
            "must be 'synthetic' or 'file'");
    require(one_of(c.data.noise, {"impulsive", "uniform"}), "data.noise",
            "must be 'impulsive' or 'uniform'");
    require(c.data.level >= 0, "data.level", "must be nonnegative");
    if (c.data.source == "file")
        require(!c.data.path.empty(), "data.path", "file data source needs a path");
    require(c.solver.tol > 0, "solver.tol", "must be positive");
    require(c.solver.max_iter >= 1, "solver.max_iter", "must be at least 1");
    require(one_of(c.solver.method, {"auto", "exact-dual", "pdhg"}), "solver.method",
            "must be 'auto', 'exact-dual', or 'pdhg'");
    require(c.certificate.tol_cert > 0, "certificate.tol_cert", "must be positive");
    require(c.certificate.sample_count >= 1, "certificate.sample_count", "must be at least 1");
    require(!c.certificate.t_ladder.empty(), "certificate.t_ladder", "must be nonempty");
    double prev_t = 0.0;
    for (double t : c.certificate.t_ladder) {
        require(t > prev_t, "certificate.t_ladder", "must be positive and strictly increasing");
        prev_t = t;
    }
    require(c.projection_blocks >= 0, "projection_blocks", "must be nonnegative");
    require(!c.perturb.magnitudes.empty(), "perturb.magnitudes", "must be nonempty");
    for (double m : c.perturb.magnitudes)
        require(m > 0, "perturb.magnitudes", "entries must be positive");
    require(one_of(c.perturb.direction, {"random", "node"}), "perturb.direction",
            "must be 'random' or 'node'");
    require(c.perturb.node >= 0, "perturb.node", "must be nonnegative");
    require(c.perturb.sign == 1.0 || c.perturb.sign == -1.0, "perturb.sign", "must be 1 or -1");
    for (double gsw : c.sweep.gammas)
        require(gsw >= 0, "sweep.gammas", "entries must be nonnegative");
    require(!c.out_dir.empty(), "out_dir", "must be nonempty");

    // Expressions must parse, and may only use y on a 2-d grid.
    const Expression fe = Expression::parse(c.forcing, "forcing");
    require(c.grid.dim == 2 || !fe.uses_y(), "forcing", "uses variable y on a 1-d grid");
    if (c.data.source == "synthetic") {
        const Expression ue = Expression::parse(c.data.u_true, "data.u_true");
        require(c.grid.dim == 2 || !ue.uses_y(), "data.u_true", "uses variable y on a 1-d grid");
    }
}

/// Parse a config from JSON text. Missing keys fall back to defaults;
/// unknown keys, type mismatches, and out-of-range values all throw
/// config_error carrying the dotted key path.
inline RunConfig parse_config(const std::string& text) {
    using detail::njson;
    njson j;
    try {
        j = njson::parse(text);
    } catch (const njson::parse_error& e) {
        throw config_error("", std::string("config is not valid JSON: ") + e.what());
    }
    detail::expect_keys(j, "",
                        {"problem", "grid", "alpha", "delta", "gamma", "epsilon", "forcing",
                         "data", "solver", "certificate", "projection_blocks", "perturb", "sweep",
                         "out_dir", "seed"});

    RunConfig c;
    detail::get_string(j, "", "problem", c.problem);
    if (j.contains("grid")) {
        const njson& g = j.at("grid");
        detail::expect_keys(g, "grid", {"dim", "n"});
        detail::get_int(g, "grid", "dim", c.grid.dim);
        detail::get_int(g, "grid", "n", c.grid.n);
    }
    detail::get_double(j, "", "alpha", c.alpha);
    detail::get_double(j, "", "delta", c.delta);
    detail::get_double(j, "", "gamma", c.gamma);
    detail::get_double(j, "", "epsilon", c.epsilon);
    detail::get_string(j, "", "forcing", c.forcing);
    if (j.contains("data")) {
        const njson& d = j.at("data");
        detail::expect_keys(d, "data", {"source", "path", "u_true", "noise", "level"});
        detail::get_string(d, "data", "source", c.data.source);
        detail::get_string(d, "data", "path", c.data.path);
        detail::get_string(d, "data", "u_true", c.data.u_true);
        detail::get_string(d, "data", "noise", c.data.noise);
        detail::get_double(d, "data", "level", c.data.level);
    }
    if (j.contains("solver")) {
        const njson& s = j.at("solver");
        detail::expect_keys(s, "solver", {"tol", "max_iter", "method"});
        detail::get_double(s, "solver", "tol", c.solver.tol);
        detail::get_int(s, "solver", "max_iter", c.solver.max_iter);
        detail::get_string(s, "solver", "method", c.solver.method);
    }
    if (j.contains("certificate")) {
        const njson& ct = j.at("certificate");
        detail::expect_keys(ct, "certificate",
                            {"tol_cert", "with_tildelip", "sample_count", "t_ladder",
                             "curvature"});
        detail::get_double(ct, "certificate", "tol_cert", c.certificate.tol_cert);
        detail::get_bool(ct, "certificate", "with_tildelip", c.certificate.with_tildelip);
        detail::get_int(ct, "certificate", "sample_count", c.certificate.sample_count);
        detail::get_double_list(ct, "certificate", "t_ladder", c.certificate.t_ladder);
        detail::get_bool(ct, "certificate", "curvature", c.certificate.curvature);
    }
    detail::get_int(j, "", "projection_blocks", c.projection_blocks);
    if (j.contains("perturb")) {
        const njson& pb = j.at("perturb");
        detail::expect_keys(pb, "perturb", {"magnitudes", "direction", "node", "sign"});
        detail::get_double_list(pb, "perturb", "magnitudes", c.perturb.magnitudes);
        detail::get_string(pb, "perturb", "direction", c.perturb.direction);
        detail::get_int(pb, "perturb", "node", c.perturb.node);
        detail::get_double(pb, "perturb", "sign", c.perturb.sign);
    }
    if (j.contains("sweep")) {
        const njson& sw = j.at("sweep");
        detail::expect_keys(sw, "sweep", {"gammas"});
        detail::get_double_list(sw, "sweep", "gammas", c.sweep.gammas);
    }
    detail::get_string(j, "", "out_dir", c.out_dir);
    detail::get_uint64(j, "", "seed", c.seed);

    validate_config(c);
    return c;
}

/// Serialize with every field materialized, keys sorted, shortest
/// round-trip number formatting: parse(serialize(c)) reproduces c exactly.
inline std::string serialize_config(const RunConfig& c) {
    using detail::njson;
    njson j;
    j["problem"] = c.problem;
    j["grid"]["dim"] = c.grid.dim;
    j["grid"]["n"] = c.grid.n;
    j["alpha"] = c.alpha;
    j["delta"] = c.delta;
    j["gamma"] = c.gamma;
    j["epsilon"] = c.epsilon;
    j["forcing"] = c.forcing;
    j["data"]["source"] = c.data.source;
    j["data"]["path"] = c.data.path;
    j["data"]["u_true"] = c.data.u_true;
    j["data"]["noise"] = c.data.noise;
    j["data"]["level"] = c.data.level;
    j["solver"]["tol"] = c.solver.tol;
    j["solver"]["max_iter"] = c.solver.max_iter;
    j["solver"]["method"] = c.solver.method;
    j["certificate"]["tol_cert"] = c.certificate.tol_cert;
    j["certificate"]["with_tildelip"] = c.certificate.with_tildelip;
    j["certificate"]["sample_count"] = c.certificate.sample_count;
    j["certificate"]["t_ladder"] = c.certificate.t_ladder;
    j["certificate"]["curvature"] = c.certificate.curvature;
    j["projection_blocks"] = c.projection_blocks;
    j["perturb"]["magnitudes"] = c.perturb.magnitudes;
    j["perturb"]["direction"] = c.perturb.direction;
    j["perturb"]["node"] = c.perturb.node;
    j["perturb"]["sign"] = c.perturb.sign;
    j["sweep"]["gammas"] = c.sweep.gammas;
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
    return j.dump(2);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config(buf.str());
}

}  // namespace varcert
