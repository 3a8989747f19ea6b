#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../coefficients.hpp"
#include "../errors.hpp"
#include "../grid.hpp"
#include "../random.hpp"
#include "../solver.hpp"

namespace halfheat::lab {

using json = nlohmann::json;

struct GridSpec {
    int d = 1;
    std::size_t n_t = 64;
    std::vector<std::size_t> n_x{64};
    double l_t = 4.0;
    std::vector<double> l_x{2.0};

    Grid make() const { return make_grid(d, n_t, n_x, l_t, l_x); }
    GridSpec refined() const {
        GridSpec r = *this;
        r.n_t *= 2;
        for (auto& n : r.n_x) n *= 2;
        return r;
    }
};

/// How the data bundle F = (h, g, f) is produced.
///   noise   band-limited noise in every slot (seeded per trial)
///   zero    F = 0
///   h_mode  h = cos(omega t), g = f = 0
///   expr    h, g_i, f from signal expressions
struct DataSpec {
    std::string kind = "noise";
    double band = 0.5;
    double omega = 2.0;
    std::string h = "0";
    std::vector<std::string> g;
    std::string f = "0";
};

struct ExperimentConfig {
    std::string experiment = "identities";
    std::uint64_t seed = 1;
    int trials = 1;
    GridSpec grid;
    std::vector<CoefficientSpec> coefficients{CoefficientSpec{}};
    std::vector<double> lambdas{1.0};
    std::vector<double> p_list{2.0};
    DataSpec data;
    SolverOptions solver;
    bool refine = false;
    std::vector<double> kappas{4.0, 8.0, 16.0};
    double radius = 0.25;
    std::vector<double> center;  // empty: origin
    int truncation = 8;
    int k_min = 2;
    int k_max = 6;
    std::string signal = "gauss(0, 1)";
    bool dump_fields = false;

    void validate() const;
};

inline std::string to_string(Preconditioner p) { return p == Preconditioner::none ? "none" : "constant_mean"; }

inline Preconditioner preconditioner_from(const std::string& s) {
    if (s == "none") return Preconditioner::none;
    if (s == "constant_mean") return Preconditioner::constant_mean;
    throw ConfigError("unknown preconditioner '" + s + "'");
}

inline const std::set<std::string>& experiment_kinds() {
    static const std::set<std::string> k{"identities", "l2", "lp-sweep", "tail-decay",
                                         "oscillation", "assumptions", "solve", "oracle"};
    return k;
}

inline void ExperimentConfig::validate() const {
    if (!experiment_kinds().count(experiment)) throw ConfigError("unknown experiment '" + experiment + "'");
    if (trials < 1) throw ConfigError("trials must be at least 1");
    (void)grid.make();
    if (coefficients.empty()) throw ConfigError("at least one coefficient spec is required");
    for (const auto& c : coefficients) (void)Ellipticity(c.delta);
    for (double p : p_list)
        if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError("p must lie in (1, inf)");
    for (double l : lambdas)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda must be finite and non-negative");
    if (lambdas.empty()) throw ConfigError("lambda list is empty");
    solver.validate();
    if (k_min < 0 || k_max < k_min) throw ConfigError("need 0 <= k_min <= k_max");
    if (!(radius > 0.0)) throw ConfigError("radius must be positive");
    if (!center.empty() && center.size() != static_cast<std::size_t>(grid.d + 1))
        throw ConfigError("center needs d + 1 entries");
    static const std::set<std::string> data_kinds{"noise", "zero", "h_mode", "expr"};
    if (!data_kinds.count(data.kind)) throw ConfigError("unknown data kind '" + data.kind + "'");
}

// ---- JSON mapping -------------------------------------------------------------------------

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

} // namespace detail

inline json to_json(const CoefficientSpec& c) {
    return {{"kind", c.kind}, {"delta", c.delta}, {"seed", c.seed}, {"n_jumps", c.n_jumps},
            {"epsilon", c.epsilon}, {"scale", c.scale}};
}

inline CoefficientSpec coefficient_spec_from(const json& j) {
    detail::reject_unknown(j, {"kind", "delta", "seed", "n_jumps", "epsilon", "scale"}, "coefficients");
    CoefficientSpec c;
    detail::read_opt(j, "kind", c.kind);
    detail::read_opt(j, "delta", c.delta);
    detail::read_opt(j, "seed", c.seed);
    detail::read_opt(j, "n_jumps", c.n_jumps);
    detail::read_opt(j, "epsilon", c.epsilon);
    detail::read_opt(j, "scale", c.scale);
    return c;
}

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["seed"] = c.seed;
    j["trials"] = c.trials;
    j["grid"] = {{"d", c.grid.d}, {"n_t", c.grid.n_t}, {"n_x", c.grid.n_x}, {"l_t", c.grid.l_t}, {"l_x", c.grid.l_x}};
    j["coefficients"] = json::array();
    for (const auto& s : c.coefficients) j["coefficients"].push_back(to_json(s));
    j["lambda"] = c.lambdas;
    j["p"] = c.p_list;
    j["data"] = {{"kind", c.data.kind}, {"band", c.data.band}, {"omega", c.data.omega},
                 {"h", c.data.h}, {"g", c.data.g}, {"f", c.data.f}};
    j["solver"] = {{"rtol", c.solver.rtol}, {"max_iterations", c.solver.max_iterations},
                   {"restart", c.solver.restart}, {"preconditioner", to_string(c.solver.preconditioner)},
                   {"kappa", c.solver.kappa}};
    j["refine"] = c.refine;
    j["kappas"] = c.kappas;
    j["radius"] = c.radius;
    j["center"] = c.center;
    j["truncation"] = c.truncation;
    j["k_min"] = c.k_min;
    j["k_max"] = c.k_max;
    j["signal"] = c.signal;
    j["dump_fields"] = c.dump_fields;
    return j;
}

/// Missing keys keep their defaults; unknown keys are errors.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig c = {}) {
    detail::reject_unknown(j, {"experiment", "seed", "trials", "grid", "coefficients", "lambda", "p", "data",
                               "solver", "refine", "kappas", "radius", "center", "truncation", "k_min", "k_max",
                               "signal", "dump_fields"},
                           "config");
    detail::read_opt(j, "experiment", c.experiment);
    detail::read_opt(j, "seed", c.seed);
    detail::read_opt(j, "trials", c.trials);
    if (j.contains("grid")) {
        const json& g = j["grid"];
        detail::reject_unknown(g, {"d", "n_t", "n_x", "l_t", "l_x"}, "grid");
        detail::read_opt(g, "d", c.grid.d);
        detail::read_opt(g, "n_t", c.grid.n_t);
        detail::read_opt(g, "n_x", c.grid.n_x);
        detail::read_opt(g, "l_t", c.grid.l_t);
        detail::read_opt(g, "l_x", c.grid.l_x);
    }
    if (j.contains("coefficients")) {
        const json& cs = j["coefficients"];
        c.coefficients.clear();
        if (cs.is_array())
            for (const auto& e : cs) c.coefficients.push_back(coefficient_spec_from(e));
        else
            c.coefficients.push_back(coefficient_spec_from(cs));
    }
    detail::read_opt(j, "lambda", c.lambdas);
    detail::read_opt(j, "p", c.p_list);
    if (j.contains("data")) {
        const json& d = j["data"];
        detail::reject_unknown(d, {"kind", "band", "omega", "h", "g", "f"}, "data");
        detail::read_opt(d, "kind", c.data.kind);
        detail::read_opt(d, "band", c.data.band);
        detail::read_opt(d, "omega", c.data.omega);
        detail::read_opt(d, "h", c.data.h);
        detail::read_opt(d, "g", c.data.g);
        detail::read_opt(d, "f", c.data.f);
    }
    if (j.contains("solver")) {
        const json& s = j["solver"];
        detail::reject_unknown(s, {"rtol", "max_iterations", "restart", "preconditioner", "kappa"}, "solver");
        detail::read_opt(s, "rtol", c.solver.rtol);
        detail::read_opt(s, "max_iterations", c.solver.max_iterations);
        detail::read_opt(s, "restart", c.solver.restart);
        detail::read_opt(s, "kappa", c.solver.kappa);
        std::string p = to_string(c.solver.preconditioner);
        detail::read_opt(s, "preconditioner", p);
        c.solver.preconditioner = preconditioner_from(p);
    }
    detail::read_opt(j, "refine", c.refine);
    detail::read_opt(j, "kappas", c.kappas);
    detail::read_opt(j, "radius", c.radius);
    detail::read_opt(j, "center", c.center);
    detail::read_opt(j, "truncation", c.truncation);
    detail::read_opt(j, "k_min", c.k_min);
    detail::read_opt(j, "k_max", c.k_max);
    detail::read_opt(j, "signal", c.signal);
    detail::read_opt(j, "dump_fields", c.dump_fields);
    return c;
}

/// Parses a config file (JSON, comments allowed). Throws ConfigError("config not found: ...").
inline ExperimentConfig load_config(const std::string& path, ExperimentConfig defaults = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, std::move(defaults));
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the canonical serialization (keys sorted, defaults filled in).
inline std::string config_hash(const ExperimentConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
    return buf;
}

/// Independent stream per (master seed, tag, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
    s = splitmix64(s);
    return splitmix64(s ^ (index * 0xbf58476d1ce4e5b9ULL));
}

} // namespace halfheat::lab
