#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "../halfheat.hpp"
#include "config.hpp"
#include "report.hpp"

namespace halfheat::lab {

// ---- shared helpers -----------------------------------------------------------------------

inline double rel_dev(const Field& a, const Field& b) { return relative_difference(a, b); }

inline double rel_dev(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline json coefficient_sidecar(const Coefficients& c) {
    json j = to_json(c.spec());
    j["structure"] = to_string(c.structure());
    j["min_probe_ellipticity"] = c.dim() > 0 ? min_probe_ellipticity(c) : 0.0;
    j["max_abs_entry"] = max_abs_entry(c);
    const std::string v = validate(c);
    j["valid"] = v.empty();
    if (!v.empty()) j["validation"] = v;
    return j;
}

/// Data bundle for one trial. Noise slots use independent streams derived from `seed`.
inline DataBundle make_data(const DataSpec& d, const Grid& g, double lambda, std::uint64_t seed) {
    DataBundle F = DataBundle::zero(g, lambda);
    if (d.kind == "zero") return F;
    if (d.kind == "noise") {
        F.h = band_limited_noise(g, derive_seed(seed, 1, 0), d.band);
        std::vector<Field> gs;
        for (int i = 0; i < g.dim(); ++i)
            gs.push_back(band_limited_noise(g, derive_seed(seed, 2, static_cast<std::uint64_t>(i)), d.band));
        F.g = VectorField(std::move(gs));
        if (lambda > 0.0) F.f = band_limited_noise(g, derive_seed(seed, 3, 0), d.band);
        return F;
    }
    if (d.kind == "h_mode") {
        const double k = d.omega * g.lt() / (2.0 * std::numbers::pi);
        if (std::abs(k - std::round(k)) > 1e-9 || std::round(k) < 1.0 ||
            std::round(k) >= static_cast<double>(g.nt() / 2))
            throw ConfigError("omega must be 2*pi*k/l_t for a resolved integer k");
        F.h = field_from_expression(g, "cos(" + fmt(d.omega) + "*t)");
        return F;
    }
    // expr
    F.h = field_from_expression(g, d.h);
    if (!d.g.empty()) {
        if (d.g.size() != static_cast<std::size_t>(g.dim())) throw ConfigError("data.g needs d expressions");
        std::vector<Field> gs;
        for (const auto& e : d.g) gs.push_back(field_from_expression(g, e));
        F.g = VectorField(std::move(gs));
    }
    F.f = field_from_expression(g, d.f);
    F.validate();
    return F;
}

/// Oracle for coefficients tagged constant, preconditioned GMRES otherwise.
inline SolveResult solve_any(const Coefficients& a, double lambda, const DataBundle& F, const SolverOptions& opt) {
    if (a.structure() == CoefficientStructure::constant) return solve_oracle(a, lambda, F);
    return solve(a, lambda, F, opt);
}

inline std::uint64_t coefficient_seed(const CoefficientSpec& s, std::uint64_t master, std::size_t trial) {
    return s.seed != 0 ? s.seed + trial : derive_seed(master, 7, trial);
}

inline std::vector<double> center_or_origin(const ExperimentConfig& cfg, const Grid& g) {
    if (!cfg.center.empty()) return cfg.center;
    return std::vector<double>(static_cast<std::size_t>(g.dim() + 1), 0.0);
}

// ---- identity suite ----------------------------------------------------------------------

struct Worst {
    double value = 0.0;
    std::uint64_t seed = 0;
    void update(double v, std::uint64_t s) {
        if (v > value || std::isnan(v)) {
            value = v;
            seed = s;
        }
    }
};

namespace detail {
inline std::vector<double> quadrature_errors(const Grid& g, const ExperimentConfig& cfg, Report& rep, bool rows = false) {
    const Field u = field_from_expression(g, cfg.signal);
    const Field ref = half_derivative(u);
    std::vector<double> errs;
    for (int T : {std::max(1, cfg.truncation / 4), std::max(1, cfg.truncation / 2), cfg.truncation}) {
        errs.push_back(rel_dev(half_derivative_quadrature(u, T), ref));
        if (rows) rep.row(T, errs.back());
    }
    rep.check("quadrature_accuracy", errs[2] <= 1e-3, "error " + fmt(errs[2]) + " at truncation " + fmt(cfg.truncation));
    rep.check("quadrature_monotone", errs[1] <= 1.1 * errs[0] && errs[2] <= 1.1 * errs[1], "error grew with truncation");
    return errs;
}
} // namespace detail

/// Time-calculus and weak-form identities on `trials` random band-limited fields, per coefficient
/// spec for the solver invariants. Worst deviations are reported with their seeds.
inline Report run_identity_suite(const ExperimentConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    const Grid g = cfg.grid.make();
    const bool zero = cfg.data.kind == "zero";
    Report rep(cfg, {"trial", "identity", "coefficients", "deviation", "tolerance"});
    const double lambda = cfg.lambdas.front() > 0.0 ? cfg.lambdas.front() : 1.0;

    struct Tol {
        const char* name;
        double tol;
    };
    const std::vector<Tol> time_ids{{"hilbert_involution", 1e-12}, {"hilbert_isometry", 1e-12},
                                    {"hilbert_contraction", 1e-12}, {"half_derivative_adjoint", 1e-10},
                                    {"half_derivative_squared", 1e-10}, {"spatial_commutation", 1e-12},
                                    {"hilbert_skew", 1e-12}, {"half_derivative_symmetric", 1e-12}};
    const std::vector<Tol> solver_ids{{"weak_equals_strong", 1e-11}, {"coercivity_margin", 1e-10},
                                      {"boundedness_excess", 1e-12}, {"duality_skew", 1e-12},
                                      {"reduction_identity", 1e-11}};
    std::map<std::string, Worst> worst;

    const std::size_t T = static_cast<std::size_t>(cfg.trials);
    // Time identities.
    std::vector<std::vector<double>> tdev(T);
    std::vector<std::uint64_t> seeds(T);
    parallel_for(T, [&](std::size_t t) {
        const std::uint64_t s = derive_seed(cfg.seed, 10, t);
        seeds[t] = s;
        const Field raw = zero ? Field(g) : band_limited_noise(g, s, 1.0);
        const Field phi = zero ? Field(g) : band_limited_noise(g, derive_seed(s, 1, 0), 1.0);
        const Field u = remove_time_mean_and_nyquist(raw);
        const double nr = lp_norm(raw, 2.0), np = lp_norm(phi, 2.0);
        std::vector<double> d;
        d.push_back(rel_dev(hilbert(hilbert(u)), -1.0 * u));
        d.push_back(rel_dev(lp_norm(hilbert(u), 2.0), lp_norm(u, 2.0)));
        d.push_back(nr == 0.0 ? 0.0 : std::max(0.0, lp_norm(hilbert(raw), 2.0) / nr - 1.0));
        d.push_back(rel_dev(inner(hilbert(half_derivative(u)), half_derivative(phi)), inner(u, time_derivative(phi))));
        d.push_back(rel_dev(half_derivative(half_derivative(raw)), hilbert(time_derivative(raw))));
        double comm = 0.0;
        const VectorField a = gradient_plus(half_derivative(raw));
        const VectorField b = gradient_plus(raw);
        for (std::size_t i = 0; i < a.dim(); ++i) comm = std::max(comm, rel_dev(a[i], half_derivative(b[i])));
        d.push_back(comm);
        const double scale = nr * np;
        d.push_back(scale == 0.0 ? 0.0 : std::abs(inner(hilbert(raw), phi) + inner(raw, hilbert(phi))) / scale);
        d.push_back(scale == 0.0 ? 0.0 : std::abs(inner(raw, half_derivative(phi)) - inner(half_derivative(raw), phi)) / scale);
        tdev[t] = std::move(d);
    });
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < time_ids.size(); ++k) {
            worst[time_ids[k].name].update(tdev[t][k], seeds[t]);
            rep.row(t, time_ids[k].name, "-", tdev[t][k], time_ids[k].tol);
        }

    // Weak-form invariants per coefficient spec.
    for (std::size_t ci = 0; ci < cfg.coefficients.size(); ++ci) {
        const CoefficientSpec& base = cfg.coefficients[ci];
        std::vector<std::vector<double>> sdev(T);
        parallel_for(T, [&](std::size_t t) {
            CoefficientSpec spec = base;
            spec.seed = coefficient_seed(base, cfg.seed, t);
            const Coefficients a = generate_coefficients(spec, g);
            const double delta = a.delta();
            const double kappa = cfg.solver.kappa_for(delta);
            const std::uint64_t s = derive_seed(cfg.seed, 20 + ci, t);
            const Field u = zero ? Field(g) : remove_time_mean_and_nyquist(band_limited_noise(g, s, 1.0));
            const Field v = zero ? Field(g) : remove_time_mean_and_nyquist(band_limited_noise(g, derive_seed(s, 1, 0), 1.0));
            auto bundle_sq = [&](const Field& w) {
                double q = 0.0;
                for (const auto& c : SolutionBundle::from(w, lambda).components()) q += inner(c, c);
                return q;
            };
            const double Uu = bundle_sq(u), Uv = bundle_sq(v);
            std::vector<double> d;
            d.push_back(rel_dev(weak_pairing(a, lambda, u, v), inner(apply_operator(a, lambda, u), v)));
            // Margin below the proven constant, normalized; <= 0 means the bound holds.
            const double B = bilinear_B_kappa(a, lambda, kappa, u, u);
            d.push_back(Uu == 0.0 ? 0.0 : std::max(0.0, kappa - B / Uu));
            const double N = (1.0 + kappa) * (1.0 + 1.0 / delta);
            const double Buv = std::abs(bilinear_B_kappa(a, lambda, kappa, u, v));
            d.push_back(Uu * Uv == 0.0 ? 0.0 : std::max(0.0, Buv / (N * std::sqrt(Uu * Uv)) - 1.0));
            const Field hu = half_derivative(u), hv = half_derivative(v);
            const double sc = lp_norm(hu, 2.0) * lp_norm(hv, 2.0);
            d.push_back(sc == 0.0 ? 0.0 : std::abs(inner(hilbert(hv), hu) + inner(hilbert(hu), hv)) / sc);
            // Reduction identity on a solved instance: the two residuals agree.
            DataSpec ds;
            ds.kind = zero ? "zero" : "noise";
            const DataBundle F = make_data(ds, g, lambda, derive_seed(s, 2, 0));
            const Field w = solve_any(a, lambda, F, cfg.solver).u.u;
            DataBundle G = F;
            const VectorField dw = gradient_plus(w);
            for (int i = 0; i < g.dim(); ++i)
                for (int j = 0; j < g.dim(); ++j) {
                    Field c = a.a(i, j);
                    if (i == j) c -= Field::constant(g, 1.0);
                    G.g[static_cast<std::size_t>(i)] += multiply(c, dw[static_cast<std::size_t>(j)]);
                }
            const Field ra = apply_operator(a, lambda, w) - apply_rhs(F);
            const Field rI = apply_operator(Coefficients::identity(g), lambda, w) - apply_rhs(G);
            const double bn = lp_norm(apply_rhs(F), 2.0);
            d.push_back(bn == 0.0 ? lp_norm(rI - ra, 2.0) : lp_norm(rI - ra, 2.0) / bn);
            sdev[t] = std::move(d);
        });
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < solver_ids.size(); ++k) {
                const std::string key = std::string(solver_ids[k].name) + "/" + base.kind + "/delta=" + fmt(base.delta);
                worst[key].update(sdev[t][k], derive_seed(cfg.seed, 20 + ci, t));
                rep.row(t, solver_ids[k].name, base.kind + ":" + fmt(base.delta), sdev[t][k], solver_ids[k].tol);
            }
    }

    json dev = json::object();
    for (const auto& [key, w] : worst) {
        double tol = 0.0;
        for (const auto& ids : {time_ids, solver_ids})
            for (const auto& id : ids)
                if (key.rfind(id.name, 0) == 0) tol = id.tol;
        dev[key] = {{"worst", jnum(w.value)}, {"seed", w.seed}, {"tolerance", tol}};
        rep.check(key, w.value <= tol, "worst " + fmt(w.value) + " > " + fmt(tol) + " at seed " + std::to_string(w.seed));
    }
    rep.summary()["deviations"] = dev;
    rep.summary()["trials"] = cfg.trials;
    rep.summary()["grid"] = g.describe();

    // Direct quadrature of the half derivative against the multiplier, on the configured signal.
    const auto errs = detail::quadrature_errors(g, cfg, rep);
    rep.summary()["quadrature"] = {{"signal", cfg.signal}, {"errors", errs}};
    rep.timings()["total_seconds"] = sw.seconds();
    return rep;
}

/// Quadrature cross-check: relative error of the direct half-derivative sum against the
/// spectral multiplier for truncations T/4, T/2, T.
inline Report run_quadrature_check(const ExperimentConfig& cfg) {
    cfg.validate();
    Report rep(cfg, {"truncation", "relative_error"});
    rep.summary()["errors"] = detail::quadrature_errors(cfg.grid.make(), cfg, rep, true);
    return rep;
}

// ---- L2 trials ---------------------------------------------------------------------------

struct TrialResult {
    double U = 0.0, F = 0.0, ratio = 0.0, bound = NAN, expected = NAN, residual = 0.0;
    std::size_t iterations = 0;
    bool converged = true, trivial = false;
    std::vector<double> Up, Fp;
    std::uint64_t seed = 0;
    double seconds = 0.0;
    Field u;
};

inline TrialResult run_trial(const ExperimentConfig& cfg, const Grid& g, const CoefficientSpec& base, double lambda,
                             std::size_t trial, std::uint64_t stream, const std::vector<double>& ps) {
    Stopwatch sw;
    TrialResult r;
    CoefficientSpec spec = base;
    spec.seed = coefficient_seed(base, cfg.seed, trial);
    const Coefficients a = generate_coefficients(spec, g);
    r.seed = derive_seed(cfg.seed, stream, trial);
    const DataBundle F = make_data(cfg.data, g, lambda, r.seed);
    const SolveResult s = solve_any(a, lambda, F, cfg.solver);
    r.iterations = s.iterations;
    r.residual = s.final_relative_residual;
    r.converged = s.converged;
    const auto nb = compute_bundles(s.u.u, lambda, F, ps);
    r.Up = nb.U_norm;
    r.Fp = nb.F_norm;
    if (a.structure() == CoefficientStructure::constant) r.bound = multiplier_bound(a.mean_matrix(), lambda, g);
    if (cfg.data.kind == "h_mode") {
        const double w = cfg.data.omega;
        r.expected = std::sqrt(w * (w + lambda) / (w * w + lambda * lambda));
    }
    r.u = s.u.u;
    r.seconds = sw.seconds();
    return r;
}

/// ||U||_2 / ||F||_2 per (coefficient spec, lambda, trial).
inline Report run_l2_trials(const ExperimentConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    const Grid g = cfg.grid.make();
    for (double l : cfg.lambdas)
        if (!(l > 0.0)) throw ConfigError("l2 trials need lambda > 0");
    Report rep(cfg, {"kind", "delta", "lambda", "trial", "U_norm", "F_norm", "ratio", "multiplier_bound",
                     "iterations", "residual", "trivial"});
    json agg = json::array();
    json times = json::array();
    const std::size_t T = static_cast<std::size_t>(cfg.trials);
    for (std::size_t ci = 0; ci < cfg.coefficients.size(); ++ci) {
        const auto& spec = cfg.coefficients[ci];
        rep.add_coefficients(coefficient_sidecar(generate_coefficients(spec, g)));
        for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
            const double lambda = cfg.lambdas[li];
            std::vector<TrialResult> res(T);
            parallel_for(T, [&](std::size_t t) {
                res[t] = run_trial(cfg, g, spec, lambda, t, 100 + ci * 1000 + li, {2.0});
            });
            std::vector<double> ratios;
            double C = 0.0, worst_excess = -INFINITY, worst_mode = 0.0;
            bool all_conv = true;
            for (std::size_t t = 0; t < T; ++t) {
                auto& r = res[t];
                r.trivial = r.Fp[0] == 0.0;
                r.ratio = r.trivial ? 0.0 : r.Up[0] / r.Fp[0];
                if (!r.trivial) ratios.push_back(r.ratio);
                all_conv = all_conv && r.converged;
                if (!std::isnan(r.bound)) {
                    C = std::max(C, r.bound);
                    if (!r.trivial) worst_excess = std::max(worst_excess, r.ratio - r.bound);
                }
                if (!std::isnan(r.expected) && !r.trivial) worst_mode = std::max(worst_mode, rel_dev(r.ratio, r.expected));
                rep.row(spec.kind, spec.delta, lambda, t, r.Up[0], r.Fp[0], r.ratio, r.bound, r.iterations, r.residual,
                        r.trivial);
                if (cfg.dump_fields && t == 0) rep.dump("u_" + spec.kind + "_lambda" + fmt(lambda), r.u);
                times.push_back({{"kind", spec.kind}, {"lambda", lambda}, {"trial", t}, {"seconds", r.seconds}});
            }
            std::vector<double> sorted = ratios;
            std::sort(sorted.begin(), sorted.end());
            const double mx = sorted.empty() ? 0.0 : sorted.back();
            const double med = sorted.empty() ? 0.0
                                              : (sorted.size() % 2 ? sorted[sorted.size() / 2]
                                                                   : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]));
            json a = {{"kind", spec.kind}, {"delta", spec.delta}, {"lambda", lambda}, {"max_ratio", mx},
                      {"median_ratio", med}, {"nontrivial_trials", ratios.size()}};
            const std::string tag = spec.kind + "/lambda=" + fmt(lambda);
            rep.check("converged/" + tag, all_conv, "solver failed to converge");
            for (double x : ratios)
                if (!std::isfinite(x)) rep.check("finite/" + tag, false, "non-finite ratio");
            if (C > 0.0) {
                a["multiplier_bound"] = C;
                rep.check("within_multiplier_bound/" + tag, ratios.empty() || worst_excess <= 1e-8,
                          "ratio exceeds C by " + fmt(worst_excess));
                if (spec.kind == "identity" && lambda >= 1.0)
                    rep.check("bound_at_most_3/" + tag, C <= 3.0, "C = " + fmt(C));
            }
            if (cfg.data.kind == "h_mode") {
                a["mode_ratio_deviation"] = worst_mode;
                rep.check("mode_algebra/" + tag, worst_mode <= 1e-10, "deviation " + fmt(worst_mode));
            }
            agg.push_back(a);
        }
    }
    rep.summary()["aggregates"] = agg;
    rep.timings()["trials"] = times;
    rep.timings()["total_seconds"] = sw.seconds();
    return rep;
}

// ---- Lp sweep ----------------------------------------------------------------------------

/// Smallest swept lambda after which the max ratio changes by at most 10% per doubling of lambda.
inline double estimate_lambda0(const std::vector<double>& lambdas, const std::vector<double>& max_ratio) {
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        bool flat = true;
        for (std::size_t j = i; j + 1 < lambdas.size(); ++j) {
            const double doublings = std::log2(lambdas[j + 1] / lambdas[j]);
            const double change = std::abs(std::log(max_ratio[j + 1] / max_ratio[j]));
            if (doublings <= 0.0 || change > doublings * std::log(1.1)) flat = false;
        }
        if (flat && i + 1 < lambdas.size()) return lambdas[i];
    }
    return NAN;
}

inline Report run_lp_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    for (double l : cfg.lambdas)
        if (!(l > 0.0)) throw ConfigError("lp sweep needs lambda > 0");
    for (const auto& s : cfg.coefficients)
        if (s.kind != "time_piecewise" && s.kind != "x1_piecewise" && s.kind != "checkerboard")
            throw ConfigError("lp sweep coefficient kinds are time_piecewise, x1_piecewise, checkerboard");
    Report rep(cfg, {"level", "kind", "delta", "epsilon", "lambda", "trial", "p", "U_norm", "F_norm", "ratio",
                     "iterations", "residual"});
    std::vector<GridSpec> levels{cfg.grid};
    if (cfg.refine) levels.push_back(cfg.grid.refined());
    const std::size_t T = static_cast<std::size_t>(cfg.trials);
    const std::size_t P = cfg.p_list.size();
    // max_ratio[level][coef][lambda][p]
    std::vector<std::vector<std::vector<std::vector<double>>>> mx(
        levels.size(), std::vector<std::vector<std::vector<double>>>(
                           cfg.coefficients.size(), std::vector<std::vector<double>>(cfg.lambdas.size(), std::vector<double>(P, 0.0))));
    double worst_skew = 0.0;
    json times = json::array();
    for (std::size_t lv = 0; lv < levels.size(); ++lv) {
        const Grid g = levels[lv].make();
        for (std::size_t ci = 0; ci < cfg.coefficients.size(); ++ci) {
            const auto& spec = cfg.coefficients[ci];
            if (lv == 0) rep.add_coefficients(coefficient_sidecar(generate_coefficients(spec, g)));
            for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
                const double lambda = cfg.lambdas[li];
                std::vector<TrialResult> res(T);
                Stopwatch tw;
                // The data stream ignores the level so refined runs see the same continuum data.
                parallel_for(T, [&](std::size_t t) {
                    res[t] = run_trial(cfg, g, spec, lambda, t, 100 + ci * 1000 + li, cfg.p_list);
                });
                times.push_back({{"level", lv}, {"kind", spec.kind}, {"lambda", lambda}, {"seconds", tw.seconds()}});
                for (std::size_t t = 0; t < T; ++t) {
                    const auto& r = res[t];
                    const std::string tag = spec.kind + "/lambda=" + fmt(lambda) + "/level=" + fmt(lv);
                    if (!r.converged) rep.check("converged/" + tag, false, "residual " + fmt(r.residual));
                    for (std::size_t pi = 0; pi < P; ++pi) {
                        const double ratio = r.Fp[pi] == 0.0 ? 0.0 : r.Up[pi] / r.Fp[pi];
                        if (!std::isfinite(ratio)) rep.check("finite/" + tag, false, "non-finite ratio");
                        mx[lv][ci][li][pi] = std::max(mx[lv][ci][li][pi], ratio);
                        rep.row(lv, spec.kind, spec.delta, spec.epsilon, lambda, t, cfg.p_list[pi], r.Up[pi], r.Fp[pi],
                                ratio, r.iterations, r.residual);
                    }
                    // Duality spot check on consecutive solved pairs.
                    if (t > 0) {
                        const Field a = half_derivative(r.u), b = half_derivative(res[t - 1].u);
                        const double sc = lp_norm(a, 2.0) * lp_norm(b, 2.0);
                        if (sc > 0.0)
                            worst_skew = std::max(worst_skew, std::abs(inner(hilbert(a), b) + inner(hilbert(b), a)) / sc);
                    }
                }
            }
        }
    }
    json tables = json::array();
    double worst_factor = 0.0;
    std::map<double, double> cb_factor;  // checkerboard epsilon -> worst stability factor
    for (std::size_t ci = 0; ci < cfg.coefficients.size(); ++ci)
        for (std::size_t pi = 0; pi < P; ++pi) {
            std::vector<double> base(cfg.lambdas.size());
            for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) base[li] = mx[0][ci][li][pi];
            json t = {{"kind", cfg.coefficients[ci].kind}, {"delta", cfg.coefficients[ci].delta}, {"p", cfg.p_list[pi]},
                      {"lambda", cfg.lambdas}, {"max_ratio", base}};
            const double l0 = estimate_lambda0(cfg.lambdas, base);
            t["lambda0_estimate"] = std::isnan(l0) ? json(nullptr) : json(l0);
            if (levels.size() > 1) {
                double num = 0.0, den = 0.0;
                std::vector<double> fine(cfg.lambdas.size());
                for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
                    fine[li] = mx[1][ci][li][pi];
                    num = std::max(num, fine[li]);
                    den = std::max(den, base[li]);
                }
                const double factor = den == 0.0 ? 1.0 : num / den;
                const double sym = std::max(factor, factor > 0.0 ? 1.0 / factor : 0.0);
                t["max_ratio_refined"] = fine;
                t["stability_factor"] = factor;
                // Checkerboards probe the smallness threshold, so instability there is a finding.
                if (cfg.coefficients[ci].kind == "checkerboard")
                    cb_factor[cfg.coefficients[ci].epsilon] = std::max(cb_factor[cfg.coefficients[ci].epsilon], sym);
                else
                    worst_factor = std::max(worst_factor, sym);
            }
            tables.push_back(t);
        }
    rep.summary()["tables"] = tables;
    rep.summary()["duality_skew"] = worst_skew;
    rep.check("duality_skew", worst_skew <= 1e-12, "skewness " + fmt(worst_skew));
    if (levels.size() > 1) {
        rep.summary()["stability_factor"] = worst_factor;
        rep.check("refinement_stability", worst_factor <= 1.5, "factor " + fmt(worst_factor));
        if (!cb_factor.empty()) {
            json stable = nullptr;
            for (const auto& [eps, f] : cb_factor)
                if (f <= 1.5) stable = eps;
                else break;
            rep.summary()["largest_stable_checkerboard_epsilon"] = stable;
        }
    }
    rep.timings()["blocks"] = times;
    rep.timings()["total_seconds"] = sw.seconds();
    return rep;
}

// ---- tail decay --------------------------------------------------------------------------

/// ||u_k||_p for the cutoff commutator at levels k_min..k_max, the fitted log2 slope, and the
/// measured constant of the weighted-window bound.
inline Report run_tail_decay(const ExperimentConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    const Grid g = cfg.grid.make();
    if (g.lt() < std::ldexp(1.0, cfg.k_max + 3)) throw ConfigError("grid too short: l_t must be at least 2^(k_max+3)");
    Report rep(cfg, {"p", "k", "norm_uk", "bound_sum", "constant"});
    const Field u = cfg.data.kind == "zero" ? Field(g) : field_from_expression(g, cfg.signal);
    const std::size_t S = g.spatial_size();
    auto window_norm = [&](double half, double p) {
        double s = 0.0;
        for (std::size_t m = 0; m < g.nt(); ++m) {
            if (std::abs(g.coordinate(0, m)) >= half) continue;
            for (std::size_t q = 0; q < S; ++q) s += std::pow(std::abs(u[m * S + q]), p);
        }
        return std::pow(s * g.cell_measure(), 1.0 / p);
    };
    json per_p = json::array();
    for (double p : cfg.p_list) {
        std::vector<double> ks, norms, consts;
        for (int k = cfg.k_min; k <= cfg.k_max; ++k) {
            const double n = lp_norm(cutoff_commutator(u, k), p);
            double bound = 0.0;
            for (int j = 1; std::ldexp(1.0, k + j) <= 0.5 * g.lt(); ++j)
                bound += std::pow(2.0, -j * (0.5 + 1.0 / p)) * window_norm(std::ldexp(1.0, k + j), p);
            bound *= std::pow(2.0, -0.5 * k);
            const double c = bound == 0.0 ? 0.0 : n / bound;
            ks.push_back(std::ldexp(1.0, k));
            norms.push_back(n);
            consts.push_back(c);
            rep.row(p, k, n, bound, c);
        }
        const bool trivial = *std::max_element(norms.begin(), norms.end()) == 0.0;
        const double slope = trivial ? 0.0 : loglog_slope(ks, norms);
        const double cmax = *std::max_element(consts.begin(), consts.end());
        per_p.push_back({{"p", p}, {"slope", slope}, {"measured_constant", cmax}, {"trivial", trivial},
                         {"norms", norms}});
        const std::string tag = "p=" + fmt(p);
        if (!trivial) {
            rep.check("tail_slope/" + tag, slope <= -0.4, "slope " + fmt(slope));
            // The bound holds with a constant that does not grow with k.
            rep.check("tail_bound_uniform/" + tag, std::isfinite(cmax) && consts.back() <= 1.1 * consts.front(),
                      "constants " + fmt(consts.front()) + " -> " + fmt(consts.back()));
        }
    }
    rep.summary()["tail"] = per_p;
    rep.timings()["total_seconds"] = sw.seconds();
    return rep;
}

// ---- oscillation -------------------------------------------------------------------------

/// Source placed in x_1 half a period away from the center, so the solution is homogeneous in
/// the outer cylinder.
inline DataBundle far_source(const Grid& g, double lambda, const std::vector<double>& X, double R, bool zero) {
    DataBundle F = DataBundle::zero(g, lambda);
    if (zero) return F;
    const double l = g.lx(0);
    double c = X[1] + 0.5 * l;
    if (c >= 0.5 * l) c -= l;
    const double w = 0.8 * std::min(0.5 * l - R, 0.5 * l - std::abs(c));
    if (!(w > 2.0 * g.h(0))) throw ConfigError("outer radius leaves no room for the far source");
    const std::string time = "(1 + 0.5*cos(2*pi*t/" + fmt(g.lt()) + ") + 0.25*sin(4*pi*t/" + fmt(g.lt()) + "))";
    const std::string f = "bump(x1, " + fmt(c) + ", " + fmt(w) + ")*" + time;
    if (lambda > 0.0) F.f = field_from_expression(g, f);
    else F.h = field_from_expression(g, f);
    return F;
}

inline LocalEstimateReport manufactured_local_estimate(const GridSpec& gs, double R, double lambda) {
    const Grid g = gs.make();
    std::string r2 = "x1^2";
    for (int i = 2; i <= g.dim(); ++i) r2 += " + x" + std::to_string(i) + "^2";
    const Field u = field_from_expression(g, "bump(sqrt(" + r2 + "), 0, " + fmt(R) + ")*sin(2*pi*t/" + fmt(g.lt()) + ")");
    const Coefficients a = Coefficients::identity(g);
    DataBundle F = DataBundle::zero(g, lambda);
    F.f = apply_operator(a, lambda, u);
    return verify_local_estimate(a, lambda, F, u, R);
}

inline Report run_oscillation_experiments(const ExperimentConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    const Grid g = cfg.grid.make();
    const double lambda = cfg.lambdas.front();
    const double R = cfg.radius;
    const auto X = center_or_origin(cfg, g);
    const bool zero = cfg.data.kind == "zero";
    Report rep(cfg, {"case", "coefficients", "kappa", "r", "oscillation", "outer_rms", "tail", "ratio"});
    const DataBundle F = far_source(g, lambda, X, R, zero);

    struct Case {
        OscillationCase kind;
        std::string want;  // structure required of the coefficients
    };
    const std::vector<Case> cases{{OscillationCase::U_heat, "constant"},
                                  {OscillationCase::calU_time_coeffs, "time_measurable"},
                                  {OscillationCase::calUprime_theta_x1, "x1_measurable"}};
    json out = json::array();
    for (const auto& cs : cases) {
        std::vector<Coefficients> coeffs;
        if (cs.kind == OscillationCase::U_heat) coeffs.push_back(Coefficients::identity(g));
        else
            for (const auto& s : cfg.coefficients) {
                Coefficients c = generate_coefficients(s, g);
                if (to_string(c.structure()) == cs.want || c.structure() == CoefficientStructure::constant)
                    coeffs.push_back(std::move(c));
            }
        for (const auto& a : coeffs) {
            Stopwatch cw;
            const SolveResult s = solve_any(a, lambda, F, cfg.solver);
            if (!s.converged) rep.check("converged/" + to_string(cs.kind), false, "residual " + fmt(s.final_relative_residual));
            const auto r = verify_mean_oscillation(cs.kind, a, lambda, F, s.u.u, cfg.kappas, R, X);
            const std::string tag = to_string(cs.kind) + "/" + a.spec().kind;
            double tail = 0.0;
            for (const auto& row : r.rows) {
                rep.row(to_string(cs.kind), a.spec().kind, row.kappa, row.r, row.oscillation, row.outer_rms, row.tail,
                        row.homogeneous_ratio);
                tail = std::max(tail, row.tail);
            }
            out.push_back({{"case", r.case_name}, {"coefficients", a.spec().kind}, {"fitted_slope", r.fitted_slope},
                           {"expected_slope", r.expected_slope}, {"trivial", r.trivial}, {"max_tail", tail},
                           {"dropped_kappas", r.dropped_kappas}, {"iterations", s.iterations}});
            rep.timings()[tag] = cw.seconds();
            if (r.trivial) continue;
            rep.check("enough_kappas/" + tag, r.rows.size() >= 2, "fewer than two usable kappas");
            rep.check("decay/" + tag, r.fitted_slope <= 0.9 * r.expected_slope,
                      "slope " + fmt(r.fitted_slope) + " above " + fmt(0.9 * r.expected_slope));
            rep.check("homogeneous/" + tag, tail == 0.0, "data reaches the outer cylinder");
        }
    }
    rep.summary()["mean_oscillation"] = out;

    // Local estimate: refinement in time and parabolic rescaling.
    if (!zero) {
        GridSpec base = cfg.grid;
        const auto e0 = manufactured_local_estimate(base, R, lambda);
        GridSpec fine = base;
        fine.n_t *= 2;
        const auto e1 = manufactured_local_estimate(fine, R, lambda);
        GridSpec big = base;
        big.l_t *= 4.0;
        for (auto& l : big.l_x) l *= 2.0;
        const auto e2 = manufactured_local_estimate(big, 2.0 * R, lambda / 4.0);
        rep.summary()["local_estimate"] = {{"N_emp", e0.N_emp}, {"N_emp_time_refined", e1.N_emp},
                                           {"N_emp_rescaled", e2.N_emp}, {"tail_terms", e0.tail.J_used}};
        rep.check("local_estimate_finite", std::isfinite(e0.N_emp) && e0.N_emp > 0.0, "N_emp " + fmt(e0.N_emp));
        rep.check("local_estimate_refinement", std::abs(e1.N_emp / e0.N_emp - 1.0) <= 0.2,
                  fmt(e0.N_emp) + " -> " + fmt(e1.N_emp));
        rep.check("local_estimate_scaling", std::abs(e2.N_emp / e0.N_emp - 1.0) <= 0.05,
                  fmt(e0.N_emp) + " -> " + fmt(e2.N_emp));
    }
    rep.timings()["total_seconds"] = sw.seconds();
    return rep;
}

// ---- assumptions -------------------------------------------------------------------------

inline Report run_assumption_report(const ExperimentConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    const Grid g = cfg.grid.make();
    Report rep(cfg, {"kind", "delta", "epsilon", "structure", "assumption", "gamma", "R0", "worst_t", "worst_r",
                     "worst_i", "worst_j", "centers_scanned"});
    json out = json::array();
    for (const auto& spec : cfg.coefficients) {
        const Coefficients c = generate_coefficients(spec, g);
        rep.add_coefficients(coefficient_sidecar(c));
        const auto st = c.structure();
        for (int which = 0; which < 2; ++which) {
            const AssumptionReport a = which == 0 ? check_assumption_time(c, cfg.radius) : check_assumption_x1(c, cfg.radius);
            rep.row(spec.kind, spec.delta, spec.epsilon, to_string(st), a.assumption_kind, a.gamma_estimate, a.R0,
                    a.worst_cylinder.center[0], a.worst_cylinder.r, a.worst_i, a.worst_j, a.centers_scanned);
            out.push_back({{"kind", spec.kind}, {"assumption", a.assumption_kind}, {"gamma", a.gamma_estimate},
                           {"r_grid", a.r_grid}, {"worst_center", a.worst_cylinder.center}, {"worst_r", a.worst_cylinder.r}});
            const std::string tag = a.assumption_kind + "/" + spec.kind;
            const bool zero_expected = st == CoefficientStructure::constant ||
                                       (which == 0 && st == CoefficientStructure::time_measurable) ||
                                       (which == 1 && st == CoefficientStructure::x1_measurable);
            if (zero_expected) rep.check("vanishes/" + tag, a.gamma_estimate <= 1e-12, "gamma " + fmt(a.gamma_estimate));
            if (which == 0 && spec.kind == "checkerboard")
                rep.check("checkerboard_band/" + tag,
                          a.gamma_estimate >= spec.epsilon / 4.0 && a.gamma_estimate <= 2.0 * spec.epsilon,
                          "gamma " + fmt(a.gamma_estimate) + " outside [eps/4, 2 eps]");
        }
    }
    rep.summary()["assumptions"] = out;
    rep.timings()["total_seconds"] = sw.seconds();
    return rep;
}

// ---- single solves -----------------------------------------------------------------------

inline Report run_single_solve(const ExperimentConfig& cfg, bool oracle) {
    cfg.validate();
    Stopwatch sw;
    const Grid g = cfg.grid.make();
    const double lambda = cfg.lambdas.front();
    const Coefficients a = generate_coefficients(cfg.coefficients.front(), g);
    const DataBundle F = make_data(cfg.data, g, lambda, derive_seed(cfg.seed, 100, 0));
    const SolveResult s = oracle ? solve_oracle(a, lambda, F) : solve(a, lambda, F, cfg.solver);
    Report rep(cfg, {"p", "U_norm", "F_norm", "ratio"});
    rep.add_coefficients(coefficient_sidecar(a));
    const auto nb = compute_bundles(s.u.u, lambda, F, cfg.p_list);
    for (std::size_t i = 0; i < nb.p.size(); ++i)
        rep.row(nb.p[i], nb.U_norm[i], nb.F_norm[i], nb.F_norm[i] == 0.0 ? 0.0 : nb.U_norm[i] / nb.F_norm[i]);
    rep.summary()["iterations"] = s.iterations;
    rep.summary()["final_relative_residual"] = s.final_relative_residual;
    rep.summary()["converged"] = s.converged;
    json hist = json::array();
    for (double h : s.residual_history) hist.push_back(jnum(h));
    rep.summary()["residual_history"] = hist;
    if (oracle) {
        rep.summary()["multiplier_bound"] = multiplier_bound(a.mean_matrix(), lambda, g);
        rep.check("oracle_residual", s.final_relative_residual <= 1e-10, "residual " + fmt(s.final_relative_residual));
    } else {
        rep.check("converged", s.converged, "residual " + fmt(s.final_relative_residual));
    }
    if (cfg.dump_fields) {
        rep.dump("u", s.u.u);
        rep.dump("half_du", s.u.half_du);
    }
    rep.timings()["solve_seconds"] = s.wall_time;
    rep.timings()["total_seconds"] = sw.seconds();
    return rep;
}

/// Desk-scale defaults per experiment; a config file overrides any subset of keys.
inline ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    auto spec = [](const std::string& kind, double delta) {
        CoefficientSpec s;
        s.kind = kind;
        s.delta = delta;
        return s;
    };
    if (experiment == "identities") {
        c.grid = {1, 256, {16}, 6.0, {1.0}};
        c.trials = 20;
        c.coefficients = {spec("random_field", 0.25), spec("random_field", 0.5), spec("random_field", 1.0)};
    } else if (experiment == "l2") {
        c.grid = {1, 64, {32}, 4.0, {2.0}};
        c.trials = 100;
    } else if (experiment == "lp-sweep") {
        c.grid = {1, 64, {64}, 4.0, {2.0}};
        c.trials = 2;
        c.coefficients = {spec("time_piecewise", 0.25), spec("x1_piecewise", 0.25)};
        c.lambdas = {1, 4, 16, 64};
        c.p_list = {1.5, 3, 4};
        c.refine = true;
    } else if (experiment == "tail-decay") {
        c.grid = {1, 4096, {8}, 512.0, {1.0}};
        c.p_list = {2, 4};
    } else if (experiment == "oscillation") {
        c.grid = {1, 1024, {512}, 0.25, {1.0}};
        c.coefficients = {spec("time_piecewise", 0.5), spec("x1_piecewise", 0.5)};
        c.center = {0.0, 0.1};
    } else if (experiment == "assumptions") {
        c.grid = {2, 128, {64, 64}, 0.5, {1.0, 1.0}};
        CoefficientSpec cb = spec("checkerboard", 0.5);
        cb.scale = 1.0 / 16.0;
        cb.epsilon = 0.05;
        CoefficientSpec cb2 = cb;
        cb2.epsilon = 0.2;
        c.coefficients = {spec("constant", 0.5), spec("time_piecewise", 0.5), spec("x1_piecewise", 0.5), cb, cb2,
                          spec("smooth", 0.5)};
    } else if (experiment == "solve") {
        c.coefficients = {spec("time_piecewise", 0.5)};
    } else if (experiment == "oracle") {
        c.coefficients = {spec("identity", 1.0)};
    } else {
        throw ConfigError("unknown experiment '" + experiment + "'");
    }
    return c;
}

/// Dispatch on cfg.experiment.
inline Report run_experiment(const ExperimentConfig& cfg) {
    const std::string& e = cfg.experiment;
    if (e == "identities") return run_identity_suite(cfg);
    if (e == "l2") return run_l2_trials(cfg);
    if (e == "lp-sweep") return run_lp_sweep(cfg);
    if (e == "tail-decay") return run_tail_decay(cfg);
    if (e == "oscillation") return run_oscillation_experiments(cfg);
    if (e == "assumptions") return run_assumption_report(cfg);
    if (e == "solve") return run_single_solve(cfg, false);
    if (e == "oracle") return run_single_solve(cfg, true);
    throw ConfigError("unknown experiment '" + e + "'");
}

} // namespace halfheat::lab
