// Runs the ten acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is the number of failed criteria.

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <halfheat/lab/experiments.hpp>

using namespace halfheat;
using namespace halfheat::lab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string failures_of(const Report& r) {
    std::string s;
    for (const auto& a : r.assertions())
        if (!a.passed) s += (s.empty() ? "" : "; ") + a.name + ": " + a.detail;
    return s;
}

bool passed_with_prefix(const Report& r, const std::string& prefix, std::string& why) {
    bool ok = true, seen = false;
    for (const auto& a : r.assertions())
        if (a.name.rfind(prefix, 0) == 0) {
            seen = true;
            if (!a.passed) {
                ok = false;
                why += a.name + ": " + a.detail + "; ";
            }
        }
    if (!seen) why += "no assertions named " + prefix + "; ";
    return ok && seen;
}

char buf[512];

template <typename... Ts>
std::string sfmt(const char* f, Ts... v) {
    std::snprintf(buf, sizeof buf, f, v...);
    return buf;
}

// 1, 3 and 10 share one identity-suite run.
const Report& identity_run() {
    static const Report rep = [] {
        ExperimentConfig c = default_config("identities");
        c.trials = 20;
        return run_identity_suite(c);
    }();
    return rep;
}

Outcome identities() {
    const Report& r = identity_run();
    const auto& dev = r.summary()["deviations"];
    std::string why;
    bool ok = true;
    for (const char* k : {"hilbert_involution", "hilbert_isometry", "hilbert_contraction", "half_derivative_adjoint",
                          "half_derivative_squared", "spatial_commutation", "hilbert_skew", "half_derivative_symmetric"})
        ok = passed_with_prefix(r, k, why) && ok;
    return {ok, ok ? sfmt("HH=-I %.1e, isometry %.1e, adjoint %.1e, DD=H dt %.1e, commutation %.1e",
                          dev["hilbert_involution"]["worst"].get<double>(), dev["hilbert_isometry"]["worst"].get<double>(),
                          dev["half_derivative_adjoint"]["worst"].get<double>(),
                          dev["half_derivative_squared"]["worst"].get<double>(),
                          dev["spatial_commutation"]["worst"].get<double>())
                   : why};
}

Outcome quadrature() {
    std::string detail;
    bool ok = true;
    for (const char* sig : {"cos(4*t)", "exp(cos(t))", "sin(2*t)*exp(0.5*cos(t))"}) {
        ExperimentConfig c;
        c.experiment = "identities";
        c.grid = {1, 256, {8}, 2.0 * std::numbers::pi, {1.0}};
        c.signal = sig;
        c.truncation = 8;
        const Report r = run_quadrature_check(c);
        ok = ok && r.passed();
        const auto e = r.summary()["errors"];
        detail += sfmt("%s: %.1e/%.1e/%.1e  ", sig, e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
        if (!r.passed()) detail += "[" + failures_of(r) + "] ";
    }
    return {ok, detail};
}

Outcome coercivity() {
    ExperimentConfig c = default_config("identities");
    c.trials = 100;
    const Report r = run_identity_suite(c);
    std::string why;
    const bool ok = passed_with_prefix(r, "coercivity_margin", why);
    return {ok, ok ? "B_kappa[u,u] >= (delta^2/2)|U|^2 on 100 fields for delta = 0.25, 0.5, 1" : why};
}

Outcome oracle() {
    const Grid g = make_grid(2, 32, {16, 16}, 1.0, {1.0, 1.0});
    const Coefficients a = Coefficients::constant(g, {1.3, -0.25, -0.25, 0.6}, 0.5);
    double worst_res = 0.0, worst_diff = 0.0;
    std::size_t worst_it = 0;
    for (int t = 0; t < 5; ++t) {
        const DataBundle F = make_data(DataSpec{}, g, 2.0, derive_seed(11, 1, static_cast<std::uint64_t>(t)));
        const auto ex = solve_oracle(a, 2.0, F);
        const auto it = solve(a, 2.0, F);
        worst_res = std::max(worst_res, ex.final_relative_residual);
        worst_diff = std::max(worst_diff, relative_difference(it.u.u, ex.u.u));
        worst_it = std::max(worst_it, it.iterations);
    }
    const bool ok = worst_res <= 1e-10 && worst_diff <= 1e-8 && worst_it <= 3;
    return {ok, sfmt("oracle residual %.1e, solve vs oracle %.1e, iterations %zu", worst_res, worst_diff, worst_it)};
}

Outcome l2() {
    ExperimentConfig c = default_config("l2");
    CoefficientSpec aniso;
    aniso.kind = "constant";
    aniso.delta = 0.5;
    aniso.seed = 5;
    c.coefficients = {CoefficientSpec{}, aniso};
    c.lambdas = {1.0, 4.0, 16.0};
    const Report r = run_l2_trials(c);
    double C = 0.0, worst = 0.0;
    for (const auto& a : r.summary()["aggregates"])
        if (a["kind"] == "identity") {
            C = std::max(C, a["multiplier_bound"].get<double>());
            worst = std::max(worst, a["max_ratio"].get<double>());
        }
    return {r.passed(), r.passed() ? sfmt("a = I: max ratio %.4f <= C = %.4f <= 3", worst, C) : failures_of(r)};
}

Outcome lp_sweep() {
    std::string detail;
    bool ok = true;
    for (int d : {1, 2}) {
        ExperimentConfig c = default_config("lp-sweep");
        if (d == 2) c.grid = {2, 64, {64, 64}, 4.0, {2.0, 2.0}};
        const Report r = run_lp_sweep(c);
        ok = ok && r.passed();
        detail += sfmt("d=%d stability %.3f  ", d, r.summary()["stability_factor"].get<double>());
        if (!r.passed()) detail += "[" + failures_of(r) + "] ";
    }
    return {ok, detail};
}

Outcome tail() {
    const Report r = run_tail_decay(default_config("tail-decay"));
    std::string detail;
    for (const auto& t : r.summary()["tail"])
        detail += sfmt("p=%g slope %.3f constant %.3g  ", t["p"].get<double>(), t["slope"].get<double>(),
                       t["measured_constant"].get<double>());
    return {r.passed(), r.passed() ? detail : failures_of(r)};
}

Outcome oscillation() {
    const Report r = run_oscillation_experiments(default_config("oscillation"));
    std::string detail;
    for (const auto& m : r.summary()["mean_oscillation"])
        detail += sfmt("%s %.3f  ", m["case"].get<std::string>().c_str(), m["fitted_slope"].get<double>());
    return {r.passed(), r.passed() ? detail : failures_of(r)};
}

Outcome assumptions() {
    const Report r = run_assumption_report(default_config("assumptions"));
    std::string detail;
    for (const auto& a : r.summary()["assumptions"])
        if (a["kind"] == "checkerboard" && a["assumption"] == "time")
            detail += sfmt("checkerboard gamma %.3f  ", a["gamma"].get<double>());
    return {r.passed(), r.passed() ? "zeros where required; " + detail : failures_of(r)};
}

Outcome reduction() {
    const Report& r = identity_run();
    std::string why;
    const bool ok = passed_with_prefix(r, "reduction_identity", why);
    double worst = 0.0;
    for (auto it = r.summary()["deviations"].begin(); it != r.summary()["deviations"].end(); ++it)
        if (it.key().rfind("reduction_identity", 0) == 0) worst = std::max(worst, (*it)["worst"].get<double>());
    return {ok, ok ? sfmt("20 solved instances per coefficient spec, worst %.1e", worst) : why};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"identity suite", identities},
        {"quadrature vs spectral half derivative", quadrature},
        {"discrete coercivity", coercivity},
        {"oracle exactness and equivalence", oracle},
        {"constant-coefficient L2 estimate", l2},
        {"Lp ratio boundedness and refinement stability", lp_sweep},
        {"tail decay", tail},
        {"mean-oscillation decay", oscillation},
        {"assumption checkers", assumptions},
        {"reduction identity", reduction}};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Stopwatch sw;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %2zu %-46s %6.1fs  %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    sw.seconds(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed;
}
