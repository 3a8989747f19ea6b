#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "cylinder.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "operator.hpp"
#include "parallel.hpp"

namespace halfheat {

namespace detail {
inline std::vector<std::size_t> nonempty_points(const Grid& g, const Cylinder& c) {
    auto pts = cylinder_points(g, c);
    if (pts.empty()) throw ConfigError("cylinder contains no grid points");
    return pts;
}
} // namespace detail

/// (u)_Q: average over grid samples inside the closed cylinder.
inline double cylinder_mean(const Field& u, const Cylinder& c) {
    const auto pts = detail::nonempty_points(u.grid(), c);
    double s = 0.0;
    for (auto i : pts) s += u[i];
    return s / static_cast<double>(pts.size());
}

/// (|u - (u)_Q|)_Q
inline double mean_oscillation(const Field& u, const Cylinder& c) {
    const auto pts = detail::nonempty_points(u.grid(), c);
    double m = 0.0;
    for (auto i : pts) m += u[i];
    m /= static_cast<double>(pts.size());
    double s = 0.0;
    for (auto i : pts) s += std::abs(u[i] - m);
    return s / static_cast<double>(pts.size());
}

/// Oscillation of a vector-valued function: (|U - (U)_Q|)_Q with the Euclidean norm.
inline double mean_oscillation(std::span<const Field> comps, const Cylinder& c) {
    if (comps.empty()) return 0.0;
    const auto pts = detail::nonempty_points(comps[0].grid(), c);
    std::vector<double> means;
    for (const auto& f : comps) {
        f.require_same(comps[0]);
        double m = 0.0;
        for (auto i : pts) m += f[i];
        means.push_back(m / static_cast<double>(pts.size()));
    }
    double s = 0.0;
    for (auto i : pts) {
        double q = 0.0;
        for (std::size_t k = 0; k < comps.size(); ++k) q += (comps[k][i] - means[k]) * (comps[k][i] - means[k]);
        s += std::sqrt(q);
    }
    return s / static_cast<double>(pts.size());
}

/// (|U|^2)_Q^{1/2}
inline double cylinder_rms(std::span<const Field> comps, const Cylinder& c) {
    if (comps.empty()) return 0.0;
    const auto pts = detail::nonempty_points(comps[0].grid(), c);
    double s = 0.0;
    for (const auto& f : comps) {
        f.require_same(comps[0]);
        for (auto i : pts) s += f[i] * f[i];
    }
    return std::sqrt(s / static_cast<double>(pts.size()));
}

/// Dyadic radii 2h, 4h, ... (h the largest spatial spacing) while Q_r fits the torus.
inline std::vector<double> maximal_radii(const Grid& g) {
    double h = 0.0, lmin = INFINITY;
    for (int i = 0; i < g.dim(); ++i) {
        h = std::max(h, g.h(i));
        lmin = std::min(lmin, g.lx(i));
    }
    std::vector<double> out;
    for (double r = 2.0 * h; 2.0 * r <= lmin && 2.0 * r * r <= g.lt(); r *= 2.0) out.push_back(r);
    if (out.empty()) throw ConfigError("grid too small for the maximal-function family");
    return out;
}

namespace detail {
inline Field family_maximal(const Field& f, const std::vector<std::pair<double, double>>& family) {
    const Field af = map(f, [](double v) { return std::abs(v); });
    Field out = Field::constant(f.grid(), 0.0);
    for (const auto& [r, s] : family) {
        const Stencil st = cylinder_stencil(f.grid(), r, s);
        // Centers Y with X in Q(Y) are X minus the stencil; the stencil is symmetric.
        const Field best = stencil_max(stencil_mean(af, st), st);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], best[i]);
    }
    return out;
}
} // namespace detail

/// Parabolic maximal function over Q_r, r in maximal_radii, all cylinders containing the point.
inline Field parabolic_maximal(const Field& f) {
    std::vector<std::pair<double, double>> fam;
    for (double r : maximal_radii(f.grid())) fam.emplace_back(r, r);
    return detail::family_maximal(f, fam);
}

/// Strong maximal function over Q_{r,s} with r and s ranging independently over maximal_radii.
inline Field strong_maximal(const Field& f) {
    const auto radii = maximal_radii(f.grid());
    std::vector<std::pair<double, double>> fam;
    for (double r : radii)
        for (double s : radii) fam.emplace_back(r, s);
    return detail::family_maximal(f, fam);
}

/// Level-n cell [2 i_0 4^{-n}, 2 (i_0 + 1) 4^{-n}) x prod [i_j 2^{-n}, (i_j + 1) 2^{-n}),
/// with indices counted from the grid corner (-l/2, ..., -l/2).
struct DyadicCell {
    int level = 0;
    std::vector<long> index;

    static double time_extent(int n) { return 2.0 * std::ldexp(1.0, -2 * n); }
    static double space_extent(int n) { return std::ldexp(1.0, -n); }
};

namespace detail {
/// Samples per cell along every axis (time first); throws unless cells tile the torus.
inline std::vector<std::size_t> cell_samples(const Grid& g, int n) {
    std::vector<std::size_t> c;
    for (int a = 0; a <= g.dim(); ++a) {
        const double ext = a == 0 ? DyadicCell::time_extent(n) : DyadicCell::space_extent(n);
        const double q = ext / g.spacing(a);
        const auto k = static_cast<std::size_t>(std::llround(q));
        if (std::abs(q - static_cast<double>(k)) > 1e-9 || k < 2 || g.extent(a) % k != 0)
            throw ConfigError("dyadic level " + std::to_string(n) + " does not tile the grid in cells of >= 2 samples");
        c.push_back(k);
    }
    return c;
}

/// Cell id of every sample at level n, plus the number of cells.
inline std::pair<std::vector<std::size_t>, std::size_t> cell_ids(const Grid& g, int n) {
    const auto c = cell_samples(g, n);
    std::vector<std::size_t> ncell;
    std::size_t total = 1;
    for (int a = 0; a <= g.dim(); ++a) {
        ncell.push_back(g.extent(a) / c[static_cast<std::size_t>(a)]);
        total *= ncell.back();
    }
    std::vector<std::size_t> id(g.size());
    std::vector<std::size_t> idx(static_cast<std::size_t>(g.dim() + 1), 0);
    for (std::size_t lin = 0; lin < g.size(); ++lin) {
        std::size_t cid = 0;
        for (std::size_t a = 0; a < idx.size(); ++a) cid = cid * ncell[a] + idx[a] / c[a];
        id[lin] = cid;
        for (std::size_t a = idx.size(); a-- > 0;) {
            if (++idx[a] < g.extent(static_cast<int>(a))) break;
            idx[a] = 0;
        }
    }
    return {std::move(id), total};
}
} // namespace detail

/// Per-sample oscillation (|f - f_cell|)_cell of the level-n cell containing it.
inline Field dyadic_cell_oscillation(const Field& f, int n) {
    const auto [id, ncells] = detail::cell_ids(f.grid(), n);
    std::vector<double> mean(ncells, 0.0), osc(ncells, 0.0);
    std::vector<std::size_t> cnt(ncells, 0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        mean[id[i]] += f[i];
        ++cnt[id[i]];
    }
    for (std::size_t c = 0; c < ncells; ++c) mean[c] /= static_cast<double>(cnt[c]);
    for (std::size_t i = 0; i < f.size(); ++i) osc[id[i]] += std::abs(f[i] - mean[id[i]]);
    Field out(f.grid());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = osc[id[i]] / static_cast<double>(cnt[id[i]]);
    return out;
}

/// Dyadic sharp function: max over n in [n_lo, n_hi] of the containing cell's oscillation.
inline Field dyadic_sharp(const Field& f, int n_lo, int n_hi) {
    if (n_lo > n_hi) throw ConfigError("empty dyadic level range");
    Field out = Field::constant(f.grid(), 0.0);
    for (int n = n_lo; n <= n_hi; ++n) {
        const Field o = dyadic_cell_oscillation(f, n);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], o[i]);
    }
    return out;
}

/// Per-sample (|f - c|)_cell at level n.
inline Field dyadic_cell_deviation(const Field& f, int n, double c) {
    const auto [id, ncells] = detail::cell_ids(f.grid(), n);
    std::vector<double> dev(ncells, 0.0);
    std::vector<std::size_t> cnt(ncells, 0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        dev[id[i]] += std::abs(f[i] - c);
        ++cnt[id[i]];
    }
    Field out(f.grid());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = dev[id[i]] / static_cast<double>(cnt[id[i]]);
    return out;
}

struct CellCylinderComparison {
    int level = 0;
    std::size_t cells_checked = 0;
    double worst_ratio = 0.0;       // max over cells of osc_cell / osc_cylinder
    double constant_bound = 0.0;    // 2 |Q| / |cell| in sample counts
    bool holds = true;
};

/// For every level-n cell, takes the cylinder Q_{2^{-n}} centered at the cell center (it contains
/// the cell) and checks osc_cell <= 2 (|Q| / |cell|) osc_Q.
inline CellCylinderComparison compare_cells_with_cylinders(const Field& f, int n) {
    const Grid& g = f.grid();
    const auto cs = detail::cell_samples(g, n);
    const auto [id, ncells] = detail::cell_ids(g, n);
    const double r = DyadicCell::space_extent(n);
    CellCylinderComparison rep;
    rep.level = n;
    const Field cell_osc = dyadic_cell_oscillation(f, n);
    std::vector<bool> seen(ncells, false);
    std::vector<std::size_t> idx(static_cast<std::size_t>(g.dim() + 1));
    for (std::size_t lin = 0; lin < g.size(); ++lin) {
        if (seen[id[lin]]) continue;
        seen[id[lin]] = true;
        // lin is the cell's first sample (row-major order reaches the corner first).
        std::size_t rem = lin;
        for (int a = g.dim(); a >= 0; --a) {
            idx[static_cast<std::size_t>(a)] = rem % g.extent(a);
            rem /= g.extent(a);
        }
        std::vector<double> center;
        for (int a = 0; a <= g.dim(); ++a) {
            const double lo = g.coordinate(a, idx[static_cast<std::size_t>(a)]) - 0.5 * g.spacing(a);
            const double ext = static_cast<double>(cs[static_cast<std::size_t>(a)]) * g.spacing(a);
            center.push_back(lo + 0.5 * ext);
        }
        const Cylinder q = Cylinder::parabolic(center, r);
        const auto pts = cylinder_points(g, q);
        std::size_t cell_count = 1;
        for (auto k : cs) cell_count *= k;
        const double bound = 2.0 * static_cast<double>(pts.size()) / static_cast<double>(cell_count);
        rep.constant_bound = std::max(rep.constant_bound, bound);
        const double oc = cell_osc[lin];
        const double oq = mean_oscillation(f, q);
        if (oc > bound * oq * (1.0 + 1e-12) + 1e-14) rep.holds = false;
        if (oq > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, oc / oq);
        ++rep.cells_checked;
    }
    return rep;
}

struct TailSum {
    double value = 0.0;
    int J_requested = 0;
    int J_used = 0;
    bool truncated = false;
};

/// sum_{j < J} 2^{-j/4} (|F|^2)^{1/2} over Q_{2^{j/2} kappa r, kappa r}(X). Terms whose time extent
/// would wrap the torus are dropped and the report is marked truncated.
inline TailSum tail_sum(std::span<const Field> comps, double r, double kappa, const std::vector<double>& X, int J) {
    if (comps.empty()) throw ConfigError("tail_sum needs at least one component");
    const Grid& g = comps[0].grid();
    TailSum t;
    t.J_requested = J;
    const double s = kappa * r;
    for (int j = 0; j < J; ++j) {
        const double rho = std::pow(2.0, 0.5 * j) * s;
        if (2.0 * std::ldexp(s * s, j) > g.lt()) {
            t.truncated = true;
            break;
        }
        t.value += std::pow(2.0, -0.25 * j) * cylinder_rms(comps, Cylinder{X, rho, s});
        t.J_used = j + 1;
    }
    return t;
}

inline TailSum tail_sum(const Field& f, double r, double kappa, const std::vector<double>& X, int J) {
    return tail_sum(std::span<const Field>(&f, 1), r, kappa, X, J);
}

/// Largest J with every tail cylinder inside the time period.
inline int max_tail_terms(const Grid& g, double s) {
    int J = 0;
    while (2.0 * std::ldexp(s * s, J) <= g.lt()) ++J;
    return J;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw ConfigError("slope fit needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct LocalEstimateReport {
    double lhs = 0.0;          // (|U|^2)^{1/2} over Q_R
    double rhs = 0.0;          // truncated weighted tail sum of |F|
    double N_emp = 0.0;        // lhs / rhs
    bool trivial = false;      // both sides zero
    TailSum tail;
    double residual = 0.0;
    double outside_support = 0.0;  // max |u| outside B_R relative to max |u|
};

/// Local L_2 estimate at the origin for a solution u supported in R x B_R.
inline LocalEstimateReport verify_local_estimate(const Coefficients& a, double lambda, const DataBundle& F,
                                                 const Field& u, double R, double rtol = 1e-8) {
    const Grid& g = u.grid();
    LocalEstimateReport rep;
    const Field rhs_field = apply_rhs(F);
    const Field res = apply_operator(a, lambda, u) - rhs_field;
    const double bn = lp_norm(rhs_field, 2.0);
    rep.residual = bn == 0.0 ? lp_norm(res, 2.0) : lp_norm(res, 2.0) / bn;
    if (rep.residual > rtol) throw SolverError("supplied u does not solve the equation (residual " +
                                               std::to_string(rep.residual) + ")");
    const std::size_t S = g.spatial_size();
    double umax = lp_norm(u, INFINITY), outside = 0.0;
    std::vector<std::size_t> idx(static_cast<std::size_t>(g.dim()));
    for (std::size_t s = 0; s < S; ++s) {
        std::size_t rem = s;
        double r2 = 0.0;
        for (int i = g.dim() - 1; i >= 0; --i) {
            const double x = g.coordinate(i + 1, rem % g.nx(i));
            rem /= g.nx(i);
            r2 += x * x;
        }
        if (r2 > R * R)
            for (std::size_t m = 0; m < g.nt(); ++m) outside = std::max(outside, std::abs(u[m * S + s]));
    }
    rep.outside_support = umax == 0.0 ? 0.0 : outside / umax;
    if (rep.outside_support > 1e-10) throw ConfigError("u is not supported in the ball B_R");

    const std::vector<double> X(static_cast<std::size_t>(g.dim() + 1), 0.0);
    const auto U = SolutionBundle::from(u, lambda).components();
    rep.lhs = cylinder_rms(U, Cylinder{X, R, R});
    const auto Fc = data_components(F);
    rep.tail = tail_sum(Fc, R, 1.0, X, max_tail_terms(g, R));
    rep.rhs = rep.tail.value;
    if (rep.lhs == 0.0 && rep.rhs == 0.0) rep.trivial = true;
    else rep.N_emp = rep.rhs == 0.0 ? INFINITY : rep.lhs / rep.rhs;
    return rep;
}

enum class OscillationCase { calU_time_coeffs, U_heat, calUprime_theta_x1 };

inline std::string to_string(OscillationCase c) {
    switch (c) {
    case OscillationCase::calU_time_coeffs: return "calU_time_coeffs";
    case OscillationCase::U_heat: return "U_heat";
    case OscillationCase::calUprime_theta_x1: return "calUprime_theta_x1";
    }
    return "";
}

/// Components whose oscillation is measured:
///   calU_time_coeffs   (Du, sqrt(lambda) u)
///   U_heat             (D_t^{1/2} u, Du, sqrt(lambda) u)
///   calUprime_theta_x1 (D'u, sqrt(lambda) u, Theta_u), D' = derivatives in x_2..x_d
inline std::vector<Field> oscillation_components(OscillationCase c, const Coefficients& a, double lambda, const Field& u) {
    const VectorField du = gradient_plus(u);
    std::vector<Field> out;
    switch (c) {
    case OscillationCase::U_heat:
        out.push_back(half_derivative(u));
        [[fallthrough]];
    case OscillationCase::calU_time_coeffs:
        for (const auto& di : du) out.push_back(di);
        out.push_back(std::sqrt(lambda) * u);
        break;
    case OscillationCase::calUprime_theta_x1:
        for (std::size_t i = 1; i < du.dim(); ++i) out.push_back(du[i]);
        out.push_back(std::sqrt(lambda) * u);
        out.push_back(theta_field(a, u));
        break;
    }
    return out;
}

struct OscillationRow {
    double kappa = 0.0;
    double r = 0.0;
    std::vector<double> center;
    double oscillation = 0.0;     // (|V - (V)_{Q_r}|)_{Q_r}
    double outer_rms = 0.0;       // (|V|^2)^{1/2} over Q_{kappa r}
    double tail = 0.0;            // kappa^{1 + d/2} * tail sum of F at radius kappa r
    double homogeneous_ratio = 0.0;  // oscillation / outer_rms
};

struct OscillationReport {
    std::string case_name;
    std::vector<OscillationRow> rows;
    double fitted_slope = 0.0;    // d log(homogeneous_ratio) / d log(kappa)
    double expected_slope = 0.0;  // -1 or -1/2
    bool trivial = false;
    std::vector<double> dropped_kappas;
};

/// Mean-oscillation decay with the outer cylinder Q_R(X) held fixed and r = R / kappa, which is the
/// same configuration as fixed r and growing kappa r after a parabolic dilation.
inline OscillationReport verify_mean_oscillation(OscillationCase c, const Coefficients& a, double lambda,
                                                 const DataBundle& F, const Field& u,
                                                 const std::vector<double>& kappas, double R,
                                                 const std::vector<double>& X) {
    const Grid& g = u.grid();
    OscillationReport rep;
    rep.case_name = to_string(c);
    rep.expected_slope = c == OscillationCase::calUprime_theta_x1 ? -0.5 : -1.0;
    const auto V = oscillation_components(c, a, lambda, u);
    const auto Fc = data_components(F);
    double hmax = 0.0;
    for (int i = 0; i < g.dim(); ++i) hmax = std::max(hmax, g.h(i));
    std::vector<double> ks, ratios;
    bool all_zero = true;
    for (double kappa : kappas) {
        if (kappa < 4.0) throw ConfigError("kappa must be at least 4");
        const double r = R / kappa;
        if (r < 2.0 * hmax || r * r < g.dt()) {
            rep.dropped_kappas.push_back(kappa);
            continue;
        }
        OscillationRow row;
        row.kappa = kappa;
        row.r = r;
        row.center = X;
        row.oscillation = mean_oscillation(V, Cylinder{X, r, r});
        row.outer_rms = cylinder_rms(V, Cylinder{X, R, R});
        row.tail = std::pow(kappa, 1.0 + 0.5 * g.dim()) * tail_sum(Fc, r, kappa, X, max_tail_terms(g, R)).value;
        row.homogeneous_ratio = row.outer_rms > 0.0 ? row.oscillation / row.outer_rms : 0.0;
        if (row.outer_rms > 0.0) all_zero = false;
        rep.rows.push_back(row);
        if (row.homogeneous_ratio > 0.0) {
            ks.push_back(kappa);
            ratios.push_back(row.homogeneous_ratio);
        }
    }
    rep.trivial = all_zero;
    if (ks.size() >= 2) rep.fitted_slope = loglog_slope(ks, ratios);
    return rep;
}

} // namespace halfheat
