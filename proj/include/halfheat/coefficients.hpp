#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cylinder.hpp"
#include "errors.hpp"
#include "expression.hpp"
#include "field.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace halfheat {

enum class CoefficientStructure { constant, time_measurable, x1_measurable, general };

inline std::string to_string(CoefficientStructure s) {
    switch (s) {
    case CoefficientStructure::constant: return "constant";
    case CoefficientStructure::time_measurable: return "time_measurable";
    case CoefficientStructure::x1_measurable: return "x1_measurable";
    case CoefficientStructure::general: return "general";
    }
    return "general";
}

/// delta |xi|^2 <= a xi.xi and |a_ij| <= 1/delta, with 0 < delta <= 1.
struct Ellipticity {
    double delta = 1.0;

    explicit Ellipticity(double d = 1.0) : delta(d) {
        if (!(d > 0.0 && d <= 1.0)) throw ConfigError("ellipticity delta must lie in (0, 1]");
    }
};

/// Generator parameters; also the metadata written to the coefficient sidecar.
///   kind: identity | constant | time_piecewise | x1_piecewise | checkerboard | smooth | random_field
///   n_jumps: slabs for the piecewise kinds
///   epsilon: amplitude for checkerboard and smooth
///   scale: checkerboard cell side (time side scale^2), or the smooth field's band fraction
struct CoefficientSpec {
    std::string kind = "identity";
    double delta = 1.0;
    std::uint64_t seed = 0;
    int n_jumps = 4;
    double epsilon = 0.1;
    double scale = 0.25;
};

/// Pointwise d x d matrix field a_ij with a structure tag.
class Coefficients {
public:
    Coefficients() = default;
    Coefficients(const Grid& g, CoefficientStructure tag, Ellipticity ell)
        : grid_(g), d_(g.dim()), entries_(static_cast<std::size_t>(d_ * d_), Field(g)), tag_(tag), ell_(ell) {}

    static Coefficients identity(const Grid& g) {
        std::vector<double> m(static_cast<std::size_t>(g.dim() * g.dim()), 0.0);
        for (int i = 0; i < g.dim(); ++i) m[static_cast<std::size_t>(i * g.dim() + i)] = 1.0;
        Coefficients c = constant(g, m, 1.0);
        c.spec_.kind = "identity";
        return c;
    }

    /// `matrix` is row-major d x d.
    static Coefficients constant(const Grid& g, const std::vector<double>& matrix, double delta) {
        const int d = g.dim();
        if (matrix.size() != static_cast<std::size_t>(d * d)) throw ConfigError("constant matrix must be d x d");
        Coefficients c(g, CoefficientStructure::constant, Ellipticity(delta));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) c.a(i, j) = Field::constant(g, matrix[static_cast<std::size_t>(i * d + j)]);
        c.spec_.kind = "constant";
        c.spec_.delta = delta;
        return c;
    }

    const Grid& grid() const noexcept { return grid_; }
    int dim() const noexcept { return d_; }
    const Field& a(int i, int j) const { return entries_.at(static_cast<std::size_t>(i * d_ + j)); }
    Field& a(int i, int j) { return entries_.at(static_cast<std::size_t>(i * d_ + j)); }
    CoefficientStructure structure() const noexcept { return tag_; }
    void set_structure(CoefficientStructure t) noexcept { tag_ = t; }
    const Ellipticity& ellipticity() const noexcept { return ell_; }
    double delta() const noexcept { return ell_.delta; }
    const CoefficientSpec& spec() const noexcept { return spec_; }
    void set_spec(CoefficientSpec s) { spec_ = std::move(s); }

    /// Row-major matrix at sample `lin`.
    std::vector<double> matrix_at(std::size_t lin) const {
        std::vector<double> m(static_cast<std::size_t>(d_ * d_));
        for (std::size_t k = 0; k < m.size(); ++k) m[k] = entries_[k][lin];
        return m;
    }

    /// Space-time mean of every entry.
    std::vector<double> mean_matrix() const {
        std::vector<double> m(static_cast<std::size_t>(d_ * d_), 0.0);
        for (std::size_t k = 0; k < m.size(); ++k) {
            double s = 0.0;
            for (double v : entries_[k].values()) s += v;
            m[k] = s / static_cast<double>(grid_.size());
        }
        return m;
    }

    /// Returns a copy with `shift` (row-major, d x d) added to every sample.
    Coefficients plus_constant(const std::vector<double>& shift) const {
        Coefficients c = *this;
        for (std::size_t k = 0; k < c.entries_.size(); ++k)
            for (auto& v : c.entries_[k].raw()) v += shift[k];
        return c;
    }

private:
    Grid grid_;
    int d_ = 0;
    std::vector<Field> entries_;
    CoefficientStructure tag_ = CoefficientStructure::constant;
    Ellipticity ell_;
    CoefficientSpec spec_;
};

/// Probe directions: coordinate axes, pairwise diagonals, and 32 fixed pseudo-random unit vectors.
inline std::vector<std::vector<double>> probe_directions(int d) {
    std::vector<std::vector<double>> dirs;
    for (int i = 0; i < d; ++i) {
        std::vector<double> e(static_cast<std::size_t>(d), 0.0);
        e[static_cast<std::size_t>(i)] = 1.0;
        dirs.push_back(e);
        for (int j = i + 1; j < d; ++j) {
            for (double sgn : {1.0, -1.0}) {
                std::vector<double> v(static_cast<std::size_t>(d), 0.0);
                v[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(2.0);
                v[static_cast<std::size_t>(j)] = sgn / std::sqrt(2.0);
                dirs.push_back(v);
            }
        }
    }
    Rng rng(0xd1ec7);
    for (int k = 0; k < 32 && d > 1; ++k) {
        std::vector<double> v(static_cast<std::size_t>(d));
        double n = 0.0;
        for (auto& x : v) { x = rng.normal(); n += x * x; }
        for (auto& x : v) x /= std::sqrt(n);
        dirs.push_back(v);
    }
    return dirs;
}

/// Smallest xi.a.xi / |xi|^2 over the probe set, minimized over all samples.
inline double min_probe_ellipticity(const Coefficients& c) {
    const int d = c.dim();
    const auto dirs = probe_directions(d);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t lin = 0; lin < c.grid().size(); ++lin) {
        const auto m = c.matrix_at(lin);
        for (const auto& xi : dirs) {
            double q = 0.0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    q += m[static_cast<std::size_t>(i * d + j)] * xi[static_cast<std::size_t>(i)] * xi[static_cast<std::size_t>(j)];
            worst = std::min(worst, q);
        }
    }
    return worst;
}

inline double max_abs_entry(const Coefficients& c) {
    double m = 0.0;
    for (int i = 0; i < c.dim(); ++i)
        for (int j = 0; j < c.dim(); ++j) m = std::max(m, lp_norm(c.a(i, j), INFINITY));
    return m;
}

/// Largest |f(X + e_axis) - f(X)| over the grid.
inline double variation_along(const Field& f, int axis) {
    const Grid& g = f.grid();
    const std::size_t stride = g.stride(axis);
    const std::size_t n = g.extent(axis);
    double m = 0.0;
    for (std::size_t lin = 0; lin < g.size(); ++lin) {
        const std::size_t k = (lin / stride) % n;
        const std::size_t nb = (k + 1 < n) ? lin + stride : lin + stride - n * stride;
        m = std::max(m, std::abs(f[nb] - f[lin]));
    }
    return m;
}

/// Empty string if the ellipticity probe, the bound |a_ij| <= 1/delta and the tag all hold;
/// otherwise a description of the first violation.
inline std::string validate(const Coefficients& c, double tol = 1e-14) {
    const double delta = c.delta();
    if (min_probe_ellipticity(c) < delta * (1.0 - 1e-12)) return "ellipticity lower bound violated";
    if (max_abs_entry(c) > (1.0 / delta) * (1.0 + 1e-12)) return "entry bound |a_ij| <= 1/delta violated";
    std::vector<int> frozen;
    switch (c.structure()) {
    case CoefficientStructure::constant:
        for (int a = 0; a <= c.dim(); ++a) frozen.push_back(a);
        break;
    case CoefficientStructure::time_measurable:
        for (int a = 1; a <= c.dim(); ++a) frozen.push_back(a);
        break;
    case CoefficientStructure::x1_measurable:
        frozen.push_back(0);
        for (int a = 2; a <= c.dim(); ++a) frozen.push_back(a);
        break;
    case CoefficientStructure::general: break;
    }
    for (int axis : frozen)
        for (int i = 0; i < c.dim(); ++i)
            for (int j = 0; j < c.dim(); ++j)
                if (variation_along(c.a(i, j), axis) > tol)
                    return "tag " + to_string(c.structure()) + " inconsistent with variation along axis " +
                           std::to_string(axis);
    return {};
}

namespace detail {

/// Symmetric matrix with eigenvalues drawn in [delta, 1/delta], so xi.a.xi >= delta|xi|^2
/// and the operator norm (hence every entry) is at most 1/delta.
inline std::vector<double> random_admissible(Rng& rng, int d, double delta) {
    const double lo = delta * (1.0 + 1e-9);
    const double hi = (1.0 / delta) * (1.0 - 1e-9);
    const auto D = static_cast<std::size_t>(d);
    if (d == 1) return {rng.uniform(lo, hi)};
    // Orthonormal frame by Gram-Schmidt on Gaussian vectors.
    std::vector<std::vector<double>> q(D, std::vector<double>(D));
    for (std::size_t k = 0; k < D; ++k) {
        while (true) {
            for (auto& x : q[k]) x = rng.normal();
            for (std::size_t p = 0; p < k; ++p) {
                double dot = 0.0;
                for (std::size_t i = 0; i < D; ++i) dot += q[k][i] * q[p][i];
                for (std::size_t i = 0; i < D; ++i) q[k][i] -= dot * q[p][i];
            }
            double n = 0.0;
            for (double x : q[k]) n += x * x;
            if (n > 1e-8) {
                for (auto& x : q[k]) x /= std::sqrt(n);
                break;
            }
        }
    }
    std::vector<double> lam(D);
    for (auto& l : lam) l = rng.uniform(lo, hi);
    std::vector<double> m(D * D, 0.0);
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = i; j < D; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < D; ++k) s += lam[k] * q[k][i] * q[k][j];
            m[i * D + j] = s;
            m[j * D + i] = s;
        }
    return m;
}

inline void fill_sample(Coefficients& c, std::size_t lin, const std::vector<double>& m) {
    const int d = c.dim();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) c.a(i, j)[lin] = m[static_cast<std::size_t>(i * d + j)];
}

/// Sorted distinct slab starts in [0, n), always including 0.
inline std::vector<std::size_t> slab_starts(Rng& rng, std::size_t n, int n_jumps) {
    if (n_jumps < 1) throw ConfigError("n_jumps must be at least 1");
    std::vector<std::size_t> s{0};
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(n_jumps), n);
    while (s.size() < want) {
        const auto v = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n;
        if (std::find(s.begin(), s.end(), v) == s.end()) s.push_back(v);
    }
    std::sort(s.begin(), s.end());
    return s;
}

inline std::size_t slab_of(const std::vector<std::size_t>& starts, std::size_t k) {
    return static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), k) - starts.begin()) - 1;
}

} // namespace detail

/// Largest checkerboard amplitude keeping 1 +- eps inside [delta, 1/delta].
inline double max_checkerboard_epsilon(double delta) { return 1.0 - delta; }

/// Deterministic coefficient generator; see CoefficientSpec for the kinds.
inline Coefficients generate_coefficients(const CoefficientSpec& spec, const Grid& g) {
    const Ellipticity ell(spec.delta);
    const int d = g.dim();
    const std::size_t S = g.spatial_size();
    Rng rng(spec.seed);
    Coefficients c;
    const std::string& k = spec.kind;

    if (k == "identity") {
        std::vector<double> eye(static_cast<std::size_t>(d * d), 0.0);
        for (int i = 0; i < d; ++i) eye[static_cast<std::size_t>(i * d + i)] = 1.0;
        c = Coefficients::constant(g, eye, spec.delta);
    } else if (k == "constant") {
        c = Coefficients::constant(g, detail::random_admissible(rng, d, spec.delta), spec.delta);
    } else if (k == "time_piecewise" || k == "x1_piecewise") {
        const bool in_time = k == "time_piecewise";
        const int axis = in_time ? 0 : 1;
        const std::size_t n = g.extent(axis);
        const auto starts = detail::slab_starts(rng, n, spec.n_jumps);
        std::vector<std::vector<double>> mats;
        for (std::size_t s = 0; s < starts.size(); ++s) mats.push_back(detail::random_admissible(rng, d, spec.delta));
        c = Coefficients(g, in_time ? CoefficientStructure::time_measurable : CoefficientStructure::x1_measurable, ell);
        const std::size_t stride = g.stride(axis);
        for (std::size_t lin = 0; lin < g.size(); ++lin)
            detail::fill_sample(c, lin, mats[detail::slab_of(starts, (lin / stride) % n)]);
    } else if (k == "checkerboard") {
        const double emax = max_checkerboard_epsilon(spec.delta);
        if (spec.epsilon < 0.0 || spec.epsilon > emax)
            throw ConfigError("checkerboard epsilon " + std::to_string(spec.epsilon) +
                              " breaks ellipticity; maximal admissible epsilon is " + std::to_string(emax));
        if (!(spec.scale > 0.0)) throw ConfigError("checkerboard cell size must be positive");
        c = Coefficients(g, CoefficientStructure::general, ell);
        const double flip = (spec.seed % 2 == 0) ? 1.0 : -1.0;
        const double side = spec.scale;
        std::vector<std::size_t> idx(static_cast<std::size_t>(d));
        for (std::size_t m = 0; m < g.nt(); ++m) {
            const auto ct = static_cast<long>(std::floor((g.coordinate(0, m) + 0.5 * g.lt()) / (side * side)));
            for (std::size_t s = 0; s < S; ++s) {
                std::size_t rem = s;
                long parity = ct;
                for (int i = d - 1; i >= 0; --i) {
                    const std::size_t mi = rem % g.nx(i);
                    rem /= g.nx(i);
                    parity += static_cast<long>(std::floor((g.coordinate(i + 1, mi) + 0.5 * g.lx(i)) / side));
                }
                const double sign = (parity % 2 == 0) ? flip : -flip;
                const std::size_t lin = m * S + s;
                for (int i = 0; i < d; ++i) c.a(i, i)[lin] = 1.0 + spec.epsilon * sign;
            }
        }
    } else if (k == "smooth") {
        const double emax = max_checkerboard_epsilon(spec.delta);
        if (spec.epsilon < 0.0 || spec.epsilon > emax)
            throw ConfigError("smooth epsilon " + std::to_string(spec.epsilon) +
                              " breaks ellipticity; maximal admissible epsilon is " + std::to_string(emax));
        const Field n = band_limited_noise(g, spec.seed, std::clamp(spec.scale, 1e-6, 1.0));
        c = Coefficients(g, CoefficientStructure::general, ell);
        for (std::size_t lin = 0; lin < g.size(); ++lin)
            for (int i = 0; i < d; ++i) c.a(i, i)[lin] = 1.0 + spec.epsilon * std::tanh(n[lin]);
    } else if (k == "random_field") {
        c = Coefficients(g, CoefficientStructure::general, ell);
        for (std::size_t lin = 0; lin < g.size(); ++lin)
            detail::fill_sample(c, lin, detail::random_admissible(rng, d, spec.delta));
    } else {
        throw ConfigError("unknown coefficient kind '" + k + "'");
    }
    c.set_spec(spec);
    return c;
}

/// Result of scanning an Assumption functional over a family of cylinders.
struct AssumptionReport {
    std::string assumption_kind;  // "time" or "x1"
    double gamma_estimate = 0.0;
    double R0 = 0.0;
    std::vector<double> r_grid;
    Cylinder worst_cylinder;
    int worst_i = 0, worst_j = 0;
    std::size_t centers_scanned = 0;
    std::vector<std::size_t> center_stride;  // per axis, time first
};

/// Scan density: at most `centers_per_axis` centers along each axis, `levels` dyadic radii.
struct AssumptionScan {
    std::size_t centers_per_axis = 8;
    int levels = 4;
};

namespace detail {

struct ScanPlan {
    std::vector<double> radii;
    std::vector<std::size_t> stride;
    std::vector<std::vector<std::size_t>> centers;  // multi-indices, time first
};

inline ScanPlan plan_scan(const Grid& g, double R0, const AssumptionScan& scan) {
    if (!(R0 > 0.0 && R0 <= 1.0)) throw ConfigError("R0 must lie in (0, 1]");
    for (int i = 0; i < g.dim(); ++i)
        if (R0 > g.lx(i) / 4.0) throw ConfigError("R0 must not exceed a quarter of every spatial period");
    if (2.0 * R0 * R0 > g.lt()) throw ConfigError("R0 cylinders exceed the time period");
    ScanPlan p;
    double hmax = 0.0;
    for (int i = 0; i < g.dim(); ++i) hmax = std::max(hmax, g.h(i));
    for (int l = 0; l < scan.levels; ++l) {
        const double r = std::ldexp(R0, -l);
        if (r < hmax) break;
        p.radii.push_back(r);
    }
    if (p.radii.empty()) throw ConfigError("R0 is below the spatial grid spacing");
    const int axes = g.dim() + 1;
    for (int a = 0; a < axes; ++a)
        p.stride.push_back(std::max<std::size_t>(1, g.extent(a) / std::max<std::size_t>(1, scan.centers_per_axis)));
    std::vector<std::size_t> idx(static_cast<std::size_t>(axes), 0);
    while (true) {
        p.centers.push_back(idx);
        int a = axes - 1;
        for (; a >= 0; --a) {
            auto& v = idx[static_cast<std::size_t>(a)];
            v += p.stride[static_cast<std::size_t>(a)];
            if (v < g.extent(a)) break;
            v = 0;
        }
        if (a < 0) break;
    }
    return p;
}

inline std::size_t wrap(long v, std::size_t n) {
    const long nn = static_cast<long>(n);
    return static_cast<std::size_t>(((v % nn) + nn) % nn);
}

/// Linear spatial index of `base + off` on the torus.
inline std::size_t spatial_index(const Grid& g, const std::vector<std::size_t>& base, const std::vector<long>& off,
                                 std::size_t first_axis = 0) {
    std::size_t lin = 0;
    for (int i = 0; i < g.dim(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const long o = ui >= first_axis && ui - first_axis < off.size() ? off[ui - first_axis] : 0;
        lin = lin * g.nx(i) + wrap(static_cast<long>(base[ui]) + o, g.nx(i));
    }
    return lin;
}

inline Cylinder cylinder_at(const Grid& g, const std::vector<std::size_t>& center, double r) {
    std::vector<double> c;
    for (int a = 0; a <= g.dim(); ++a) c.push_back(g.coordinate(a, center[static_cast<std::size_t>(a)]));
    return Cylinder::parabolic(std::move(c), r);
}

struct CenterValue {
    double value = 0.0;
    int i = 0, j = 0;
};

} // namespace detail

/// Brute-force sup of  mean_{Q_r(t,x)} |a_ij(s,y) - mean_{B_r(x)} a_ij(s,.)|  over dyadic r <= R0,
/// a strided lattice of centers, and entries i <= j.
inline AssumptionReport check_assumption_time(const Coefficients& c, double R0, const AssumptionScan& scan = {}) {
    const Grid& g = c.grid();
    const auto plan = detail::plan_scan(g, R0, scan);
    const std::size_t S = g.spatial_size();
    const int d = g.dim();
    AssumptionReport rep;
    rep.assumption_kind = "time";
    rep.R0 = R0;
    rep.r_grid = plan.radii;
    rep.center_stride = plan.stride;
    rep.centers_scanned = plan.centers.size() * plan.radii.size();
    rep.worst_cylinder = detail::cylinder_at(g, plan.centers.front(), plan.radii.front());
    for (double r : plan.radii) {
        const Stencil st = cylinder_stencil(g, r, r);
        std::vector<detail::CenterValue> vals(plan.centers.size());
        parallel_for(plan.centers.size(), [&](std::size_t ci) {
            const auto& ctr = plan.centers[ci];
            std::vector<std::size_t> sp(st.space.size());
            std::vector<std::size_t> base(ctr.begin() + 1, ctr.end());
            for (std::size_t q = 0; q < st.space.size(); ++q) sp[q] = detail::spatial_index(g, base, st.space[q]);
            detail::CenterValue best;
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j) {
                    const Field& a = c.a(i, j);
                    double acc = 0.0;
                    for (long mt : st.time) {
                        const std::size_t row = detail::wrap(static_cast<long>(ctr[0]) + mt, g.nt()) * S;
                        // Offsets from a reference sample keep constant rows exactly zero.
                        const double ref = a[row + sp.front()];
                        double mean = 0.0;
                        for (auto q : sp) mean += a[row + q] - ref;
                        mean /= static_cast<double>(sp.size());
                        for (auto q : sp) acc += std::abs(a[row + q] - ref - mean);
                    }
                    const double v = acc / static_cast<double>(st.count());
                    if (v > best.value) best = {v, i, j};
                }
            vals[ci] = best;
        });
        for (std::size_t ci = 0; ci < vals.size(); ++ci)
            if (vals[ci].value > rep.gamma_estimate) {
                rep.gamma_estimate = vals[ci].value;
                rep.worst_i = vals[ci].i;
                rep.worst_j = vals[ci].j;
                rep.worst_cylinder = detail::cylinder_at(g, plan.centers[ci], r);
            }
    }
    return rep;
}

/// Same scan for  mean_{Q_r(t,x)} |a_ij(s,y_1,y') - abar_ij(y_1)|, with abar the average of
/// a_ij(., y_1, .) over Q'_r(t,x') = (t - r^2, t + r^2) x B'_r(x'). For d = 1, Q'_r is the time interval.
inline AssumptionReport check_assumption_x1(const Coefficients& c, double R0, const AssumptionScan& scan = {}) {
    const Grid& g = c.grid();
    const auto plan = detail::plan_scan(g, R0, scan);
    const std::size_t S = g.spatial_size();
    const int d = g.dim();
    AssumptionReport rep;
    rep.assumption_kind = "x1";
    rep.R0 = R0;
    rep.r_grid = plan.radii;
    rep.center_stride = plan.stride;
    rep.centers_scanned = plan.centers.size() * plan.radii.size();
    rep.worst_cylinder = detail::cylinder_at(g, plan.centers.front(), plan.radii.front());
    for (double r : plan.radii) {
        const Stencil st = cylinder_stencil(g, r, r);
        const long lim1 = static_cast<long>(std::floor(r / g.h(0) + detail::kEdgeSlack));
        // Offsets of B'_r in the axes x_2..x_d.
        std::vector<std::vector<long>> primed;
        {
            std::vector<long> o(static_cast<std::size_t>(d - 1), 0);
            std::vector<long> lim(static_cast<std::size_t>(d - 1));
            for (int i = 1; i < d; ++i)
                lim[static_cast<std::size_t>(i - 1)] = static_cast<long>(std::floor(r / g.h(i) + detail::kEdgeSlack));
            for (auto k = 0u; k < o.size(); ++k) o[k] = -lim[k];
            while (true) {
                double r2 = 0.0;
                for (int i = 1; i < d; ++i) {
                    const double x = static_cast<double>(o[static_cast<std::size_t>(i - 1)]) * g.h(i);
                    r2 += x * x;
                }
                if (r2 <= r * r * (1.0 + 1e-12)) primed.push_back(o);
                int i = d - 2;
                for (; i >= 0; --i) {
                    auto& v = o[static_cast<std::size_t>(i)];
                    if (++v <= lim[static_cast<std::size_t>(i)]) break;
                    v = -lim[static_cast<std::size_t>(i)];
                }
                if (i < 0) break;
            }
        }
        std::vector<detail::CenterValue> vals(plan.centers.size());
        parallel_for(plan.centers.size(), [&](std::size_t ci) {
            const auto& ctr = plan.centers[ci];
            std::vector<std::size_t> base(ctr.begin() + 1, ctr.end());
            std::vector<std::size_t> rows;
            for (long mt : st.time) rows.push_back(detail::wrap(static_cast<long>(ctr[0]) + mt, g.nt()) * S);
            std::vector<std::size_t> sp(st.space.size());
            std::vector<long> sp_o1(st.space.size());
            for (std::size_t q = 0; q < st.space.size(); ++q) {
                sp[q] = detail::spatial_index(g, base, st.space[q]);
                sp_o1[q] = st.space[q][0];
            }
            // Primed-cylinder points for every x_1 offset.
            std::vector<std::vector<std::size_t>> prime_pts(static_cast<std::size_t>(2 * lim1 + 1));
            for (long o1 = -lim1; o1 <= lim1; ++o1) {
                auto& pts = prime_pts[static_cast<std::size_t>(o1 + lim1)];
                for (const auto& op : primed) {
                    std::vector<long> off{o1};
                    off.insert(off.end(), op.begin(), op.end());
                    pts.push_back(detail::spatial_index(g, base, off));
                }
            }
            detail::CenterValue best;
            std::vector<double> abar(prime_pts.size());
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j) {
                    const Field& a = c.a(i, j);
                    const double ref = a[rows.front() + sp.front()];
                    for (std::size_t k = 0; k < prime_pts.size(); ++k) {
                        double s = 0.0;
                        for (auto row : rows)
                            for (auto q : prime_pts[k]) s += a[row + q] - ref;
                        abar[k] = s / static_cast<double>(rows.size() * prime_pts[k].size());
                    }
                    double acc = 0.0;
                    for (auto row : rows)
                        for (std::size_t q = 0; q < sp.size(); ++q)
                            acc += std::abs(a[row + sp[q]] - ref - abar[static_cast<std::size_t>(sp_o1[q] + lim1)]);
                    const double v = acc / static_cast<double>(st.count());
                    if (v > best.value) best = {v, i, j};
                }
            vals[ci] = best;
        });
        for (std::size_t ci = 0; ci < vals.size(); ++ci)
            if (vals[ci].value > rep.gamma_estimate) {
                rep.gamma_estimate = vals[ci].value;
                rep.worst_i = vals[ci].i;
                rep.worst_j = vals[ci].j;
                rep.worst_cylinder = detail::cylinder_at(g, plan.centers[ci], r);
            }
    }
    return rep;
}

/// abar_ij(t) = mean over B_s(x) of a_ij(t, .), for the cylinder's ball. Tagged time_measurable.
inline Coefficients freeze_time(const Coefficients& c, const Cylinder& cyl) {
    const Grid& g = c.grid();
    check_fits(g, cyl);
    const std::size_t S = g.spatial_size();
    // The spatial ball as a set of spatial indices: points of the cylinder in one time row.
    Cylinder thin = cyl;
    thin.center[0] = g.coordinate(0, 0);
    thin.r = std::sqrt(0.5 * g.dt());
    std::vector<std::size_t> ball;
    for (auto lin : cylinder_points(g, thin))
        if (lin < S) ball.push_back(lin);
    if (ball.empty()) throw ConfigError("freezing ball contains no grid points");
    Coefficients out(g, CoefficientStructure::time_measurable, c.ellipticity());
    out.set_spec(c.spec());
    for (int i = 0; i < c.dim(); ++i)
        for (int j = 0; j < c.dim(); ++j) {
            const Field& a = c.a(i, j);
            Field& o = out.a(i, j);
            for (std::size_t m = 0; m < g.nt(); ++m) {
                double s = 0.0;
                for (auto q : ball) s += a[m * S + q];
                const double mean = s / static_cast<double>(ball.size());
                for (std::size_t q = 0; q < S; ++q) o[m * S + q] = mean;
            }
        }
    return out;
}

/// Piecewise-in-time freezing: time is tiled by slabs (b_l - R^2, b_l + R^2], b_l = t0 + 2 l R^2,
/// and on slab l the value is abar^l(y_1) = mean over Q'_R(b_l, x0') of a(., y_1, .).
/// The result depends on (t, x_1) only.
inline Coefficients freeze_x1_piecewise(const Coefficients& c, double R, double t0, const std::vector<double>& x0p) {
    const Grid& g = c.grid();
    const int d = g.dim();
    if (x0p.size() != static_cast<std::size_t>(d - 1)) throw ConfigError("x0' must have d - 1 entries");
    if (!(R > 0.0) || 2.0 * R * R > g.lt()) throw ConfigError("freezing slab does not fit the time period");
    for (int i = 1; i < d; ++i)
        if (2.0 * R > g.lx(i)) throw ConfigError("freezing ball does not fit the spatial period");
    const std::size_t S = g.spatial_size();
    const double w = 2.0 * R * R;

    // B'_R(x0') as spatial indices with x_1 index 0.
    std::vector<AxisWindow> wins;
    for (int i = 1; i < d; ++i) wins.push_back(axis_window(g, i + 1, x0p[static_cast<std::size_t>(i - 1)], R));
    std::vector<std::size_t> primed;  // linear offsets for x_2..x_d (x_1 index 0)
    {
        std::vector<std::size_t> pos(wins.size(), 0);
        bool any = true;
        for (const auto& wi : wins) any = any && !wi.index.empty();
        while (any) {
            double r2 = 0.0;
            std::size_t lin = 0;
            for (std::size_t k = 0; k < wins.size(); ++k) {
                r2 += wins[k].offset[pos[k]] * wins[k].offset[pos[k]];
                lin = lin * g.nx(static_cast<int>(k) + 1) + wins[k].index[pos[k]];
            }
            if (r2 <= R * R * (1.0 + 1e-12)) primed.push_back(lin);
            std::size_t k = wins.size();
            for (; k-- > 0;) {
                if (++pos[k] < wins[k].index.size()) break;
                pos[k] = 0;
            }
            if (k == static_cast<std::size_t>(-1)) break;
        }
        if (wins.empty()) primed.push_back(0);
    }
    if (primed.empty()) throw ConfigError("freezing ball contains no grid points");
    const std::size_t x1_stride = S / g.nx(0);

    auto slab_index = [&](double t) { return static_cast<long>(std::ceil((t - t0 + R * R) / w)) - 1; };

    Coefficients out(g, CoefficientStructure::x1_measurable, c.ellipticity());
    out.set_spec(c.spec());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const Field& a = c.a(i, j);
            Field& o = out.a(i, j);
            long cached_slab = std::numeric_limits<long>::min();
            std::vector<double> abar(g.nx(0));
            for (std::size_t m = 0; m < g.nt(); ++m) {
                const long l = slab_index(g.coordinate(0, m));
                if (l != cached_slab) {
                    const double b = t0 + static_cast<double>(l) * w;
                    const AxisWindow tw = axis_window(g, 0, b, R * R);
                    for (std::size_t y1 = 0; y1 < g.nx(0); ++y1) {
                        double s = 0.0;
                        for (auto mt : tw.index)
                            for (auto q : primed) s += a[mt * S + y1 * x1_stride + q];
                        abar[y1] = s / static_cast<double>(tw.index.size() * primed.size());
                    }
                    cached_slab = l;
                }
                for (std::size_t s = 0; s < S; ++s) o[m * S + s] = abar[s / x1_stride];
            }
        }
    // Piecewise constant in time, so only the x_1 tag is structurally meaningful on each slab.
    out.set_structure(CoefficientStructure::general);
    return out;
}

} // namespace halfheat
