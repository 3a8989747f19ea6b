#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "field.hpp"

namespace halfheat {

/// Q_{r,s}(t,x) = (t - r^2, t + r^2) x B_s(x). Q_r = Q_{r,r}.
struct Cylinder {
    std::vector<double> center;  // (t, x_1, ..., x_d)
    double r = 0.0;
    double s = 0.0;

    static Cylinder parabolic(std::vector<double> center, double r) { return {std::move(center), r, r}; }
    static Cylinder at_origin(const Grid& g, double r, double s) {
        return {std::vector<double>(static_cast<std::size_t>(g.dim() + 1), 0.0), r, s};
    }
    double time_half_length() const noexcept { return r * r; }
};

namespace detail {
inline constexpr double kEdgeSlack = 1e-9;  // in units of the grid spacing
}

/// Throws ConfigError if the cylinder is degenerate or wraps around the torus.
inline void check_fits(const Grid& g, const Cylinder& c) {
    if (c.center.size() != static_cast<std::size_t>(g.dim() + 1)) throw ConfigError("cylinder center has wrong rank");
    if (!(c.r > 0.0) || !(c.s > 0.0)) throw ConfigError("cylinder radii must be positive");
    if (2.0 * c.r * c.r > g.lt() * (1.0 + 1e-12)) throw ConfigError("cylinder time extent exceeds the time period");
    for (int i = 0; i < g.dim(); ++i)
        if (2.0 * c.s > g.lx(i) * (1.0 + 1e-12)) throw ConfigError("cylinder radius exceeds the spatial period");
}

/// Sample indices (wrapped) and signed displacements along `axis` within [c - half, c + half].
struct AxisWindow {
    std::vector<std::size_t> index;
    std::vector<double> offset;
};

inline AxisWindow axis_window(const Grid& g, int axis, double c, double half) {
    const double h = g.spacing(axis);
    const double x0 = -0.5 * g.period(axis);
    const long n = static_cast<long>(g.extent(axis));
    const long lo = static_cast<long>(std::ceil((c - half - x0) / h - detail::kEdgeSlack));
    const long hi = static_cast<long>(std::floor((c + half - x0) / h + detail::kEdgeSlack));
    AxisWindow w;
    for (long m = lo; m <= hi && m < lo + n; ++m) {
        w.index.push_back(static_cast<std::size_t>(((m % n) + n) % n));
        w.offset.push_back(x0 + static_cast<double>(m) * h - c);
    }
    return w;
}

/// Linear indices of grid points inside the closed cylinder.
inline std::vector<std::size_t> cylinder_points(const Grid& g, const Cylinder& c) {
    check_fits(g, c);
    const int d = g.dim();
    const AxisWindow tw = axis_window(g, 0, c.center[0], c.time_half_length());
    std::vector<AxisWindow> xw;
    for (int i = 0; i < d; ++i) xw.push_back(axis_window(g, i + 1, c.center[static_cast<std::size_t>(i + 1)], c.s));

    std::vector<std::size_t> spatial;
    std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
    const double s2 = c.s * c.s * (1.0 + 1e-12);
    bool empty_axis = false;
    for (const auto& w : xw) empty_axis = empty_axis || w.index.empty();
    if (!empty_axis) {
        while (true) {
            double r2 = 0.0;
            std::size_t lin = 0;
            for (int i = 0; i < d; ++i) {
                const auto k = pos[static_cast<std::size_t>(i)];
                const auto& w = xw[static_cast<std::size_t>(i)];
                r2 += w.offset[k] * w.offset[k];
                lin = lin * g.nx(i) + w.index[k];
            }
            if (r2 <= s2) spatial.push_back(lin);
            int i = d - 1;
            for (; i >= 0; --i) {
                auto& k = pos[static_cast<std::size_t>(i)];
                if (++k < xw[static_cast<std::size_t>(i)].index.size()) break;
                k = 0;
            }
            if (i < 0) break;
        }
    }
    std::vector<std::size_t> out;
    out.reserve(tw.index.size() * spatial.size());
    const std::size_t S = g.spatial_size();
    for (auto m : tw.index)
        for (auto s : spatial) out.push_back(m * S + s);
    return out;
}

/// Offsets (in samples) of a cylinder centered on a grid point.
struct Stencil {
    std::vector<long> time;
    std::vector<std::vector<long>> space;
    std::size_t count() const noexcept { return time.size() * space.size(); }
};

inline Stencil cylinder_stencil(const Grid& g, double r, double s) {
    check_fits(g, Cylinder::at_origin(g, r, s));
    Stencil st;
    const long mt = static_cast<long>(std::floor(r * r / g.dt() + detail::kEdgeSlack));
    for (long m = -mt; m <= mt; ++m) st.time.push_back(m);
    const int d = g.dim();
    std::vector<long> lim(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) lim[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(s / g.h(i) + detail::kEdgeSlack));
    std::vector<long> o(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) o[static_cast<std::size_t>(i)] = -lim[static_cast<std::size_t>(i)];
    const double s2 = s * s * (1.0 + 1e-12);
    while (true) {
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) {
            const double x = static_cast<double>(o[static_cast<std::size_t>(i)]) * g.h(i);
            r2 += x * x;
        }
        if (r2 <= s2) st.space.push_back(o);
        int i = d - 1;
        for (; i >= 0; --i) {
            auto& v = o[static_cast<std::size_t>(i)];
            if (++v <= lim[static_cast<std::size_t>(i)]) break;
            v = -lim[static_cast<std::size_t>(i)];
        }
        if (i < 0) break;
    }
    return st;
}

/// out(X) = mean of f over X + stencil, by FFT convolution with the stencil indicator.
inline Field stencil_mean(const Field& f, const Stencil& st) {
    const Grid& g = f.grid();
    Field kernel(g);
    const std::size_t S = g.spatial_size();
    const double w = 1.0 / static_cast<double>(st.count());
    for (long mt : st.time) {
        const long nt = static_cast<long>(g.nt());
        const auto ti = static_cast<std::size_t>(((-mt % nt) + nt) % nt);
        for (const auto& o : st.space) {
            std::size_t lin = 0;
            for (int i = 0; i < g.dim(); ++i) {
                const long n = static_cast<long>(g.nx(i));
                lin = lin * g.nx(i) + static_cast<std::size_t>(((-o[static_cast<std::size_t>(i)] % n) + n) % n);
            }
            kernel[ti * S + lin] = w;
        }
    }
    auto fk = fft::spacetime_forward(f);
    auto kk = fft::spacetime_forward(kernel);
    for (std::size_t i = 0; i < fk.size(); ++i) fk[i] *= kk[i];
    return fft::spacetime_backward(fk, g);
}

/// out(X) = max of f over X + stencil (separable in time; brute force over the spatial ball).
inline Field stencil_max(const Field& f, const Stencil& st) {
    const Grid& g = f.grid();
    const std::size_t S = g.spatial_size();
    const long nt = static_cast<long>(g.nt());
    const int d = g.dim();
    // Spatial max per time slice.
    Field sp(g);
    std::vector<std::size_t> idx(static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < S; ++s) {
        std::size_t rem = s;
        for (int i = d - 1; i >= 0; --i) {
            idx[static_cast<std::size_t>(i)] = rem % g.nx(i);
            rem /= g.nx(i);
        }
        std::vector<std::size_t> shifted;
        shifted.reserve(st.space.size());
        for (const auto& o : st.space) {
            std::size_t lin = 0;
            for (int i = 0; i < d; ++i) {
                const long n = static_cast<long>(g.nx(i));
                const long v = static_cast<long>(idx[static_cast<std::size_t>(i)]) + o[static_cast<std::size_t>(i)];
                lin = lin * g.nx(i) + static_cast<std::size_t>(((v % n) + n) % n);
            }
            shifted.push_back(lin);
        }
        for (std::size_t m = 0; m < g.nt(); ++m) {
            double best = -std::numeric_limits<double>::infinity();
            for (auto q : shifted) best = std::max(best, f[m * S + q]);
            sp[m * S + s] = best;
        }
    }
    Field out(g);
    for (std::size_t m = 0; m < g.nt(); ++m)
        for (std::size_t s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (long o : st.time) {
                const auto mm = static_cast<std::size_t>(((static_cast<long>(m) + o) % nt + nt) % nt);
                best = std::max(best, sp[mm * S + s]);
            }
            out[m * S + s] = best;
        }
    return out;
}

} // namespace halfheat
