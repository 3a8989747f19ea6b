#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "time_calculus.hpp"

namespace halfheat {

/// Forward differences (u(x + h e_i) - u(x)) / h_i on the torus.
inline VectorField gradient_plus(const Field& u) {
    const Grid& g = u.grid();
    std::vector<Field> comps;
    for (int i = 0; i < g.dim(); ++i) {
        const int axis = i + 1;
        const std::size_t stride = g.stride(axis);
        const std::size_t n = g.extent(axis);
        const double inv_h = 1.0 / g.h(i);
        Field out(g);
        for (std::size_t lin = 0; lin < g.size(); ++lin) {
            const std::size_t k = (lin / stride) % n;
            const std::size_t nb = (k + 1 < n) ? lin + stride : lin + stride - n * stride;
            out[lin] = (u[nb] - u[lin]) * inv_h;
        }
        comps.push_back(std::move(out));
    }
    return VectorField(std::move(comps));
}

/// Backward-difference divergence sum_i (v_i(x) - v_i(x - h e_i)) / h_i, the exact negative
/// adjoint of gradient_plus.
inline Field divergence_minus(const VectorField& v) {
    const Grid& g = v.grid();
    if (v.dim() != static_cast<std::size_t>(g.dim())) throw GridMismatch("vector field needs d components");
    Field out(g);
    for (int i = 0; i < g.dim(); ++i) {
        const Field& c = v[static_cast<std::size_t>(i)];
        const int axis = i + 1;
        const std::size_t stride = g.stride(axis);
        const std::size_t n = g.extent(axis);
        const double inv_h = 1.0 / g.h(i);
        for (std::size_t lin = 0; lin < g.size(); ++lin) {
            const std::size_t k = (lin / stride) % n;
            const std::size_t nb = (k > 0) ? lin - stride : lin + (n - 1) * stride;
            out[lin] += (c[lin] - c[nb]) * inv_h;
        }
    }
    return out;
}

/// (a w)_i = sum_j a_ij w_j, pointwise.
inline VectorField apply_matrix(const Coefficients& a, const VectorField& w) {
    const Grid& g = w.grid();
    if (a.grid() != g) throw GridMismatch("coefficients and field live on different grids");
    const int d = g.dim();
    std::vector<Field> comps;
    for (int i = 0; i < d; ++i) {
        Field out(g);
        for (int j = 0; j < d; ++j) {
            const Field& aij = a.a(i, j);
            const Field& wj = w[static_cast<std::size_t>(j)];
            for (std::size_t lin = 0; lin < g.size(); ++lin) out[lin] += aij[lin] * wj[lin];
        }
        comps.push_back(std::move(out));
    }
    return VectorField(std::move(comps));
}

/// P_lambda u = d_t u - div^-(a grad^+ u) + lambda u.
inline Field apply_operator(const Coefficients& a, double lambda, const Field& u) {
    if (a.grid() != u.grid()) throw GridMismatch("coefficients and field live on different grids");
    Field out = time_derivative(u);
    out -= divergence_minus(apply_matrix(a, gradient_plus(u)));
    out.axpy(lambda, u);
    return out;
}

/// F = (h, g, f) with lambda; f must vanish when lambda = 0.
struct DataBundle {
    Field h;
    VectorField g;
    Field f;
    double lambda = 1.0;

    static DataBundle zero(const Grid& grid, double lambda) {
        return {Field(grid), VectorField(grid), Field(grid), lambda};
    }
    const Grid& grid() const { return h.grid(); }

    void validate() const {
        if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
        h.require_same(f);
        for (const auto& c : g) h.require_same(c);
        if (g.dim() != static_cast<std::size_t>(h.grid().dim())) throw GridMismatch("g needs d components");
        if (lambda == 0.0 && lp_norm(f, INFINITY) != 0.0) throw ConfigError("f must vanish when lambda = 0");
    }
};

/// D_t^{1/2} h + div^- g + f.
inline Field apply_rhs(const DataBundle& F) {
    F.validate();
    Field out = half_derivative(F.h);
    out += divergence_minus(F.g);
    out += F.f;
    return out;
}

/// U = (D_t^{1/2} u, D^+ u, sqrt(lambda) u), stored with u itself.
struct SolutionBundle {
    Field u;
    Field half_du;
    VectorField grad;
    double lambda = 0.0;

    static SolutionBundle from(const Field& u, double lambda) {
        return {u, half_derivative(u), gradient_plus(u), lambda};
    }

    /// Components in order D_t^{1/2}u, D^+_1 u, ..., D^+_d u, sqrt(lambda) u.
    std::vector<Field> components() const {
        std::vector<Field> c{half_du};
        for (const auto& gi : grad) c.push_back(gi);
        c.push_back(std::sqrt(lambda) * u);
        return c;
    }
};

/// Components h, g_1..g_d, f / sqrt(lambda); the last slot is omitted when lambda = 0.
inline std::vector<Field> data_components(const DataBundle& F) {
    std::vector<Field> c{F.h};
    for (const auto& gi : F.g) c.push_back(gi);
    if (F.lambda > 0.0) c.push_back((1.0 / std::sqrt(F.lambda)) * F.f);
    else if (lp_norm(F.f, INFINITY) != 0.0) throw ConfigError("f must vanish when lambda = 0");
    return c;
}

/// Theta_u = sum_j a_1j (D^+ u)_j.
inline Field theta_field(const Coefficients& a, const Field& u) {
    if (a.grid() != u.grid()) throw GridMismatch("coefficients and field live on different grids");
    const VectorField du = gradient_plus(u);
    Field out(u.grid());
    for (int j = 0; j < a.dim(); ++j) out += multiply(a.a(0, j), du[static_cast<std::size_t>(j)]);
    return out;
}

} // namespace halfheat
