#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "errors.hpp"
#include "fft.hpp"
#include "gmres.hpp"
#include "operator.hpp"
#include "time_calculus.hpp"

namespace halfheat {

enum class Preconditioner { none, constant_mean };

struct SolverOptions {
    double rtol = 1e-9;
    std::size_t max_iterations = 500;
    std::size_t restart = 40;
    Preconditioner preconditioner = Preconditioner::constant_mean;
    double kappa = -1.0;  // negative: delta^2 / 2

    double kappa_for(double delta) const {
        const double k = kappa < 0.0 ? 0.5 * delta * delta : kappa;
        if (!(k > 0.0 && k <= delta)) throw ConfigError("kappa must lie in (0, delta]");
        return k;
    }
    void validate() const {
        if (!(rtol > 0.0 && rtol < 1.0)) throw ConfigError("rtol must lie in (0, 1)");
        if (restart < 1) throw ConfigError("restart length must be positive");
    }
};

struct SolveResult {
    SolutionBundle u;
    std::size_t iterations = 0;
    double final_relative_residual = 0.0;
    double wall_time = 0.0;  // seconds
    bool converged = true;
    std::vector<double> residual_history;
};

/// -H(D_t^{1/2}u).D_t^{1/2}phi + a_ij (D^+u)_j (D^+phi)_i + lambda u phi, integrated.
inline double weak_pairing(const Coefficients& a, double lambda, const Field& u, const Field& phi) {
    u.require_same(phi);
    if (a.grid() != u.grid()) throw GridMismatch("coefficients and field live on different grids");
    double s = -inner(hilbert(half_derivative(u)), half_derivative(phi));
    const VectorField du = gradient_plus(u);
    const VectorField dphi = gradient_plus(phi);
    const VectorField adu = apply_matrix(a, du);
    for (std::size_t i = 0; i < adu.dim(); ++i) s += inner(adu[i], dphi[i]);
    return s + lambda * inner(u, phi);
}

/// B_kappa[u, v] = <P_lambda u, (1 - kappa H) v> in weak form.
inline double bilinear_B_kappa(const Coefficients& a, double lambda, double kappa, const Field& u, const Field& v) {
    return weak_pairing(a, lambda, u, v - kappa * hilbert(v));
}

namespace detail {

/// Per-mode symbols of the discrete operator for a constant matrix.
struct ModeSymbols {
    const Grid& g;
    std::vector<double> a;

    double tau(long kt) const {
        if (kt == -static_cast<long>(g.nt() / 2) || kt == static_cast<long>(g.nt() / 2)) return 0.0;
        return 2.0 * std::numbers::pi * static_cast<double>(kt) / g.lt();
    }
    cplx sigma(int i, long k) const {
        const double h = g.h(i);
        const double xi = 2.0 * std::numbers::pi * static_cast<double>(k) / g.lx(i);
        return (std::exp(cplx{0.0, xi * h}) - 1.0) / h;
    }
    /// sum_ij a_ij conj(sigma_i) sigma_j
    cplx form(const std::vector<cplx>& s) const {
        const int d = g.dim();
        cplx q{0.0, 0.0};
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                q += a[static_cast<std::size_t>(i * d + j)] * std::conj(s[static_cast<std::size_t>(i)]) *
                     s[static_cast<std::size_t>(j)];
        return q;
    }
    std::vector<cplx> sigmas(const std::vector<long>& k) const {
        std::vector<cplx> s;
        for (int i = 0; i < g.dim(); ++i) s.push_back(sigma(i, k[static_cast<std::size_t>(i + 1)]));
        return s;
    }
};

inline void require_constant_matrix(const Coefficients& a) {
    if (a.structure() != CoefficientStructure::constant)
        throw ConfigError("the Fourier oracle needs coefficients tagged constant");
}

} // namespace detail

/// Applies the exact inverse of the constant-matrix operator to r. Modes where the symbol
/// vanishes (lambda = 0, zero spatial frequency, time mean or Nyquist) must carry no data.
inline Field invert_constant_operator(const std::vector<double>& matrix, double lambda, const Field& r) {
    const Grid& g = r.grid();
    detail::ModeSymbols sym{g, matrix};
    auto spec = fft::spacetime_forward(r);
    double scale = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i) scale = std::max(scale, std::abs(spec[i]));
    fft::for_each_half_mode(g, [&](std::size_t lin, const std::vector<long>& k) {
        const cplx den = cplx{0.0, sym.tau(k[0])} + sym.form(sym.sigmas(k)) + lambda;
        if (std::abs(den) == 0.0) {
            if (std::abs(spec[lin]) > 1e-12 * scale)
                throw SolverError("lambda = 0 with nonzero time-mean data: the zero mode is not invertible");
            spec[lin] = 0.0;
        } else {
            spec[lin] /= den;
        }
    });
    return fft::spacetime_backward(spec, g);
}

/// Constant-coefficient solve by per-mode division:
///   u^ = (-|tau|^{1/2} h^ - sum_i conj(sigma_i) g_i^ + f^) / (i tau + sum a_ij conj(sigma_i) sigma_j + lambda).
inline SolveResult solve_oracle(const Coefficients& a, double lambda, const DataBundle& F) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::require_constant_matrix(a);
    F.validate();
    if (F.lambda != lambda) throw ConfigError("data bundle lambda differs from the solve lambda");
    const Grid& g = F.grid();
    if (a.grid() != g) throw GridMismatch("coefficients and data live on different grids");
    const std::vector<double> matrix = a.matrix_at(0);
    detail::ModeSymbols sym{g, matrix};

    auto hs = fft::spacetime_forward(F.h);
    auto fs = fft::spacetime_forward(F.f);
    std::vector<fft::ComplexBuffer> gs;
    for (const auto& gi : F.g) gs.push_back(fft::spacetime_forward(gi));

    fft::ComplexBuffer num(hs.size());
    double scale = 0.0;
    fft::for_each_half_mode(g, [&](std::size_t lin, const std::vector<long>& k) {
        const double tau = sym.tau(k[0]);
        const auto s = sym.sigmas(k);
        cplx n = -std::sqrt(std::abs(tau)) * hs[lin] + fs[lin];
        for (std::size_t i = 0; i < gs.size(); ++i) n -= std::conj(s[i]) * gs[i][lin];
        num[lin] = n;
        scale = std::max(scale, std::abs(n));
    });
    fft::for_each_half_mode(g, [&](std::size_t lin, const std::vector<long>& k) {
        const cplx den = cplx{0.0, sym.tau(k[0])} + sym.form(sym.sigmas(k)) + lambda;
        if (std::abs(den) == 0.0) {
            if (std::abs(num[lin]) > 1e-12 * scale)
                throw SolverError("lambda = 0 with nonzero time-mean data: the zero mode is not invertible");
            num[lin] = 0.0;
        } else {
            num[lin] /= den;
        }
    });
    SolveResult res;
    res.u = SolutionBundle::from(fft::spacetime_backward(num, g), lambda);
    const Field rhs = apply_rhs(F);
    const double rn = lp_norm(rhs, 2.0);
    const Field resid = apply_operator(a, lambda, res.u.u) - rhs;
    res.final_relative_residual = rn == 0.0 ? lp_norm(resid, 2.0) : lp_norm(resid, 2.0) / rn;
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// Matrix-free restarted GMRES on apply_operator(u) = apply_rhs(F), right-preconditioned by the
/// oracle for the space-time-mean matrix. `converged` is false if max_iterations is exhausted.
inline SolveResult solve(const Coefficients& a, double lambda, const DataBundle& F, const SolverOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    opt.validate();
    if (!(lambda > 0.0)) throw ConfigError("solve requires lambda > 0");
    F.validate();
    if (F.lambda != lambda) throw ConfigError("data bundle lambda differs from the solve lambda");
    const Grid& g = F.grid();
    if (a.grid() != g) throw GridMismatch("coefficients and data live on different grids");
    const Field b = apply_rhs(F);
    const std::vector<double> mean = a.mean_matrix();

    auto A = [&](const Field& v) { return apply_operator(a, lambda, v); };
    Field x(g);
    GmresResult gr;
    if (opt.preconditioner == Preconditioner::constant_mean) {
        auto M = [&](const Field& v) { return invert_constant_operator(mean, lambda, v); };
        gr = gmres(A, M, b, x, opt.rtol, opt.restart, opt.max_iterations);
    } else {
        auto M = [](const Field& v) { return v; };
        gr = gmres(A, M, b, x, opt.rtol, opt.restart, opt.max_iterations);
    }
    SolveResult res;
    res.u = SolutionBundle::from(x, lambda);
    res.iterations = gr.iterations;
    res.final_relative_residual = gr.relative_residual;
    res.converged = gr.converged;
    res.residual_history = std::move(gr.history);
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// sup over modes of the operator norm of F^ -> U^ for a constant matrix. The map is rank one,
/// so its norm is (|tau| + |sigma|^2 + lambda) / |i tau + a sigma.sigma + lambda|.
inline double multiplier_bound(const std::vector<double>& matrix, double lambda, const Grid& g) {
    detail::ModeSymbols sym{g, matrix};
    double C = 0.0;
    fft::for_each_half_mode(g, [&](std::size_t, const std::vector<long>& k) {
        const double tau = sym.tau(k[0]);
        const auto s = sym.sigmas(k);
        double s2 = 0.0;
        for (const auto& si : s) s2 += std::norm(si);
        const double den = std::abs(cplx{0.0, tau} + sym.form(s) + lambda);
        const double num = std::abs(tau) + s2 + lambda;
        if (den > 0.0) C = std::max(C, num / den);
    });
    return C;
}

struct BundleNorms {
    SolutionBundle U;
    std::vector<double> p;
    std::vector<double> U_norm;
    std::vector<double> F_norm;
};

/// ||U||_p and ||F||_p (Euclidean in components, L_p in space-time) for every p in p_list.
inline BundleNorms compute_bundles(const Field& u, double lambda, const DataBundle& F, const std::vector<double>& p_list) {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    BundleNorms out;
    out.U = SolutionBundle::from(u, lambda);
    auto uc = out.U.components();
    if (lambda == 0.0) uc.pop_back();
    const auto fc = data_components(F);
    for (double p : p_list) {
        out.p.push_back(p);
        out.U_norm.push_back(bundle_norm(uc, p));
        out.F_norm.push_back(bundle_norm(fc, p));
    }
    return out;
}

} // namespace halfheat
