#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "field.hpp"

namespace halfheat {

struct GmresResult {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    std::vector<double> history;  // relative residual estimate after each inner step
};

namespace detail {
inline double dot(const Field& a, const Field& b) {
    double s = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
    return s;
}
inline double norm2(const Field& a) { return std::sqrt(dot(a, a)); }
} // namespace detail

/// Restarted GMRES(m) with right preconditioning: solves A M^{-1} y = b, x = x0 + M^{-1} y.
/// The Arnoldi residual is therefore the residual of the original system.
/// `x` holds the initial guess on entry and the solution on exit.
template <typename ApplyA, typename ApplyMinv>
GmresResult gmres(ApplyA&& A, ApplyMinv&& Minv, const Field& b, Field& x, double rtol, std::size_t restart,
                  std::size_t max_iterations) {
    GmresResult res;
    const double bnorm = detail::norm2(b);
    if (bnorm == 0.0) {
        x = Field(b.grid());
        res.converged = true;
        return res;
    }
    const std::size_t m = restart;
    std::vector<Field> V;
    std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m), sn(m), g(m + 1);

    Field r = b - A(x);
    double beta = detail::norm2(r);
    res.relative_residual = beta / bnorm;
    while (res.relative_residual > rtol && res.iterations < max_iterations) {
        V.clear();
        V.push_back((1.0 / beta) * r);
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        std::size_t k = 0;
        for (; k < m && res.iterations < max_iterations; ++k) {
            Field w = A(Minv(V[k]));
            for (std::size_t i = 0; i <= k; ++i) {
                H[i][k] = detail::dot(w, V[i]);
                w.axpy(-H[i][k], V[i]);
            }
            const double wn = detail::norm2(w);
            H[k + 1][k] = wn;
            for (std::size_t i = 0; i < k; ++i) {
                const double t = cs[i] * H[i][k] + sn[i] * H[i + 1][k];
                H[i + 1][k] = -sn[i] * H[i][k] + cs[i] * H[i + 1][k];
                H[i][k] = t;
            }
            const double den = std::hypot(H[k][k], H[k + 1][k]);
            cs[k] = den == 0.0 ? 1.0 : H[k][k] / den;
            sn[k] = den == 0.0 ? 0.0 : H[k + 1][k] / den;
            H[k][k] = den;
            H[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++res.iterations;
            res.history.push_back(std::abs(g[k + 1]) / bnorm);
            // Converged, or happy breakdown (the Krylov space is invariant).
            if (res.history.back() <= rtol || wn == 0.0) { ++k; break; }
            V.push_back((1.0 / wn) * w);
        }
        // Back substitution for y, then x += M^{-1} (V y).
        std::vector<double> y(k, 0.0);
        for (std::size_t i = k; i-- > 0;) {
            double s = g[i];
            for (std::size_t j = i + 1; j < k; ++j) s -= H[i][j] * y[j];
            y[i] = H[i][i] == 0.0 ? 0.0 : s / H[i][i];
        }
        Field update(b.grid());
        for (std::size_t i = 0; i < k; ++i) update.axpy(y[i], V[i]);
        x += Minv(update);
        r = b - A(x);
        beta = detail::norm2(r);
        res.relative_residual = beta / bnorm;
        if (beta == 0.0) break;
    }
    res.converged = res.relative_residual <= rtol;
    return res;
}

} // namespace halfheat
