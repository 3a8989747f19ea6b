#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "fft.hpp"
#include "field.hpp"

namespace halfheat {

enum class TimeSymbolKind { hilbert, half_derivative, time_derivative };

/// Per-mode multiplier of the three time operators. The time mean (k = 0) follows the
/// symbol; the Nyquist mode k = -nt/2 is zeroed in every variant.
inline cplx time_symbol(TimeSymbolKind kind, long k, const Grid& g) {
    if (k == -static_cast<long>(g.nt() / 2) || k == static_cast<long>(g.nt() / 2)) return {0.0, 0.0};
    const double xi = 2.0 * std::numbers::pi * static_cast<double>(k) / g.lt();
    switch (kind) {
    case TimeSymbolKind::hilbert:
        return {0.0, k > 0 ? -1.0 : (k < 0 ? 1.0 : 0.0)};
    case TimeSymbolKind::half_derivative:
        return {-std::sqrt(std::abs(xi)), 0.0};
    case TimeSymbolKind::time_derivative:
        return {0.0, xi};
    }
    return {0.0, 0.0};
}

/// Applies a Hermitian time multiplier m(k) (m(-k) = conj m(k)) to every spatial line.
template <typename Multiplier>
Field apply_time_multiplier(const Field& u, Multiplier&& m) {
    const Grid& g = u.grid();
    const std::size_t S = g.spatial_size();
    const long half = static_cast<long>(g.nt() / 2);
    auto spec = fft::time_forward(u);
    for (long k = 0; k <= half; ++k) {
        const cplx mk = (k == half) ? cplx{0.0, 0.0} : cplx(m(k));
        cplx* row = spec.data() + static_cast<std::size_t>(k) * S;
        for (std::size_t s = 0; s < S; ++s) row[s] *= mk;
    }
    return fft::time_backward(spec, g);
}

inline Field apply_time_symbol(const Field& u, TimeSymbolKind kind) {
    const Grid& g = u.grid();
    return apply_time_multiplier(u, [&](long k) { return time_symbol(kind, k, g); });
}

/// Hilbert transform in time, symbol -i sgn(k).
inline Field hilbert(const Field& u) { return apply_time_symbol(u, TimeSymbolKind::hilbert); }

/// D_t^{1/2} = -(-d^2/dt^2)^{1/4}, symbol -|xi|^{1/2}.
inline Field half_derivative(const Field& u) { return apply_time_symbol(u, TimeSymbolKind::half_derivative); }

/// Spectral d/dt with the Nyquist mode removed.
inline Field time_derivative(const Field& u) { return apply_time_symbol(u, TimeSymbolKind::time_derivative); }

/// Removes the time mean and the time-Nyquist mode, the subspace on which H is an isometry.
inline Field remove_time_mean_and_nyquist(const Field& u) {
    return apply_time_multiplier(u, [](long k) { return k == 0 ? 0.0 : 1.0; });
}

namespace detail {
inline constexpr double kZetaMinusHalf = -0.20788622497735456602; // zeta(-1/2)
}

/// D_t^{1/2} by direct quadrature of
///   (8*pi)^{-1/2} * integral (u(t+l) - u(t)) / |l|^{3/2} dl
/// over |l| <= truncation_periods * l_t on the periodic extension.
///
/// The integrand is symmetrized, (u(t+l) + u(t-l) - 2u(t)) / l^{3/2}, and summed at l = j*dt.
/// Two analytic pieces are added: the generalized Euler-Maclaurin term -zeta(-1/2) u''(t) dt^{3/2}
/// for the l^{1/2} behaviour at the origin (u'' by centered second difference), and the exact
/// tail beyond the truncation with u(t +- l) replaced by the line mean. Only the oscillating
/// remainder of that tail is dropped.
inline Field half_derivative_quadrature(const Field& u, int truncation_periods) {
    if (truncation_periods < 1) throw ConfigError("truncation_periods must be at least 1");
    const Grid& g = u.grid();
    const std::size_t nt = g.nt();
    const std::size_t S = g.spatial_size();
    const double dt = g.dt();
    const std::size_t J = static_cast<std::size_t>(truncation_periods) * nt;

    std::vector<double> weight(J + 1, 0.0);
    for (std::size_t j = 1; j <= J; ++j) weight[j] = dt * std::pow(static_cast<double>(j) * dt, -1.5);
    const double a = static_cast<double>(J) + 0.5;
    // dt * sum_{j > J} (j dt)^{-3/2}, Euler-Maclaurin about the cell edge J + 1/2.
    const double tail = std::pow(dt, -0.5) * (2.0 / std::sqrt(a) + std::pow(a, -2.5) / 16.0);
    const double origin = -detail::kZetaMinusHalf * std::pow(dt, 1.5);
    const double norm = 1.0 / std::sqrt(8.0 * std::numbers::pi);

    Field out(g);
    std::vector<double> line(nt);
    for (std::size_t s = 0; s < S; ++s) {
        double mean = 0.0;
        for (std::size_t m = 0; m < nt; ++m) {
            line[m] = u[m * S + s];
            mean += line[m];
        }
        mean /= static_cast<double>(nt);
        for (std::size_t m = 0; m < nt; ++m) {
            const double c = line[m];
            double acc = 0.0;
            for (std::size_t j = 1; j <= J; ++j) {
                const std::size_t jp = (m + j) % nt;
                const std::size_t jm = (m + nt - j % nt) % nt;
                acc += weight[j] * (line[jp] + line[jm] - 2.0 * c);
            }
            const double second = (line[(m + 1) % nt] + line[(m + nt - 1) % nt] - 2.0 * c) / (dt * dt);
            acc += -2.0 * (c - mean) * tail + origin * second;
            out[m * S + s] = norm * acc;
        }
    }
    return out;
}

/// Samples of the cutoff eta_k on the time axis.
struct CutoffProfile {
    int level = 0;
    std::vector<double> samples;  // indexed by time sample m

    /// Field equal to eta_k(t) at every spatial point.
    Field broadcast(const Grid& g) const {
        Field f(g);
        const std::size_t S = g.spatial_size();
        for (std::size_t m = 0; m < g.nt(); ++m)
            for (std::size_t s = 0; s < S; ++s) f[m * S + s] = samples[m];
        return f;
    }
};

/// Quintic smoothstep 6x^5 - 15x^4 + 10x^3 on [0,1]; its slope peaks at 15/8.
inline double smoothstep5(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

/// eta_k: 1 on (-2^k, 2^k), 0 outside (-2^{k+1}, 2^{k+1}), quintic ramps in between.
inline double cutoff_value(int k, double t) {
    const double inner = std::ldexp(1.0, k);
    return 1.0 - smoothstep5((std::abs(t) - inner) / inner);
}

inline CutoffProfile cutoff_eta(int k, const Grid& g) {
    if (k < 0) throw ConfigError("cutoff level must be non-negative");
    if (!(std::ldexp(1.0, k + 1) < 0.5 * g.lt()))
        throw ConfigError("cutoff eta_" + std::to_string(k) + " does not fit in the time period");
    CutoffProfile p;
    p.level = k;
    p.samples.resize(g.nt());
    for (std::size_t m = 0; m < g.nt(); ++m) p.samples[m] = cutoff_value(k, g.coordinate(0, m));
    return p;
}

/// u_k = D_t^{1/2}(u eta_k) - eta_k D_t^{1/2} u, computed spectrally.
inline Field cutoff_commutator(const Field& u, int k) {
    const Field eta = cutoff_eta(k, u.grid()).broadcast(u.grid());
    return half_derivative(multiply(u, eta)) - multiply(eta, half_derivative(u));
}

} // namespace halfheat
