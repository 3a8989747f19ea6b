#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "fft.hpp"

namespace halfheat {

/// Time-Fourier coefficients with the symmetric 1/sqrt(2*pi) convention,
/// u~(xi_k, x) = (2*pi)^{-1/2} * sum_m u(t_m, x) exp(-i xi_k t_m) dt,  xi_k = 2*pi*k / l_t,
/// stored for k = -nt/2 .. nt/2-1 at every spatial sample.
class TimeSpectrum {
public:
    TimeSpectrum() = default;
    explicit TimeSpectrum(Grid grid)
        : grid_(std::move(grid)), coeffs_(grid_.size(), cplx{0.0, 0.0}) {}

    const Grid& grid() const noexcept { return grid_; }
    long min_mode() const noexcept { return -static_cast<long>(grid_.nt() / 2); }
    long max_mode() const noexcept { return static_cast<long>(grid_.nt() / 2) - 1; }

    cplx mode(long k, std::size_t s) const { return coeffs_[index(k, s)]; }
    cplx& mode(long k, std::size_t s) { return coeffs_[index(k, s)]; }

    /// Spacing of the frequency lattice, 2*pi/l_t.
    double dxi() const noexcept { return 2.0 * std::numbers::pi / grid_.lt(); }

    /// sum |u~|^2 * dxi * prod h_i, the spectral side of Parseval.
    double energy() const {
        double s = 0.0;
        for (const auto& c : coeffs_) s += std::norm(c);
        double w = dxi();
        for (int i = 0; i < grid_.dim(); ++i) w *= grid_.h(i);
        return s * w;
    }

private:
    std::size_t index(long k, std::size_t s) const {
        const auto shifted = static_cast<std::size_t>(k - min_mode());
        return shifted * grid_.spatial_size() + s;
    }

    Grid grid_;
    std::vector<cplx> coeffs_;
};

namespace detail {
// (-1)^k phase from the grid origin at -l_t/2, times dt / sqrt(2*pi).
inline cplx spectrum_weight(long k, const Grid& g) {
    const double w = g.dt() / std::sqrt(2.0 * std::numbers::pi);
    return (k % 2 == 0) ? cplx{w, 0.0} : cplx{-w, 0.0};
}
} // namespace detail

inline TimeSpectrum transform_time(const Field& u) {
    const Grid& g = u.grid();
    const std::size_t S = g.spatial_size();
    const long half = static_cast<long>(g.nt() / 2);
    auto raw = fft::time_forward(u);
    TimeSpectrum spec(g);
    for (long k = 0; k <= half; ++k) {
        const cplx w = detail::spectrum_weight(k, g);
        for (std::size_t s = 0; s < S; ++s) {
            const cplx c = raw[static_cast<std::size_t>(k) * S + s] * w;
            if (k < half) spec.mode(k, s) = c;
            if (k > 0) spec.mode(-k, s) = std::conj(c);
        }
    }
    return spec;
}

/// Inverse transform; returns the real part (exact for Hermitian spectra).
inline Field inverse_transform_time(const TimeSpectrum& spec) {
    const Grid& g = spec.grid();
    const std::size_t S = g.spatial_size();
    const long half = static_cast<long>(g.nt() / 2);
    fft::ComplexBuffer raw((g.nt() / 2 + 1) * S);
    for (long k = 0; k <= half; ++k) {
        const cplx w = detail::spectrum_weight(k, g);
        for (std::size_t s = 0; s < S; ++s) {
            cplx c;
            if (k == 0) {
                c = spec.mode(0, s);
            } else if (k == half) {
                c = spec.mode(-half, s);
            } else {
                // Hermitian part of the +k/-k pair.
                c = 0.5 * (spec.mode(k, s) + std::conj(spec.mode(-k, s)));
            }
            raw[static_cast<std::size_t>(k) * S + s] = c / w;
        }
    }
    return fft::time_backward(raw, g);
}

} // namespace halfheat
