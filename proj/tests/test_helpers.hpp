#pragma once

#include <numbers>
#include <string>

#include <halfheat/halfheat.hpp>

namespace testutil {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline halfheat::Grid line_grid(std::size_t nt = 64, double lt = kTwoPi, std::size_t nx = 16, double lx = 1.0) {
    return halfheat::make_grid(1, nt, {nx}, lt, {lx});
}

/// Band-limited random field with a distinct seed per call site.
inline halfheat::Field noise(const halfheat::Grid& g, int seed, double band = 0.5) {
    return halfheat::band_limited_noise(g, static_cast<std::uint64_t>(seed), band);
}

inline double rel(const halfheat::Field& a, const halfheat::Field& b) { return halfheat::relative_difference(a, b); }

inline double rel(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

} // namespace testutil
