#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace halfheat {

inline constexpr std::size_t kDefaultSampleCap = std::size_t{1} << 24;

/// Periodic space-time lattice. Axis 0 is time; axes 1..d are space.
///
/// Sample m on an axis of period l and n samples sits at -l/2 + m*l/n, so the
/// origin is the sample with index n/2. Storage is row-major with time slowest.
class Grid {
public:
    Grid() = default;

    int dim() const noexcept { return static_cast<int>(nx_.size()); }
    std::size_t nt() const noexcept { return nt_; }
    std::size_t nx(int axis) const { return nx_.at(static_cast<std::size_t>(axis)); }
    const std::vector<std::size_t>& nx() const noexcept { return nx_; }
    double lt() const noexcept { return lt_; }
    double lx(int axis) const { return lx_.at(static_cast<std::size_t>(axis)); }
    const std::vector<double>& lx() const noexcept { return lx_; }

    double dt() const noexcept { return lt_ / static_cast<double>(nt_); }
    double h(int axis) const { return lx(axis) / static_cast<double>(nx(axis)); }

    /// Number of samples in one time slice.
    std::size_t spatial_size() const noexcept {
        std::size_t s = 1;
        for (auto n : nx_) s *= n;
        return s;
    }
    std::size_t size() const noexcept { return nt_ * spatial_size(); }

    /// Quadrature weight dt * prod h_i.
    double cell_measure() const noexcept {
        double m = dt();
        for (int i = 0; i < dim(); ++i) m *= h(i);
        return m;
    }
    double total_measure() const noexcept {
        double m = lt_;
        for (double l : lx_) m *= l;
        return m;
    }

    /// Samples along axis a (0 = time, i+1 = x_{i+1}).
    std::size_t extent(int axis) const { return axis == 0 ? nt_ : nx(axis - 1); }
    double period(int axis) const { return axis == 0 ? lt_ : lx(axis - 1); }
    double spacing(int axis) const { return period(axis) / static_cast<double>(extent(axis)); }
    double coordinate(int axis, std::size_t m) const {
        return -0.5 * period(axis) + static_cast<double>(m) * spacing(axis);
    }
    /// Linear-index stride along axis a.
    std::size_t stride(int axis) const {
        std::size_t s = 1;
        for (int b = dim(); b > axis; --b) s *= extent(b);
        return s;
    }

    bool operator==(const Grid& o) const noexcept {
        return nt_ == o.nt_ && nx_ == o.nx_ && lt_ == o.lt_ && lx_ == o.lx_;
    }
    bool operator!=(const Grid& o) const noexcept { return !(*this == o); }

    std::string describe() const {
        std::string s = "d=" + std::to_string(dim()) + " nt=" + std::to_string(nt_);
        for (auto n : nx_) s += " nx=" + std::to_string(n);
        return s;
    }

private:
    friend Grid make_grid(int, std::size_t, const std::vector<std::size_t>&, double,
                          const std::vector<double>&, std::size_t);

    std::size_t nt_ = 0;
    std::vector<std::size_t> nx_;
    double lt_ = 0.0;
    std::vector<double> lx_;
};

namespace detail {
inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void check_axis(const std::string& name, std::size_t n, double l) {
    if (n % 2 != 0) throw ConfigError(name + " must be even");
    if (n < 8) throw ConfigError(name + " must be at least 8");
    if (!is_pow2(n)) throw ConfigError(name + " must be a power of two");
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("period of " + name + " must be positive");
}
} // namespace detail

/// Validated grid construction; throws ConfigError on any violated invariant.
inline Grid make_grid(int d, std::size_t n_t, const std::vector<std::size_t>& n_x, double l_t,
                      const std::vector<double>& l_x, std::size_t cap = kDefaultSampleCap) {
    if (d < 1 || d > 3) throw ConfigError("spatial dimension must be 1, 2 or 3");
    if (n_x.size() != static_cast<std::size_t>(d) || l_x.size() != static_cast<std::size_t>(d))
        throw ConfigError("n_x and l_x must have d entries");
    detail::check_axis("n_t", n_t, l_t);
    std::size_t total = n_t;
    for (int i = 0; i < d; ++i) {
        detail::check_axis("n_x[" + std::to_string(i) + "]", n_x[static_cast<std::size_t>(i)],
                           l_x[static_cast<std::size_t>(i)]);
        total *= n_x[static_cast<std::size_t>(i)];
        if (total > cap) break;
    }
    if (total > cap)
        throw ConfigError("grid exceeds the sample cap of " + std::to_string(cap));
    Grid g;
    g.nt_ = n_t;
    g.nx_ = n_x;
    g.lt_ = l_t;
    g.lx_ = l_x;
    return g;
}

/// Same lattice with every sample count multiplied by `factor` (periods unchanged).
inline Grid refine(const Grid& g, std::size_t factor) {
    std::vector<std::size_t> nx = g.nx();
    for (auto& n : nx) n *= factor;
    return make_grid(g.dim(), g.nt() * factor, nx, g.lt(), g.lx());
}

} // namespace halfheat
