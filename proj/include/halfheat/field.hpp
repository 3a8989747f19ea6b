#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace halfheat {

/// Real samples on a Grid.
class Field {
public:
    Field() = default;
    explicit Field(Grid grid) : grid_(std::move(grid)), data_(grid_.size(), 0.0) {}
    Field(Grid grid, std::vector<double> data) : grid_(std::move(grid)), data_(std::move(data)) {
        if (data_.size() != grid_.size()) throw GridMismatch("sample count does not match grid size");
    }

    static Field constant(const Grid& grid, double value) {
        Field f(grid);
        std::fill(f.data_.begin(), f.data_.end(), value);
        return f;
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }
    std::vector<double>& raw() noexcept { return data_; }
    const std::vector<double>& raw() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    Field& operator+=(const Field& o) {
        require_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        require_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Field& operator*=(double s) {
        for (auto& v : data_) v *= s;
        return *this;
    }
    /// this += s * o
    Field& axpy(double s, const Field& o) {
        require_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
        return *this;
    }

    void require_same(const Field& o) const {
        if (grid_ != o.grid_) throw GridMismatch("fields live on different grids");
    }

private:
    Grid grid_;
    std::vector<double> data_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }
inline Field operator-(Field a) { return a *= -1.0; }

/// Pointwise product.
inline Field multiply(const Field& a, const Field& b) {
    a.require_same(b);
    Field out(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

inline Field map(const Field& a, const std::function<double(double)>& fn) {
    Field out(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
    return out;
}

/// d components on one grid (g, gradients).
class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const Grid& grid)
        : components_(static_cast<std::size_t>(grid.dim()), Field(grid)) {}
    explicit VectorField(std::vector<Field> components) : components_(std::move(components)) {
        for (std::size_t i = 1; i < components_.size(); ++i) components_[0].require_same(components_[i]);
    }

    std::size_t dim() const noexcept { return components_.size(); }
    const Field& operator[](std::size_t i) const { return components_.at(i); }
    Field& operator[](std::size_t i) { return components_.at(i); }
    const Grid& grid() const { return components_.at(0).grid(); }
    auto begin() const { return components_.begin(); }
    auto end() const { return components_.end(); }

private:
    std::vector<Field> components_;
};

/// Rectangle-rule L_p norm; p = infinity gives the max-abs.
inline double lp_norm(const Field& u, double p) {
    if (!(p >= 1.0)) throw ConfigError("lp_norm requires p >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : u.values()) m = std::max(m, std::abs(v));
        return m;
    }
    double s = 0.0;
    if (p == 2.0) {
        for (double v : u.values()) s += v * v;
        return std::sqrt(s * u.grid().cell_measure());
    }
    for (double v : u.values()) s += std::pow(std::abs(v), p);
    return std::pow(s * u.grid().cell_measure(), 1.0 / p);
}

/// Discrete integral of a*b.
inline double inner(const Field& a, const Field& b) {
    a.require_same(b);
    double s = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
    return s * a.grid().cell_measure();
}

/// L_p norm of the pointwise Euclidean magnitude of a list of component fields.
inline double bundle_norm(std::span<const Field> components, double p) {
    if (components.empty()) return 0.0;
    const Grid& g = components[0].grid();
    Field mag(g);
    for (const auto& c : components) {
        c.require_same(components[0]);
        for (std::size_t i = 0; i < g.size(); ++i) mag[i] += c[i] * c[i];
    }
    for (auto& v : mag.raw()) v = std::sqrt(v);
    return lp_norm(mag, p);
}

inline double relative_difference(const Field& a, const Field& b) {
    const double den = std::max(lp_norm(a, 2.0), lp_norm(b, 2.0));
    const double num = lp_norm(a - b, 2.0);
    if (den == 0.0) return num;
    return num / den;
}

} // namespace halfheat
