#pragma once

#include <complex>
#include <cstddef>
#include <cstring>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "field.hpp"

namespace halfheat {

using cplx = std::complex<double>;

namespace fft {

/// fftw_malloc'd storage so every execution matches the alignment used at plan time.
template <typename T>
class AlignedBuffer {
public:
    explicit AlignedBuffer(std::size_t n) : n_(n), p_(static_cast<T*>(fftw_malloc(sizeof(T) * (n ? n : 1)))) {
        if (!p_) throw std::bad_alloc();
    }
    AlignedBuffer(const AlignedBuffer&) = delete;
    AlignedBuffer& operator=(const AlignedBuffer&) = delete;
    AlignedBuffer(AlignedBuffer&& o) noexcept : n_(o.n_), p_(o.p_) { o.p_ = nullptr; o.n_ = 0; }
    ~AlignedBuffer() { if (p_) fftw_free(p_); }

    T* data() noexcept { return p_; }
    const T* data() const noexcept { return p_; }
    std::size_t size() const noexcept { return n_; }
    T& operator[](std::size_t i) noexcept { return p_[i]; }
    const T& operator[](std::size_t i) const noexcept { return p_[i]; }

private:
    std::size_t n_;
    T* p_;
};

using RealBuffer = AlignedBuffer<double>;
using ComplexBuffer = AlignedBuffer<cplx>;

inline fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

/// Process-wide plan cache. Planning is serialized; execution uses the
/// new-array interface and is safe from any thread.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }
    ~PlanCache() {
        for (auto& [k, p] : plans_) fftw_destroy_plan(p);
    }

    /// Batched 1-D transforms along time for every spatial sample.
    fftw_plan time_plan(std::size_t nt, std::size_t lines, bool forward) {
        const std::string key = std::string(forward ? "tf" : "tb") + std::to_string(nt) + ":" + std::to_string(lines);
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        RealBuffer r(nt * lines);
        ComplexBuffer c((nt / 2 + 1) * lines);
        int n = static_cast<int>(nt);
        const int howmany = static_cast<int>(lines);
        const int stride = static_cast<int>(lines);
        fftw_plan p = forward
            ? fftw_plan_many_dft_r2c(1, &n, howmany, r.data(), nullptr, stride, 1, as_fftw(c.data()), nullptr,
                                     stride, 1, FFTW_ESTIMATE)
            : fftw_plan_many_dft_c2r(1, &n, howmany, as_fftw(c.data()), nullptr, stride, 1, r.data(), nullptr,
                                     stride, 1, FFTW_ESTIMATE);
        plans_.emplace(key, p);
        return p;
    }

    /// Full (d+1)-dimensional real transform, time first.
    fftw_plan spacetime_plan(const std::vector<int>& dims, bool forward) {
        std::string key = forward ? "sf" : "sb";
        for (int n : dims) key += ":" + std::to_string(n);
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        std::size_t total = 1;
        for (int n : dims) total *= static_cast<std::size_t>(n);
        const std::size_t half = total / static_cast<std::size_t>(dims.back()) *
                                 (static_cast<std::size_t>(dims.back()) / 2 + 1);
        RealBuffer r(total);
        ComplexBuffer c(half);
        const int rank = static_cast<int>(dims.size());
        fftw_plan p = forward ? fftw_plan_dft_r2c(rank, dims.data(), r.data(), as_fftw(c.data()), FFTW_ESTIMATE)
                              : fftw_plan_dft_c2r(rank, dims.data(), as_fftw(c.data()), r.data(), FFTW_ESTIMATE);
        plans_.emplace(key, p);
        return p;
    }

    fftw_plan complex_plan(const std::vector<int>& dims, bool forward) {
        std::string key = forward ? "cf" : "cb";
        for (int n : dims) key += ":" + std::to_string(n);
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        std::size_t total = 1;
        for (int n : dims) total *= static_cast<std::size_t>(n);
        ComplexBuffer a(total), b(total);
        fftw_plan p = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), as_fftw(a.data()), as_fftw(b.data()),
                                    forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
        plans_.emplace(key, p);
        return p;
    }

private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::string, fftw_plan> plans_;
};

/// Signed frequency index of FFT bin m on an axis with n bins.
inline long signed_mode(std::size_t m, std::size_t n) {
    return m < n / 2 ? static_cast<long>(m) : static_cast<long>(m) - static_cast<long>(n);
}

/// Unnormalized forward time transform; bins k = 0..nt/2 for each spatial sample, layout [k][s].
inline ComplexBuffer time_forward(const Field& u) {
    const Grid& g = u.grid();
    const std::size_t S = g.spatial_size();
    RealBuffer in(g.size());
    std::memcpy(in.data(), u.raw().data(), sizeof(double) * g.size());
    ComplexBuffer out((g.nt() / 2 + 1) * S);
    fftw_execute_dft_r2c(PlanCache::instance().time_plan(g.nt(), S, true), in.data(), as_fftw(out.data()));
    return out;
}

/// Inverse of time_forward including the 1/nt normalization. Consumes `spec`.
inline Field time_backward(ComplexBuffer& spec, const Grid& g) {
    const std::size_t S = g.spatial_size();
    RealBuffer out(g.size());
    fftw_execute_dft_c2r(PlanCache::instance().time_plan(g.nt(), S, false), as_fftw(spec.data()), out.data());
    Field f(g);
    const double scale = 1.0 / static_cast<double>(g.nt());
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = out[i] * scale;
    return f;
}

inline std::vector<int> spacetime_dims(const Grid& g) {
    std::vector<int> dims{static_cast<int>(g.nt())};
    for (auto n : g.nx()) dims.push_back(static_cast<int>(n));
    return dims;
}

/// Number of complex bins of the half-spectrum along the last spatial axis.
inline std::size_t half_spectrum_size(const Grid& g) {
    return g.size() / g.nx().back() * (g.nx().back() / 2 + 1);
}

/// Unnormalized (d+1)-dimensional forward transform (half spectrum on the last axis).
inline ComplexBuffer spacetime_forward(const Field& u) {
    const Grid& g = u.grid();
    RealBuffer in(g.size());
    std::memcpy(in.data(), u.raw().data(), sizeof(double) * g.size());
    ComplexBuffer out(half_spectrum_size(g));
    fftw_execute_dft_r2c(PlanCache::instance().spacetime_plan(spacetime_dims(g), true), in.data(),
                         as_fftw(out.data()));
    return out;
}

/// Normalized inverse of spacetime_forward. Consumes `spec`.
inline Field spacetime_backward(ComplexBuffer& spec, const Grid& g) {
    RealBuffer out(g.size());
    fftw_execute_dft_c2r(PlanCache::instance().spacetime_plan(spacetime_dims(g), false), as_fftw(spec.data()),
                         out.data());
    Field f(g);
    const double scale = 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = out[i] * scale;
    return f;
}

/// Visits every bin of the half spectrum with its signed (k_t, k_1, ..., k_d) indices.
template <typename Visitor>
void for_each_half_mode(const Grid& g, Visitor&& visit) {
    const int d = g.dim();
    std::vector<std::size_t> ext{g.nt()};
    for (int i = 0; i < d; ++i) ext.push_back(g.nx(i));
    ext.back() = ext.back() / 2 + 1;
    std::vector<std::size_t> idx(ext.size(), 0);
    std::vector<long> k(ext.size(), 0);
    const std::size_t total = half_spectrum_size(g);
    for (std::size_t lin = 0; lin < total; ++lin) {
        k[0] = signed_mode(idx[0], g.nt());
        for (int i = 0; i < d; ++i) {
            const auto a = static_cast<std::size_t>(i + 1);
            k[a] = (a + 1 == ext.size()) ? static_cast<long>(idx[a]) : signed_mode(idx[a], g.nx(i));
        }
        visit(lin, std::as_const(k));
        for (std::size_t a = ext.size(); a-- > 0;) {
            if (++idx[a] < ext[a]) break;
            idx[a] = 0;
        }
    }
}

/// Normalized inverse of a full complex (d+1)-dimensional spectrum; returns the real part.
inline Field complex_backward_real(ComplexBuffer& spec, const Grid& g) {
    ComplexBuffer out(g.size());
    fftw_execute_dft(PlanCache::instance().complex_plan(spacetime_dims(g), false), as_fftw(spec.data()),
                     as_fftw(out.data()));
    Field f(g);
    const double scale = 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = out[i].real() * scale;
    return f;
}

} // namespace fft
} // namespace halfheat
