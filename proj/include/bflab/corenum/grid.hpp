#ifndef BFLAB_CORENUM_GRID_HPP
#define BFLAB_CORENUM_GRID_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bflab/corenum/error.hpp"

namespace bflab::corenum {

/// Uniform sampling of [lo, hi] with n nodes, endpoints included.
class Grid1D
{
public:
    Grid1D(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi), n_(n)
    {
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
            throw InputError("grid requires finite lo < hi");
        if (n < 2)
            throw InputError("grid requires at least 2 nodes, got " + std::to_string(n));
    }

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    std::size_t size() const noexcept { return n_; }
    double spacing() const noexcept { return (hi_ - lo_) / static_cast<double>(n_ - 1); }

    double operator[](std::size_t i) const noexcept
    {
        // exact endpoints
        if (i + 1 == n_)
            return hi_;
        return lo_ + spacing() * static_cast<double>(i);
    }

    std::vector<double> nodes() const
    {
        std::vector<double> out(n_);
        for (std::size_t i = 0; i < n_; ++i)
            out[i] = (*this)[i];
        return out;
    }

    /// Composite trapezoid weights.
    std::vector<double> trapezoid_weights() const
    {
        std::vector<double> w(n_, spacing());
        w.front() *= 0.5;
        w.back() *= 0.5;
        return w;
    }

    bool contains(double v) const noexcept { return v >= lo_ && v <= hi_; }

    bool operator==(const Grid1D&) const = default;

private:
    double lo_;
    double hi_;
    std::size_t n_;
};

/// Rectangular grid over (x, p).
struct PhaseSpaceGrid
{
    Grid1D x;
    Grid1D p;

    bool operator==(const PhaseSpaceGrid&) const = default;
};

} // namespace bflab::corenum

#endif // BFLAB_CORENUM_GRID_HPP
