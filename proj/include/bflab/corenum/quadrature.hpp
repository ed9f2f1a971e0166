#ifndef BFLAB_CORENUM_QUADRATURE_HPP
#define BFLAB_CORENUM_QUADRATURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "bflab/corenum/error.hpp"
#include "bflab/corenum/grid.hpp"

namespace bflab::corenum {

using complex = std::complex<double>;

namespace detail {

inline bool finite(double v) { return std::isfinite(v); }
inline bool finite(const complex& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

// Gauss-Kronrod 7/15 abscissae on [-1, 1] (positive half, descending) and weights.
inline constexpr std::array<double, 8> gk15_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> gk15_kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
inline constexpr std::array<double, 4> gk15_gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template < typename T >
struct Panel
{
    double lo;
    double hi;
    T value;
    double error;
    double abs_value;

    bool operator<(const Panel& other) const { return error < other.error; }
};

template < typename T, typename F >
Panel< T > gk15(F& f, double lo, double hi)
{
    const double centre = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    T kronrod{};
    T gauss{};
    double abs_sum = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
        const double dx = half * gk15_nodes[k];
        if (k == 7) {
            const T fc = f(centre);
            if (!finite(fc))
                throw NumericError("non-finite integrand value at x = " + std::to_string(centre));
            kronrod += gk15_kronrod_weights[k] * fc;
            gauss += gk15_gauss_weights[3] * fc;
            abs_sum += gk15_kronrod_weights[k] * std::abs(fc);
            continue;
        }
        const T f1 = f(centre - dx);
        const T f2 = f(centre + dx);
        if (!finite(f1) || !finite(f2))
            throw NumericError("non-finite integrand value near x = " + std::to_string(centre));
        kronrod += gk15_kronrod_weights[k] * (f1 + f2);
        abs_sum += gk15_kronrod_weights[k] * (std::abs(f1) + std::abs(f2));
        if (k % 2 == 1)
            gauss += gk15_gauss_weights[k / 2] * (f1 + f2);
    }
    return {lo, hi, kronrod * half, std::abs((kronrod - gauss) * half), abs_sum * std::abs(half)};
}

} // namespace detail

/// Composite trapezoid rule for samples on a uniform grid.
inline double integrate_1d(std::span< const double > samples, const Grid1D& grid)
{
    if (samples.size() != grid.size())
        throw InputError("sample count " + std::to_string(samples.size()) + " does not match grid size " +
                         std::to_string(grid.size()));
    double interior = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i]))
            throw NumericError("non-finite sample at index " + std::to_string(i));
        if (i != 0 && i + 1 != samples.size())
            interior += samples[i];
    }
    return grid.spacing() * (interior + 0.5 * (samples.front() + samples.back()));
}

struct QuadratureOptions
{
    double rel_tol = 1e-9;
    double abs_tol = 0.0;
    std::size_t max_panels = 4000;
    /// Equal-width panels evaluated before adaptive refinement starts; guards
    /// against narrow peaks that a single 15-point rule would step over.
    std::size_t initial_panels = 1;
};

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [lo, hi].
///
/// Panels are bisected in order of decreasing error estimate until the summed
/// estimate drops below max(rel_tol * |I|, abs_tol) or reaches the rounding
/// floor of the integrand magnitude. Throws ConvergenceError when the panel
/// budget runs out first. Works for real and complex integrands.
template < typename F >
auto adaptive_integrate(F&& f, double lo, double hi, const QuadratureOptions& opt = {})
{
    using T = std::decay_t< std::invoke_result_t< F&, double > >;
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw InputError("adaptive_integrate requires finite lo < hi");
    if (!(opt.rel_tol > 0.0) || opt.rel_tol > 1e-2)
        throw InputError("adaptive_integrate rel_tol must lie in (0, 1e-2]");
    if (opt.initial_panels == 0 || opt.initial_panels > opt.max_panels)
        throw InputError("adaptive_integrate initial_panels must lie in [1, max_panels]");

    constexpr double eps = std::numeric_limits< double >::epsilon();
    std::priority_queue< detail::Panel< T > > panels;
    T total{};
    double total_error = 0.0;
    double total_abs = 0.0;
    const double width = (hi - lo) / static_cast< double >(opt.initial_panels);
    for (std::size_t k = 0; k < opt.initial_panels; ++k) {
        const double a = lo + width * static_cast< double >(k);
        const double b = (k + 1 == opt.initial_panels) ? hi : lo + width * static_cast< double >(k + 1);
        auto panel = detail::gk15< T >(f, a, b);
        total += panel.value;
        total_error += panel.error;
        total_abs += panel.abs_value;
        panels.push(panel);
    }

    auto converged = [&] {
        const double target = std::max({opt.rel_tol * std::abs(total), opt.abs_tol, 50.0 * eps * total_abs});
        return total_error <= target;
    };

    while (!converged()) {
        if (panels.size() >= opt.max_panels)
            throw ConvergenceError("adaptive quadrature did not converge on [" + std::to_string(lo) + ", " +
                                   std::to_string(hi) + "] within " + std::to_string(opt.max_panels) +
                                   " panels (error estimate " + std::to_string(total_error) + ")");
        auto worst = panels.top();
        panels.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi))
            throw ConvergenceError("adaptive quadrature exhausted floating-point resolution near x = " +
                                   std::to_string(mid));
        auto left = detail::gk15< T >(f, worst.lo, mid);
        auto right = detail::gk15< T >(f, mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        total_abs += left.abs_value + right.abs_value - worst.abs_value;
        panels.push(left);
        panels.push(right);
    }

    // Re-sum from the panels: the running total accumulates cancellation noise.
    T sum{};
    std::vector< detail::Panel< T > > all;
    all.reserve(panels.size());
    while (!panels.empty()) {
        all.push_back(panels.top());
        panels.pop();
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    for (const auto& p : all)
        sum += p.value;
    return sum;
}

/// Convenience overload taking only a relative tolerance.
template < typename F >
auto adaptive_integrate(F&& f, double lo, double hi, double rel_tol)
{
    return adaptive_integrate(std::forward< F >(f), lo, hi, QuadratureOptions{rel_tol});
}

/// Symmetric difference quotient (f(x + h) - f(x - h)) / 2h.
template < typename F >
auto central_derivative(F&& f, double x, double h)
{
    if (!(h > 0.0))
        throw InputError("central_derivative requires h > 0");
    const auto up = f(x + h);
    const auto down = f(x - h);
    if (!detail::finite(up) || !detail::finite(down))
        throw NumericError("non-finite function value in central_derivative at x = " + std::to_string(x));
    return (up - down) / (2.0 * h);
}

} // namespace bflab::corenum

#endif // BFLAB_CORENUM_QUADRATURE_HPP
