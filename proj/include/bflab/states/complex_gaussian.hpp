#ifndef BFLAB_STATES_COMPLEX_GAUSSIAN_HPP
#define BFLAB_STATES_COMPLEX_GAUSSIAN_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <utility>

#include "bflab/corenum/error.hpp"

namespace bflab::states {

using complex = std::complex< double >;

/// g(x) = exp(log_amp - quad * x^2 + lin * x) with Re(quad) > 0.
///
/// Every branch of every supported state is of this form at every time, and
/// so is its Fourier transform and its windowed transform against a Gaussian
/// precision function. The amplitude is kept as a logarithm so that far-off
/// centres do not overflow intermediate exponentials.
struct ComplexGaussian
{
    complex log_amp;
    complex quad;
    complex lin;

    complex exponent(double x) const noexcept { return log_amp - quad * (x * x) + lin * x; }
    complex operator()(double x) const noexcept { return std::exp(exponent(x)); }

    /// d/dx g(x)
    complex derivative(double x) const noexcept { return (lin - 2.0 * quad * x) * (*this)(x); }

    /// Centre and standard deviation of |g|^2 viewed as a (scaled) normal density.
    double centre() const noexcept { return lin.real() / (2.0 * quad.real()); }
    double spread() const noexcept { return 0.5 / std::sqrt(quad.real()); }

    /// log of the peak value of |g|^2.
    double log_peak_density() const noexcept
    {
        const double c = centre();
        return 2.0 * exponent(c).real();
    }

    /// x -> g(x - shift)
    ComplexGaussian shifted(double shift) const noexcept
    {
        return {log_amp - quad * (shift * shift) - lin * shift, quad, lin + 2.0 * quad * shift};
    }

    /// x -> g(x) * exp(i k x + i phase)
    ComplexGaussian with_phase(double k, double phase = 0.0) const noexcept
    {
        return {log_amp + complex(0.0, phase), quad, lin + complex(0.0, k)};
    }

    ComplexGaussian scaled(complex log_factor) const noexcept { return {log_amp + log_factor, quad, lin}; }
};

/// log of  integral exp(-a x^2 + b x) dx  over the real line, Re(a) > 0.
inline complex log_gaussian_integral(complex a, complex b)
{
    if (!(a.real() > 0.0))
        throw NumericError("Gaussian integral requires a positive-definite quadratic term");
    return 0.5 * std::log(std::numbers::pi / a) + b * b / (4.0 * a);
}

/// integral conj(g1(x)) g2(x) dx
inline complex overlap(const ComplexGaussian& g1, const ComplexGaussian& g2)
{
    const complex a = std::conj(g1.quad) + g2.quad;
    const complex b = std::conj(g1.lin) + g2.lin;
    return std::exp(std::conj(g1.log_amp) + g2.log_amp + log_gaussian_integral(a, b));
}

/// Squared L2 norm of a sum of terms, evaluated in closed form.
inline double norm_squared(std::span< const ComplexGaussian > terms)
{
    complex sum{};
    for (const auto& g1 : terms)
        for (const auto& g2 : terms)
            sum += overlap(g1, g2);
    return sum.real();
}

/// Unitary Fourier transform with the physics convention
/// g~(p) = (2 pi hbar)^(-1/2) integral exp(-i p x / hbar) g(x) dx.
inline ComplexGaussian fourier(const ComplexGaussian& g, double hbar)
{
    // integral exp(-a x^2 + (b - i p/hbar) x) dx = sqrt(pi/a) exp((b - i p/hbar)^2 / 4a)
    const complex a = g.quad;
    const complex b = g.lin;
    const complex log_pref = g.log_amp + log_gaussian_integral(a, b) - 0.5 * std::log(2.0 * std::numbers::pi * hbar);
    const complex quad = 1.0 / (4.0 * a * hbar * hbar);
    const complex lin = complex(0.0, -1.0) * b / (2.0 * a * hbar);
    return {log_pref, quad, lin};
}

template < typename Range >
complex sum_at(const Range& terms, double x)
{
    complex out{};
    for (const auto& g : terms)
        out += g(x);
    return out;
}

template < typename Range >
complex sum_derivative_at(const Range& terms, double x)
{
    complex out{};
    for (const auto& g : terms)
        out += g.derivative(x);
    return out;
}

/// Interval outside of which every term's |g|^2 lies below exp(-n_sigma^2 / 2)
/// of its own peak.
template < typename Range >
std::pair< double, double > envelope(const Range& terms, double n_sigma)
{
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& g : terms) {
        lo = std::min(lo, g.centre() - n_sigma * g.spread());
        hi = std::max(hi, g.centre() + n_sigma * g.spread());
    }
    return {lo, hi};
}

} // namespace bflab::states

#endif // BFLAB_STATES_COMPLEX_GAUSSIAN_HPP
