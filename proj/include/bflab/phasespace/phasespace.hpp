#ifndef BFLAB_PHASESPACE_PHASESPACE_HPP
#define BFLAB_PHASESPACE_PHASESPACE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "bflab/corenum/error.hpp"
#include "bflab/corenum/grid.hpp"
#include "bflab/corenum/parallel.hpp"
#include "bflab/corenum/quadrature.hpp"
#include "bflab/states/complex_gaussian.hpp"
#include "bflab/states/wavefunction.hpp"

namespace bflab::phasespace {

using corenum::Grid1D;
using corenum::PhaseSpaceGrid;
using states::complex;
using states::ComplexGaussian;
using states::WavefunctionState;

enum class PrecisionKind
{
    gaussian,
};

/// Measurement precision function phi: a centred Gaussian whose squared
/// modulus has standard deviation sigma_phi (internal length units).
struct PrecisionSpec
{
    PrecisionKind kind = PrecisionKind::gaussian;
    double sigma_phi = 0.0;

    PrecisionSpec() = default;
    explicit PrecisionSpec(double sigma, PrecisionKind k = PrecisionKind::gaussian) : kind(k), sigma_phi(sigma)
    {
        validate();
    }

    void validate() const
    {
        if (!(std::isfinite(sigma_phi) && sigma_phi > 0.0))
            throw InputError("precision sigma_phi must be positive");
    }

    /// phi(u), normalised so that integral |phi|^2 = 1.
    double amplitude(double u) const
    {
        return std::pow(2.0 * std::numbers::pi * sigma_phi * sigma_phi, -0.25) *
               std::exp(-u * u / (4.0 * sigma_phi * sigma_phi));
    }

    /// Standard deviation of |phi~(p)|^2.
    double momentum_sigma(double hbar) const { return hbar / (2.0 * sigma_phi); }

    bool operator==(const PrecisionSpec&) const = default;
};

enum class OverlapPath
{
    analytic,
    quadrature,
};

/// The Wigner-Moyal overlap <phi|W(x,p)|psi_t> at fixed x, as a sum of
/// complex Gaussians in p (one per state branch):
///
///   (2 pi hbar)^(-1/2) integral exp(-i p y / hbar) phi*(y - x/2) psi(y + x/2) dy.
inline std::vector< ComplexGaussian > overlap_terms(const WavefunctionState& state, const PrecisionSpec& precision,
                                                    double x, double t)
{
    precision.validate();
    const double hb = state.hbar();
    const double s2 = precision.sigma_phi * precision.sigma_phi;
    const double log_phi_norm = -0.25 * std::log(2.0 * std::numbers::pi * s2);
    const double log_pref = -0.5 * std::log(2.0 * std::numbers::pi * hb);

    std::vector< ComplexGaussian > out;
    for (const auto& g : state.branches(t)) {
        // Substituting u = y + x/2 gives exp(i p x / 2 hbar) integral exp(-i p u / hbar) phi(u - x) psi(u) du.
        const complex a = g.quad + 1.0 / (4.0 * s2);
        const complex bx = g.lin + x / (2.0 * s2);
        // integral exp(-a u^2 + (bx - i p / hbar) u) du as a Gaussian in p
        const complex log_amp = g.log_amp + log_phi_norm - x * x / (4.0 * s2) + log_pref +
                                states::log_gaussian_integral(a, bx);
        const complex quad = 1.0 / (4.0 * a * hb * hb);
        const complex lin = complex(0.0, -1.0) * bx / (2.0 * a * hb) + complex(0.0, x / (2.0 * hb));
        out.push_back({log_amp, quad, lin});
    }
    return out;
}

/// <phi|W(x,p)|psi_t>, either from the closed-form Gaussian algebra or by
/// adaptive quadrature of the defining integral.
inline complex wigner_moyal_overlap(const WavefunctionState& state, const PrecisionSpec& precision, double x, double p,
                                    double t, OverlapPath path = OverlapPath::analytic)
{
    if (path == OverlapPath::analytic)
        return states::sum_at(overlap_terms(state, precision, x, t), p);

    precision.validate();
    const double hb = state.hbar();
    const auto terms = state.branches(t);
    // phi*(y - x/2) vanishes to double precision beyond 13 sigma_phi.
    const double reach = 13.0 * precision.sigma_phi;
    auto [lo, hi] = states::envelope(terms, 2.0 * states::envelope_sigmas);
    lo = std::max(lo, x - reach) - 0.5 * x;
    hi = std::min(hi, x + reach) - 0.5 * x;
    if (!(lo < hi))
        return complex{};
    auto integrand = [&](double y) {
        return std::exp(complex(0.0, -p * y / hb)) * precision.amplitude(y - 0.5 * x) *
               states::sum_at(terms, y + 0.5 * x);
    };
    corenum::QuadratureOptions opt;
    opt.rel_tol = 1e-11;
    opt.abs_tol = 1e-300;
    opt.initial_panels = 32;
    opt.max_panels = 20000;
    return corenum::adaptive_integrate(integrand, lo, hi, opt) / std::sqrt(2.0 * std::numbers::pi * hb);
}

/// f_t(x, p) = |<phi|W(x,p)|psi_t>|^2
inline double density(const WavefunctionState& state, const PrecisionSpec& precision, double x, double p, double t)
{
    return std::norm(wigner_moyal_overlap(state, precision, x, p, t));
}

/// Grid-sampled f_t(x, p); values[i * p.size() + j] is f at (x_i, p_j).
struct JointDensity
{
    PhaseSpaceGrid grid;
    std::vector< double > values;
    double t = 0.0;
    PrecisionSpec precision;

    double at(std::size_t i, std::size_t j) const { return values[i * grid.p.size() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * grid.p.size() + j]; }

    /// Trapezoid double integral.
    double total_mass() const
    {
        const auto wx = grid.x.trapezoid_weights();
        const auto wp = grid.p.trapezoid_weights();
        double sum = 0.0;
        for (std::size_t i = 0; i < grid.x.size(); ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < grid.p.size(); ++j)
                row += wp[j] * at(i, j);
            sum += wx[i] * row;
        }
        return sum;
    }
};

/// Smoothed means and spreads used to place a default grid.
struct Moments
{
    double x_lo, x_hi, p_lo, p_hi;
};

/// Per-branch extent of the smoothed density: each branch's centre plus or
/// minus n_sigma of its standard deviation convolved with the precision width.
inline Moments smoothed_extent(const WavefunctionState& state, const PrecisionSpec& precision, double t,
                               double n_sigma)
{
    const double sp = precision.momentum_sigma(state.hbar());
    Moments m{INFINITY, -INFINITY, INFINITY, -INFINITY};
    for (const auto& g : state.branches(t)) {
        const double s = std::hypot(g.spread(), precision.sigma_phi);
        m.x_lo = std::min(m.x_lo, g.centre() - n_sigma * s);
        m.x_hi = std::max(m.x_hi, g.centre() + n_sigma * s);
    }
    for (const auto& g : state.momentum_branches(t)) {
        const double s = std::hypot(g.spread(), sp);
        m.p_lo = std::min(m.p_lo, g.centre() - n_sigma * s);
        m.p_hi = std::max(m.p_hi, g.centre() + n_sigma * s);
    }
    return m;
}

/// Default 512 x 512 grid spanning 8 smoothed standard deviations around
/// every branch.
inline PhaseSpaceGrid default_grid(const WavefunctionState& state, const PrecisionSpec& precision, double t,
                                   std::size_t n = 512, double n_sigma = 8.0)
{
    const auto m = smoothed_extent(state, precision, t, n_sigma);
    return {Grid1D(m.x_lo, m.x_hi, n), Grid1D(m.p_lo, m.p_hi, n)};
}

/// Relative boundary level above which joint_density reports a too-narrow grid.
inline constexpr double boundary_threshold = 1e-10;

/// Samples f_t on the grid. Rows are independent so the result does not
/// depend on the thread count.
inline JointDensity joint_density(const WavefunctionState& state, const PrecisionSpec& precision,
                                  const PhaseSpaceGrid& grid, double t, std::size_t threads = 0)
{
    precision.validate();
    JointDensity jd{grid, std::vector< double >(grid.x.size() * grid.p.size()), t, precision};
    const auto ps = grid.p.nodes();
    corenum::parallel_for(
        grid.x.size(),
        [&](std::size_t i) {
            const auto terms = overlap_terms(state, precision, grid.x[i], t);
            for (std::size_t j = 0; j < ps.size(); ++j)
                jd.at(i, j) = std::norm(states::sum_at(terms, ps[j]));
        },
        threads);

    double peak = 0.0;
    double edge = 0.0;
    const std::size_t nx = grid.x.size();
    const std::size_t np = grid.p.size();
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < np; ++j) {
            const double v = jd.at(i, j);
            peak = std::max(peak, v);
            if (i == 0 || j == 0 || i + 1 == nx || j + 1 == np)
                edge = std::max(edge, v);
        }
    if (!(peak > 0.0))
        throw NumericError("joint density vanishes on the whole grid");
    if (edge > boundary_threshold * peak)
        throw GridTooNarrow("joint density at the grid boundary is " + std::to_string(edge / peak) +
                            " of its peak (threshold " + std::to_string(boundary_threshold) + "); widen the grid");
    return jd;
}

/// integral f_t(x, p) dp on the x grid.
inline std::vector< double > position_marginal(const JointDensity& jd)
{
    const auto wp = jd.grid.p.trapezoid_weights();
    std::vector< double > out(jd.grid.x.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < wp.size(); ++j)
            out[i] += wp[j] * jd.at(i, j);
    return out;
}

/// integral f_t(x, p) dx on the p grid.
inline std::vector< double > momentum_marginal(const JointDensity& jd)
{
    const auto wx = jd.grid.x.trapezoid_weights();
    std::vector< double > out(jd.grid.p.size(), 0.0);
    for (std::size_t i = 0; i < wx.size(); ++i)
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] += wx[i] * jd.at(i, j);
    return out;
}

/// (1/m) integral_{-inf}^{0} p f_t(x, p) dp; never positive.
inline double negative_momentum_moment(const WavefunctionState& state, const PrecisionSpec& precision, double x,
                                       double t)
{
    const auto terms = overlap_terms(state, precision, x, t);
    auto [lo, hi] = states::envelope(terms, states::envelope_sigmas);
    if (lo >= 0.0)
        return 0.0;
    hi = std::min(hi, 0.0);
    if (!(lo < hi))
        return 0.0;

    // Scale for the absolute tolerance: |p| f bounded by the envelope.
    double peak = 0.0;
    for (const auto& g : terms)
        peak = std::max(peak, std::exp(0.5 * g.log_peak_density()));
    const double scale = peak * peak * std::max(std::abs(lo), std::abs(hi)) * (hi - lo) *
                         static_cast< double >(terms.size() * terms.size());

    corenum::QuadratureOptions opt;
    opt.rel_tol = 1e-10;
    opt.abs_tol = 1e-16 * scale;
    opt.initial_panels = 8;
    opt.max_panels = 20000;
    const double moment =
        corenum::adaptive_integrate([&](double p) { return p * std::norm(states::sum_at(terms, p)); }, lo, hi, opt);
    return std::min(moment / state.mass(), 0.0);
}

} // namespace bflab::phasespace

#endif // BFLAB_PHASESPACE_PHASESPACE_HPP
