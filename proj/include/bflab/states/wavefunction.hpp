#ifndef BFLAB_STATES_WAVEFUNCTION_HPP
#define BFLAB_STATES_WAVEFUNCTION_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bflab/corenum/error.hpp"
#include "bflab/corenum/quadrature.hpp"
#include "bflab/corenum/units.hpp"
#include "bflab/states/complex_gaussian.hpp"

namespace bflab::states {

/// Particle and potential in SI units. The x axis points downwards, so a
/// positive g accelerates the particle towards +x.
struct PhysicalParams
{
    double mass_kg = 0.0;
    double g = 0.0;     ///< m/s^2, linear potential V = -m g x
    double omega = 0.0; ///< rad/s, harmonic potential V = m omega^2 x^2 / 2

    bool operator==(const PhysicalParams&) const = default;
};

/// One Gaussian branch: relative amplitude and mean momentum (internal units).
struct GaussianBranch
{
    complex weight;
    double momentum = 0.0;

    bool operator==(const GaussianBranch&) const = default;
};

/// Superposition of equal-width Gaussians centred at x = 0 at t = 0, each
/// with density standard deviation sigma (internal length units).
struct GaussianSuperpositionSpec
{
    double sigma = 0.0;
    std::vector< GaussianBranch > branches;

    bool operator==(const GaussianSuperpositionSpec&) const = default;
};

/// One coherent-state branch: relative amplitude and complex label at t = 0.
struct CoherentBranch
{
    complex weight;
    complex alpha0;

    bool operator==(const CoherentBranch&) const = default;
};

/// Superposition of harmonic-oscillator coherent states. The trap frequency
/// comes from PhysicalParams::omega.
struct CoherentSuperpositionSpec
{
    std::vector< CoherentBranch > branches;

    bool operator==(const CoherentSuperpositionSpec&) const = default;
};

enum class Model
{
    free_gaussian_superposition,
    linear_potential,
    harmonic_coherent,
};

inline std::string_view to_string(Model m)
{
    switch (m) {
    case Model::free_gaussian_superposition:
        return "free-gaussian-superposition";
    case Model::linear_potential:
        return "linear-potential";
    case Model::harmonic_coherent:
        return "harmonic-coherent";
    }
    return "unknown";
}

inline Model parse_model(std::string_view tag)
{
    for (auto m : {Model::free_gaussian_superposition, Model::linear_potential, Model::harmonic_coherent})
        if (to_string(m) == tag)
            return m;
    throw InputError("unknown state model tag '" + std::string(tag) + "'");
}

/// Closed-form time-dependent wave function of one of the supported families.
///
/// Immutable after construction. Normalised so that the position density
/// integrates to one at t = 0; the evolution is unitary so it stays so.
/// All coordinates are internal: micrometres, microseconds, particle mass.
class WavefunctionState
{
public:
    using Params = std::variant< GaussianSuperpositionSpec, CoherentSuperpositionSpec >;

    WavefunctionState(Model model, PhysicalParams physical, Params params)
        : model_(model), physical_(physical), params_(std::move(params)),
          units_(corenum::UnitSystem::for_particle(checked_mass(physical.mass_kg)))
    {
        validate();
        g_ = units_.acceleration(physical_.g);
        omega_ = units_.angular_frequency(physical_.omega);
        log_norm_fix_ = complex(-0.5 * std::log(norm_squared(raw_branches(0.0))), 0.0);
    }

    static WavefunctionState free(PhysicalParams phys, GaussianSuperpositionSpec spec)
    {
        return {Model::free_gaussian_superposition, phys, std::move(spec)};
    }
    static WavefunctionState falling(PhysicalParams phys, GaussianSuperpositionSpec spec)
    {
        return {Model::linear_potential, phys, std::move(spec)};
    }
    static WavefunctionState harmonic(PhysicalParams phys, CoherentSuperpositionSpec spec)
    {
        return {Model::harmonic_coherent, phys, std::move(spec)};
    }

    Model model() const noexcept { return model_; }
    const PhysicalParams& physical() const noexcept { return physical_; }
    const Params& params() const noexcept { return params_; }
    const corenum::UnitSystem& units() const noexcept { return units_; }

    double hbar() const noexcept { return units_.hbar(); }
    double mass() const noexcept { return 1.0; }
    double gravity() const noexcept { return g_; }
    double omega() const noexcept { return omega_; }

    /// Normalised position-space branches at time t; psi_t(x) is their sum.
    std::vector< ComplexGaussian > branches(double t) const
    {
        auto out = raw_branches(t);
        for (auto& g : out)
            g = g.scaled(log_norm_fix_);
        return out;
    }

    /// Momentum-space branches at time t; psi~_t(p) is their sum.
    std::vector< ComplexGaussian > momentum_branches(double t) const
    {
        auto out = branches(t);
        for (auto& g : out)
            g = fourier(g, hbar());
        return out;
    }

private:
    static double checked_mass(double m)
    {
        if (!(std::isfinite(m) && m > 0.0))
            throw InputError("particle mass must be positive");
        return m;
    }

    void validate()
    {
        const auto& ph = physical_;
        if (!(std::isfinite(ph.g) && ph.g >= 0.0))
            throw InputError("g must be finite and non-negative");
        if (!(std::isfinite(ph.omega) && ph.omega >= 0.0))
            throw InputError("omega must be finite and non-negative");
        if (ph.g != 0.0 && ph.omega != 0.0)
            throw InputError("at most one of g and omega may be non-zero");

        switch (model_) {
        case Model::free_gaussian_superposition:
        case Model::linear_potential: {
            auto* spec = std::get_if< GaussianSuperpositionSpec >(&params_);
            if (!spec)
                throw InputError(std::string(to_string(model_)) + " requires a Gaussian superposition");
            if (!(std::isfinite(spec->sigma) && spec->sigma > 0.0))
                throw InputError("sigma must be positive");
            if (model_ == Model::free_gaussian_superposition && (ph.g != 0.0 || ph.omega != 0.0))
                throw InputError("free model takes no potential");
            if (model_ == Model::linear_potential && ph.omega != 0.0)
                throw InputError("linear-potential model takes no harmonic trap");
            prune(spec->branches);
            break;
        }
        case Model::harmonic_coherent: {
            auto* spec = std::get_if< CoherentSuperpositionSpec >(&params_);
            if (!spec)
                throw InputError("harmonic-coherent requires a coherent superposition");
            if (!(ph.omega > 0.0))
                throw InputError("harmonic-coherent requires omega > 0");
            prune(spec->branches);
            break;
        }
        }
    }

    // Zero-weight branches are dropped; at least one must remain.
    template < typename Branch >
    static void prune(std::vector< Branch >& branches)
    {
        std::erase_if(branches, [](const Branch& b) { return b.weight == complex{}; });
        if (branches.empty())
            throw InputError("state needs at least one branch with non-zero weight");
        for (const auto& b : branches)
            if (!corenum::detail::finite(b.weight))
                throw InputError("branch weights must be finite");
    }

    std::vector< ComplexGaussian > raw_branches(double t) const
    {
        if (!(t >= 0.0) || !std::isfinite(t))
            throw InputError("time must be finite and non-negative");
        std::vector< ComplexGaussian > out;
        if (const auto* spec = std::get_if< GaussianSuperpositionSpec >(&params_)) {
            out.reserve(spec->branches.size());
            for (const auto& b : spec->branches)
                out.push_back(gaussian_branch(spec->sigma, b, t));
        } else {
            const auto& coh = std::get< CoherentSuperpositionSpec >(params_);
            out.reserve(coh.branches.size());
            for (const auto& b : coh.branches)
                out.push_back(coherent_branch(b, t));
        }
        return out;
    }

    // Free spreading Gaussian with mean momentum p; in the linear potential the
    // free solution is shifted by g t^2 / 2 and picks up the phase
    // exp(-(i/hbar)(-m g t x + m g^2 t^3 / 6)).
    ComplexGaussian gaussian_branch(double sigma, const GaussianBranch& b, double t) const
    {
        const double hb = hbar();
        const double m = mass();
        const double p = b.momentum;
        const double v = p / m;
        const complex width = complex(4.0 * sigma * sigma, 2.0 * hb * t / m);
        const complex quad = 1.0 / width;
        const complex lin = complex(0.0, p / hb) + 2.0 * v * t / width;
        const complex log_amp = std::log(b.weight) - 0.5 * std::log(width) + complex(0.0, -p * p * t / (2.0 * m * hb)) -
                                (v * t) * (v * t) / width;
        ComplexGaussian free{log_amp, quad, lin};
        if (model_ != Model::linear_potential || g_ == 0.0)
            return free;
        const double shift = 0.5 * g_ * t * t;
        return free.shifted(shift).with_phase(m * g_ * t / hb, -m * g_ * g_ * t * t * t / (6.0 * hb));
    }

    // <x|alpha> = (m w / pi hbar)^(1/4) exp(-(m w / 2 hbar)(x - x_a)^2 + (i/hbar) p_a (x - x_a / 2))
    // with x_a = sqrt(2 hbar / m w) Re(alpha), p_a = sqrt(2 hbar m w) Im(alpha),
    // alpha(t) = alpha0 exp(-i w t) and the common phase exp(-i w t / 2).
    ComplexGaussian coherent_branch(const CoherentBranch& b, double t) const
    {
        const double hb = hbar();
        const double m = mass();
        const double w = omega_;
        const complex alpha = b.alpha0 * std::exp(complex(0.0, -w * t));
        const double xc = std::sqrt(2.0 * hb / (m * w)) * alpha.real();
        const double pc = std::sqrt(2.0 * hb * m * w) * alpha.imag();
        const double k = m * w / (2.0 * hb);
        const complex log_amp = std::log(b.weight) + 0.25 * std::log(m * w / (std::numbers::pi * hb)) - k * xc * xc +
                                complex(0.0, -pc * xc / (2.0 * hb) - 0.5 * w * t);
        return {log_amp, complex(k, 0.0), complex(2.0 * k * xc, pc / hb)};
    }

    Model model_;
    PhysicalParams physical_;
    Params params_;
    corenum::UnitSystem units_;
    double g_ = 0.0;
    double omega_ = 0.0;
    complex log_norm_fix_;
};

/// psi_t(x)
inline complex psi(const WavefunctionState& s, double x, double t) { return sum_at(s.branches(t), x); }

/// d psi_t / dx at x
inline complex dpsi_dx(const WavefunctionState& s, double x, double t)
{
    return sum_derivative_at(s.branches(t), x);
}

/// psi~_t(p), unitary transform with exp(-i p x / hbar).
inline complex psi_momentum(const WavefunctionState& s, double p, double t)
{
    return sum_at(s.momentum_branches(t), p);
}

/// Envelope half-width, in units of each branch's density standard deviation,
/// beyond which every density has dropped below ~1e-18 of its peak.
inline constexpr double envelope_sigmas = 9.0;

/// integral |psi_t(x)|^2 dx by adaptive quadrature over the branch envelope.
inline double norm(const WavefunctionState& s, double t)
{
    const auto terms = s.branches(t);
    const auto [lo, hi] = envelope(terms, envelope_sigmas + 1.0);
    corenum::QuadratureOptions opt;
    opt.rel_tol = 1e-12;
    opt.initial_panels = 16;
    return corenum::adaptive_integrate([&](double x) { return std::norm(sum_at(terms, x)); }, lo, hi, opt);
}

/// integral |psi~_t(p)|^2 dp by adaptive quadrature.
inline double momentum_norm(const WavefunctionState& s, double t)
{
    const auto terms = s.momentum_branches(t);
    const auto [lo, hi] = envelope(terms, envelope_sigmas + 1.0);
    corenum::QuadratureOptions opt;
    opt.rel_tol = 1e-12;
    opt.initial_panels = 16;
    return corenum::adaptive_integrate([&](double p) { return std::norm(sum_at(terms, p)); }, lo, hi, opt);
}

/// Mean position and momentum at time t (closed-form moments are not needed
/// elsewhere, so these use quadrature too).
inline double mean_position(const WavefunctionState& s, double t)
{
    const auto terms = s.branches(t);
    const auto [lo, hi] = envelope(terms, envelope_sigmas + 1.0);
    corenum::QuadratureOptions opt;
    opt.rel_tol = 1e-12;
    opt.abs_tol = 1e-15;
    opt.initial_panels = 16;
    return corenum::adaptive_integrate([&](double x) { return x * std::norm(sum_at(terms, x)); }, lo, hi, opt);
}

inline double mean_momentum(const WavefunctionState& s, double t)
{
    const auto terms = s.momentum_branches(t);
    const auto [lo, hi] = envelope(terms, envelope_sigmas + 1.0);
    corenum::QuadratureOptions opt;
    opt.rel_tol = 1e-12;
    opt.abs_tol = 1e-18;
    opt.initial_panels = 16;
    return corenum::adaptive_integrate([&](double p) { return p * std::norm(sum_at(terms, p)); }, lo, hi, opt);
}

} // namespace bflab::states

#endif // BFLAB_STATES_WAVEFUNCTION_HPP
