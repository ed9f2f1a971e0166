#ifndef BFLAB_CORENUM_UNITS_HPP
#define BFLAB_CORENUM_UNITS_HPP

#include <cmath>
#include <numbers>

#include "bflab/corenum/error.hpp"

namespace bflab::corenum {

namespace si {
inline constexpr double hbar = 1.054571817e-34; // J s
inline constexpr double micrometre = 1e-6;
inline constexpr double microsecond = 1e-6;
inline constexpr double nanometre = 1e-9;
} // namespace si

/// Scales of the internal unit system, all expressed in SI.
///
/// Internal quantities are dimensionless multiples of these scales. Momentum
/// carries mass_unit * length_unit / time_unit, probability current carries
/// 1 / time_unit, densities in x carry 1 / length_unit.
class UnitSystem
{
public:
    UnitSystem(double length_unit, double time_unit, double mass_unit)
        : length_(length_unit), time_(time_unit), mass_(mass_unit)
    {
        auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!ok(length_) || !ok(time_) || !ok(mass_))
            throw InputError("unit scales must be positive and finite");
        hbar_ = si::hbar * time_ / (mass_ * length_ * length_);
    }

    /// Micrometres, microseconds and the particle mass as the mass unit.
    static UnitSystem for_particle(double mass_kg)
    {
        return UnitSystem(si::micrometre, si::microsecond, mass_kg);
    }

    double length_unit() const noexcept { return length_; }
    double time_unit() const noexcept { return time_; }
    double mass_unit() const noexcept { return mass_; }
    double hbar() const noexcept { return hbar_; }

    double momentum_unit() const noexcept { return mass_ * length_ / time_; }

    double length(double metres) const noexcept { return metres / length_; }
    double time(double seconds) const noexcept { return seconds / time_; }
    double mass(double kg) const noexcept { return kg / mass_; }
    double momentum(double kg_m_per_s) const noexcept { return kg_m_per_s / momentum_unit(); }
    double acceleration(double m_per_s2) const noexcept { return m_per_s2 * time_ * time_ / length_; }
    double angular_frequency(double rad_per_s) const noexcept { return rad_per_s * time_; }

    double length_si(double internal) const noexcept { return internal * length_; }
    double time_si(double internal) const noexcept { return internal * time_; }
    double momentum_si(double internal) const noexcept { return internal * momentum_unit(); }

    /// Momentum of n photon recoils, n * hbar * 2 pi / lambda, in internal units.
    double recoil_momentum(double recoils, double lambda_nm) const
    {
        if (!(lambda_nm > 0.0))
            throw InputError("recoil wavelength must be positive");
        const double k = 2.0 * std::numbers::pi / length(lambda_nm * si::nanometre);
        return recoils * hbar_ * k;
    }

    bool operator==(const UnitSystem&) const = default;

private:
    double length_;
    double time_;
    double mass_;
    double hbar_;
};

} // namespace bflab::corenum

#endif // BFLAB_CORENUM_UNITS_HPP
