// States shared by the unit tests and the acceptance binary.
#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "bflab/backflow/backflow.hpp"
#include "bflab/corenum/units.hpp"
#include "bflab/phasespace/phasespace.hpp"
#include "bflab/states/wavefunction.hpp"

namespace fixtures {

using namespace bflab;

inline constexpr double rb_mass = 1.4e-25;
inline constexpr double b1 = 1.18e-3;
inline constexpr double b2 = 4.42e-4;

inline double hbar() { return corenum::UnitSystem::for_particle(rb_mass).hbar(); }

/// Two recoils at 780 nm in internal units.
inline double kick() { return corenum::UnitSystem::for_particle(rb_mass).recoil_momentum(2.0, 780.0); }

inline states::GaussianSuperpositionSpec two_branch(double sigma = 1.0, double p2 = kick())
{
    return {sigma, {{b1, 0.0}, {b2, p2}}};
}

inline states::WavefunctionState falling(double g = 9.8)
{
    return states::WavefunctionState::falling({rb_mass, g, 0.0}, two_branch());
}

inline states::WavefunctionState free_twin()
{
    return states::WavefunctionState::free({rb_mass, 0.0, 0.0}, two_branch());
}

inline double omega_si() { return 2.0 * std::numbers::pi * 1e4; }

inline states::WavefunctionState harmonic()
{
    states::CoherentSuperpositionSpec spec{{{1.0, std::polar(1.0, 0.9 * std::numbers::pi)},
                                           {1.0, std::polar(9.0, 0.55 * std::numbers::pi)}}};
    return states::WavefunctionState::harmonic({rb_mass, 0.0, omega_si()}, spec);
}

/// Oscillator length sqrt(2 hbar / (m omega)) in micrometres.
inline double oscillator_length()
{
    const auto s = harmonic();
    return std::sqrt(2.0 * s.hbar() / (s.mass() * s.omega()));
}

inline double harmonic_level() { return oscillator_length() * std::cos(0.55 * std::numbers::pi); }

inline phasespace::PrecisionSpec precision(double sigma_phi = 0.1) { return phasespace::PrecisionSpec(sigma_phi); }

inline backflow::DetectionQuery gravity_query() { return {0.0, 0.0, 50.0, 500, 1.0}; }

inline backflow::DetectionQuery harmonic_query() { return {harmonic_level(), 200.0, 260.0, 600, 1.0}; }

} // namespace fixtures
