#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bflab/backflow/backflow.hpp"

#include "support/fixtures.hpp"

using namespace bflab;
using backflow::DetectionQuery;

namespace {

states::WavefunctionState single(double sigma, double p, double g = 0.0)
{
    const states::GaussianSuperpositionSpec spec{sigma, {{1.0, p}}};
    if (g == 0.0)
        return states::WavefunctionState::free({fixtures::rb_mass, 0.0, 0.0}, spec);
    return states::WavefunctionState::falling({fixtures::rb_mass, g, 0.0}, spec);
}

double dp_dt(const states::WavefunctionState& s, double a, double t)
{
    const double h = 1e-3; // 1 ns
    return (backflow::cumulative_probability(s, a, t + h) - backflow::cumulative_probability(s, a, t - h)) / (2.0 * h);
}

} // namespace

TEST(Current, PlanePhaseGaussian)
{
    const double sigma = 1.0;
    const double p = fixtures::kick();
    const auto s = single(sigma, p);
    const double expected = (p / s.mass()) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    EXPECT_NEAR(backflow::quantum_current(s, 0.0, 0.0), expected, 1e-12 * expected);
}

TEST(Current, StationaryGaussianHasNoCurrentAtCentre)
{
    EXPECT_EQ(backflow::quantum_current(single(1.0, 0.0), 0.0, 0.0), 0.0);
}

TEST(Current, ContinuityEquationGravity)
{
    const auto s = fixtures::falling();
    double jmax = 0.0;
    std::vector< double > ts;
    for (double t = 1.0; t <= 50.0; t += 1.0)
        ts.push_back(t);
    for (double t : ts)
        jmax = std::max(jmax, std::abs(backflow::quantum_current(s, 0.0, t)));
    for (double t : ts)
        EXPECT_LE(std::abs(backflow::quantum_current(s, 0.0, t) + dp_dt(s, 0.0, t)), 1e-3 * jmax) << "t=" << t;
}

TEST(Current, ContinuityEquationHarmonic)
{
    const auto s = fixtures::harmonic();
    const double a = fixtures::harmonic_level();
    double jmax = 0.0;
    std::vector< double > ts;
    for (double t = 200.0; t <= 260.0; t += 2.0)
        ts.push_back(t);
    for (double t : ts)
        jmax = std::max(jmax, std::abs(backflow::quantum_current(s, a, t)));
    for (double t : ts)
        EXPECT_LE(std::abs(backflow::quantum_current(s, a, t) + dp_dt(s, a, t)), 1e-3 * jmax) << "t=" << t;
}

TEST(ClassicalBound, NeverPositive)
{
    const auto phi = fixtures::precision();
    for (const auto& s : {fixtures::falling(), fixtures::free_twin()})
        for (double t : {0.0, 12.5, 25.0, 37.5, 50.0})
            for (double a : {-2.0, 0.0, 1.5})
                EXPECT_LE(backflow::classical_bound(s, phi, a, t), 0.0);
    const auto h = fixtures::harmonic();
    for (double t : {200.0, 230.0, 260.0})
        EXPECT_LE(backflow::classical_bound(h, phi, fixtures::harmonic_level(), t), 0.0);
}

TEST(ClassicalBound, VanishesWithoutNegativeMomentum)
{
    const auto s = single(1.0, fixtures::kick());
    const phasespace::PrecisionSpec phi(1.0);
    EXPECT_LT(std::abs(backflow::classical_bound(s, phi, 0.0, 0.0)), 1e-9);
}

TEST(ClassicalBound, GravityScenarioAtThirtyMicroseconds)
{
    const double b = backflow::classical_bound(fixtures::falling(), fixtures::precision(), 0.0, 30.0);
    EXPECT_LT(b, 0.0);
    // regression lock
    EXPECT_NEAR(b, -4.7112501351170562e-4, 1e-9);
}

// The smoothing width hbar / (2 sigma_phi) dominates the intrinsic momentum
// spread here, so the bound scales roughly as 1 / sigma_phi; the continuity
// check is made on 10% steps.
TEST(ClassicalBound, ContinuousInPrecisionWidth)
{
    const auto s = fixtures::falling();
    double previous = backflow::classical_bound(s, fixtures::precision(0.05), 0.0, 30.0);
    for (double sp = 0.055; sp <= 0.2 + 1e-12; sp *= 1.1) {
        const double b = backflow::classical_bound(s, fixtures::precision(sp), 0.0, 30.0);
        EXPECT_LE(std::abs(b - previous), 0.2 * std::abs(previous)) << "sigma_phi=" << sp;
        previous = b;
    }
}

TEST(Detect, GravityScenarioWindow)
{
    const auto r = backflow::detect(fixtures::falling(), fixtures::precision(), fixtures::gravity_query());
    ASSERT_EQ(r.qb_intervals.size(), 1u);
    EXPECT_NEAR(r.qb_intervals[0].lo, 23.7, 1.0);
    EXPECT_NEAR(r.qb_intervals[0].hi, 39.0, 1.0);
    EXPECT_EQ(r.times.size(), 500u);
    EXPECT_EQ(r.j_quantum.size(), 500u);
    EXPECT_EQ(r.j_classical_bound.size(), 500u);
    EXPECT_EQ(r.violation.size(), 500u);
    EXPECT_EQ(r.p_above.size(), 500u);
    EXPECT_EQ(r.neg_momentum_prob.size(), 500u);
}

TEST(Detect, PositiveMomentumGaussianNeverViolates)
{
    const auto s = single(1.0, fixtures::kick());
    const phasespace::PrecisionSpec phi(1.0);
    for (double a : {-3.0, 0.0, 4.0}) {
        const auto r = backflow::detect(s, phi, {a, 0.0, 50.0, 100, 1.0});
        EXPECT_TRUE(r.qb_intervals.empty()) << "a=" << a;
        for (double j : r.j_quantum)
            EXPECT_GE(j, 0.0);
    }
}

TEST(Detect, IntervalsMatchDefinition)
{
    struct Case
    {
        states::WavefunctionState state;
        DetectionQuery query;
    };
    const std::vector< Case > cases{{fixtures::falling(), fixtures::gravity_query()},
                                    {fixtures::free_twin(), fixtures::gravity_query()},
                                    {fixtures::harmonic(), fixtures::harmonic_query()},
                                    {single(1.0, fixtures::kick()), {0.0, 0.0, 50.0, 100, 1.0}}};
    for (const auto& c : cases) {
        const auto r = backflow::detect(c.state, fixtures::precision(), c.query);
        double min_margin = INFINITY;
        for (std::size_t i = 0; i < r.times.size(); ++i) {
            min_margin = std::min(min_margin, r.j_quantum[i] - r.j_classical_bound[i]);
            EXPECT_EQ(r.violation[i], std::max(r.j_classical_bound[i] - r.j_quantum[i], 0.0));
            const bool inside = std::any_of(r.qb_intervals.begin(), r.qb_intervals.end(),
                                            [&](const auto& iv) { return iv.lo <= r.times[i] && r.times[i] <= iv.hi; });
            if (r.violation[i] > backflow::violation_floor) {
                EXPECT_TRUE(inside) << "t=" << r.times[i];
            }
        }
        EXPECT_EQ(!r.qb_intervals.empty(), min_margin < -backflow::violation_floor);
        for (const auto& iv : r.qb_intervals)
            EXPECT_LE(iv.lo, iv.hi);
    }
}

TEST(Detect, EdgesAreBisected)
{
    const auto q = fixtures::gravity_query();
    const auto s = fixtures::falling();
    const auto phi = fixtures::precision();
    const auto r = backflow::detect(s, phi, q);
    ASSERT_EQ(r.qb_intervals.size(), 1u);
    const double step = (q.t_end - q.t_start) / (q.n_times - 1);
    const auto iv = r.qb_intervals[0];
    EXPECT_GT(backflow::violation_margin(s, phi, 0.0, iv.lo + 2e-3 * step), 0.0);
    EXPECT_LE(backflow::violation_margin(s, phi, 0.0, iv.lo - 2e-3 * step), backflow::violation_floor);
    EXPECT_GT(backflow::violation_margin(s, phi, 0.0, iv.hi - 2e-3 * step), 0.0);
    EXPECT_LE(backflow::violation_margin(s, phi, 0.0, iv.hi + 2e-3 * step), backflow::violation_floor);
}

TEST(Detect, ThreadCountDoesNotChangeReport)
{
    const DetectionQuery q{0.0, 20.0, 40.0, 40, 1.0};
    const auto a = backflow::detect(fixtures::falling(), fixtures::precision(), q, 1);
    const auto b = backflow::detect(fixtures::falling(), fixtures::precision(), q, 3);
    EXPECT_EQ(a.j_quantum, b.j_quantum);
    EXPECT_EQ(a.j_classical_bound, b.j_classical_bound);
    ASSERT_EQ(a.qb_intervals.size(), b.qb_intervals.size());
    for (std::size_t k = 0; k < a.qb_intervals.size(); ++k) {
        EXPECT_EQ(a.qb_intervals[k].lo, b.qb_intervals[k].lo);
        EXPECT_EQ(a.qb_intervals[k].hi, b.qb_intervals[k].hi);
    }
}

TEST(Detect, RejectsInvalidQuery)
{
    const auto s = fixtures::falling();
    const auto phi = fixtures::precision();
    EXPECT_THROW(backflow::detect(s, phi, {0.0, 5.0, 5.0, 10, 1.0}), InputError);
    EXPECT_THROW(backflow::detect(s, phi, {0.0, 0.0, 5.0, 1, 1.0}), InputError);
    EXPECT_THROW(backflow::detect(s, phi, {0.0, 0.0, 5.0, 10, 0.0}), InputError);
}

TEST(Cumulative, MedianAndTotal)
{
    const auto s = single(1.3, 0.0);
    EXPECT_NEAR(backflow::cumulative_probability(s, 0.0, 0.0), 0.5, 1e-12);
    EXPECT_NEAR(backflow::cumulative_probability(s, 0.0, 40.0), 0.5, 1e-12);
    EXPECT_NEAR(backflow::cumulative_probability(fixtures::falling(), 1e3, 30.0), 1.0, 1e-6);
    EXPECT_NEAR(backflow::cumulative_probability(fixtures::falling(), -1e3, 30.0), 0.0, 1e-12);
}

TEST(Cumulative, MatchesErfForFallingGaussian)
{
    // The packet centre moves to g t^2 / 2 and the width grows as in free flight.
    const double g = corenum::UnitSystem::for_particle(fixtures::rb_mass).acceleration(9.8);
    const auto s = single(1.0, 0.0, 9.8);
    const double t = 30.0;
    const double w = std::sqrt(1.0 + std::pow(s.hbar() * t / (2.0 * s.mass()), 2));
    const double a = 0.3;
    const double expected = 0.5 * std::erfc(-(a - 0.5 * g * t * t) / (std::sqrt(2.0) * w));
    EXPECT_NEAR(backflow::cumulative_probability(s, a, t), expected, 1e-10);
}

TEST(ProbabilityBound, ZeroHorizonGivesPBelow)
{
    const auto s = fixtures::falling();
    const auto phi = fixtures::precision();
    const auto jd = phasespace::joint_density(s, phi, phasespace::default_grid(s, phi, 25.0), 25.0);
    const auto b = backflow::probability_upper_bound(jd, 0.0, 0.0, s.mass());
    EXPECT_EQ(b.strip_mass, 0.0);
    EXPECT_EQ(b.value, b.p_below);
    EXPECT_GT(b.p_below, 0.0);
    EXPECT_LT(b.p_below, 1.0);
}

TEST(ProbabilityBound, PositiveMomentumDensityHasNoStrip)
{
    const auto s = fixtures::falling();
    const auto phi = fixtures::precision();
    auto jd = phasespace::joint_density(s, phi, phasespace::default_grid(s, phi, 25.0), 25.0);
    for (std::size_t i = 0; i < jd.grid.x.size(); ++i)
        for (std::size_t j = 0; j < jd.grid.p.size(); ++j)
            if (jd.grid.p[j] < 0.0)
                jd.at(i, j) = 0.0;
    const auto b = backflow::probability_upper_bound(jd, 0.0, 5.0, s.mass());
    EXPECT_EQ(b.strip_mass, 0.0);
    EXPECT_EQ(b.value, b.p_below);
}

TEST(ProbabilityBound, NondecreasingInHorizon)
{
    const auto s = fixtures::falling();
    const auto phi = fixtures::precision();
    const auto jd = phasespace::joint_density(s, phi, phasespace::default_grid(s, phi, 25.0), 25.0);
    double previous = -1.0;
    for (double dt : {0.0, 1.0, 5.0, 10.0, 20.0, 40.0, 80.0}) {
        const auto b = backflow::probability_upper_bound(jd, 0.0, dt, s.mass());
        EXPECT_GE(b.value, previous) << "dt=" << dt;
        previous = b.value;
    }
}

TEST(ProbabilityBound, ReportsStripBeyondGrid)
{
    const auto s = fixtures::falling();
    const auto phi = fixtures::precision();
    const auto jd = phasespace::joint_density(s, phi, phasespace::default_grid(s, phi, 25.0), 25.0);
    EXPECT_THROW(backflow::probability_upper_bound(jd, 0.0, 1e5, s.mass()), GridTooNarrow);
    EXPECT_THROW(backflow::probability_upper_bound(jd, 1e3, 1.0, s.mass()), GridTooNarrow);
    EXPECT_THROW(backflow::probability_upper_bound(jd, 0.0, -1.0, s.mass()), InputError);
}

namespace {

// A 1 us horizon moves the slowest negative-momentum mass about 0.005 um, so
// the strip needs an x spacing well below that.
backflow::ProbabilityBound fine_bound(const states::WavefunctionState& s, double t, double dt)
{
    const auto phi = fixtures::precision();
    const auto g = phasespace::default_grid(s, phi, t);
    const corenum::PhaseSpaceGrid fine{corenum::Grid1D(g.x.lo(), g.x.hi(), 16384), corenum::Grid1D(g.p.lo(), g.p.hi(), 256)};
    return backflow::probability_upper_bound(phasespace::joint_density(s, phi, fine, t), 0.0, dt, s.mass());
}

} // namespace

// Classically P(x <= a) can grow within dt by at most the strip mass; the
// quantum increase in the QB window is larger.
TEST(ProbabilityBound, QuantumIncreaseExceedsStripMass)
{
    const auto s = fixtures::falling();
    const double t = 25.0, dt = 1.0;
    const auto b = fine_bound(s, t, dt);
    // strip mass ~ dt * |classical bound| for small dt
    const double linear = -dt * backflow::classical_bound(s, fixtures::precision(), 0.0, t);
    EXPECT_NEAR(b.strip_mass, linear, 0.15 * linear);
    const double increase = backflow::cumulative_probability(s, 0.0, t + dt) - backflow::cumulative_probability(s, 0.0, t);
    EXPECT_GT(increase, b.strip_mass);
}

// With P(x <= a) taken from the smoothed density itself, smoothing of the
// interference fringes shifts the baseline by ~7e-3, which swamps the strip
// mass: the absolute form does not witness backflow at sigma_phi = 0.1 um.
TEST(ProbabilityBound, AbsoluteFormDoesNotWitnessAtDefaultPrecision)
{
    const auto s = fixtures::falling();
    const auto b = fine_bound(s, 25.0, 1.0);
    EXPECT_GT(b.value, backflow::cumulative_probability(s, 0.0, 26.0));
}
