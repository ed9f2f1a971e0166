#ifndef BFLAB_BACKFLOW_BACKFLOW_HPP
#define BFLAB_BACKFLOW_BACKFLOW_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "bflab/corenum/error.hpp"
#include "bflab/corenum/parallel.hpp"
#include "bflab/corenum/quadrature.hpp"
#include "bflab/phasespace/phasespace.hpp"
#include "bflab/states/wavefunction.hpp"

namespace bflab::backflow {

using phasespace::JointDensity;
using phasespace::PrecisionSpec;
using states::WavefunctionState;

/// Detection level x = a scanned over [t_start, t_end]; delta_t is the short
/// horizon of the probability bound. Internal units.
struct DetectionQuery
{
    double a = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t n_times = 500;
    double delta_t = 1.0;

    void validate() const
    {
        if (!std::isfinite(a))
            throw InputError("detection level a must be finite");
        if (!(std::isfinite(t_start) && std::isfinite(t_end) && t_start >= 0.0 && t_start < t_end))
            throw InputError("detection window requires 0 <= t_start < t_end");
        if (n_times < 2)
            throw InputError("detection window needs at least 2 times");
        if (!(std::isfinite(delta_t) && delta_t > 0.0))
            throw InputError("delta_t must be positive");
    }

    bool operator==(const DetectionQuery&) const = default;
};

/// Smallest bound - current difference that counts as a violation.
inline constexpr double violation_floor = 1e-12;

struct Interval
{
    double lo;
    double hi;

    bool operator==(const Interval&) const = default;
};

struct BackflowReport
{
    std::vector< double > times;
    std::vector< double > j_quantum;
    std::vector< double > j_classical_bound;
    std::vector< double > violation;        ///< max(bound - j, 0)
    std::vector< double > p_above;          ///< P_t(x <= a)
    std::vector< double > neg_momentum_prob; ///< integral_{-inf}^0 |psi~_t|^2 dp
    std::vector< Interval > qb_intervals;
};

/// j_t(a) = (hbar / m) Im(psi* dpsi/dx) at x = a.
inline double quantum_current(const WavefunctionState& state, double a, double t)
{
    const auto terms = state.branches(t);
    const auto value = states::sum_at(terms, a);
    const auto slope = states::sum_derivative_at(terms, a);
    return state.hbar() / state.mass() * std::imag(std::conj(value) * slope);
}

/// Lower bound on any classical current compatible with the smoothed joint
/// density: (1/m) integral_{-inf}^0 p f_t(a, p) dp.
inline double classical_bound(const WavefunctionState& state, const PrecisionSpec& precision, double a, double t)
{
    return phasespace::negative_momentum_moment(state, precision, a, t);
}

/// P_t(x <= a)
inline double cumulative_probability(const WavefunctionState& state, double a, double t)
{
    const auto terms = state.branches(t);
    const auto [lo, hi] = states::envelope(terms, states::envelope_sigmas + 1.0);
    if (a <= lo)
        return 0.0;
    corenum::QuadratureOptions opt;
    opt.rel_tol = 1e-13;
    opt.abs_tol = 1e-15;
    opt.initial_panels = 16;
    opt.max_panels = 20000;
    const double upper = std::min(a, hi);
    const double p = corenum::adaptive_integrate([&](double x) { return std::norm(states::sum_at(terms, x)); }, lo,
                                                 upper, opt);
    return std::clamp(p, 0.0, 1.0);
}

/// integral_{-inf}^0 |psi~_t(p)|^2 dp
inline double negative_momentum_probability(const WavefunctionState& state, double t)
{
    const auto terms = state.momentum_branches(t);
    auto [lo, hi] = states::envelope(terms, states::envelope_sigmas + 1.0);
    if (lo >= 0.0)
        return 0.0;
    hi = std::min(hi, 0.0);
    corenum::QuadratureOptions opt;
    opt.rel_tol = 1e-12;
    opt.abs_tol = 1e-15;
    opt.initial_panels = 16;
    opt.max_panels = 20000;
    const double p =
        corenum::adaptive_integrate([&](double q) { return std::norm(states::sum_at(terms, q)); }, lo, hi, opt);
    return std::clamp(p, 0.0, 1.0);
}

/// bound - current at (a, t); positive means backflow.
inline double violation_margin(const WavefunctionState& state, const PrecisionSpec& precision, double a, double t)
{
    return classical_bound(state, precision, a, t) - quantum_current(state, a, t);
}

namespace detail {

// Bisects the edge between an outside sample `a` and an inside sample `b`.
template < typename Margin >
double refine_edge(Margin&& margin, double a, double b, double resolution)
{
    const bool inside_b = margin(b) > violation_floor;
    while (std::abs(b - a) > resolution) {
        const double mid = 0.5 * (a + b);
        const bool inside_mid = margin(mid) > violation_floor;
        if (inside_mid == inside_b)
            b = mid;
        else
            a = mid;
    }
    return 0.5 * (a + b);
}

} // namespace detail

/// Scans the query window, evaluates both currents at every sample and
/// returns the maximal runs where the quantum current lies strictly below
/// the classical bound. Interior run edges are bisected to 0.1% of the scan
/// step.
inline BackflowReport detect(const WavefunctionState& state, const PrecisionSpec& precision,
                             const DetectionQuery& query, std::size_t threads = 0)
{
    query.validate();
    precision.validate();
    const std::size_t n = query.n_times;
    const corenum::Grid1D grid(query.t_start, query.t_end, n);

    BackflowReport r;
    r.times = grid.nodes();
    r.j_quantum.resize(n);
    r.j_classical_bound.resize(n);
    r.violation.resize(n);
    r.p_above.resize(n);
    r.neg_momentum_prob.resize(n);

    corenum::parallel_for(
        n,
        [&](std::size_t i) {
            const double t = r.times[i];
            r.j_quantum[i] = quantum_current(state, query.a, t);
            r.j_classical_bound[i] = classical_bound(state, precision, query.a, t);
            r.violation[i] = std::max(r.j_classical_bound[i] - r.j_quantum[i], 0.0);
            r.p_above[i] = cumulative_probability(state, query.a, t);
            r.neg_momentum_prob[i] = negative_momentum_probability(state, t);
        },
        threads);

    auto margin = [&](double t) { return violation_margin(state, precision, query.a, t); };
    auto inside = [&](std::size_t i) { return r.j_classical_bound[i] - r.j_quantum[i] > violation_floor; };
    const double resolution = 1e-3 * grid.spacing();

    std::size_t i = 0;
    while (i < n) {
        if (!inside(i)) {
            ++i;
            continue;
        }
        std::size_t k = i;
        while (k + 1 < n && inside(k + 1))
            ++k;
        const double lo = (i == 0) ? r.times.front() : detail::refine_edge(margin, r.times[i - 1], r.times[i], resolution);
        const double hi = (k + 1 == n) ? r.times.back() : detail::refine_edge(margin, r.times[k + 1], r.times[k], resolution);
        r.qb_intervals.push_back({lo, hi});
        i = k + 1;
    }
    return r;
}

/// Short-horizon classical upper bound on P(x(t + delta_t) <= a):
/// P(x <= a) plus the mass with p < 0 inside the strip a < x <= a + |p| delta_t / m.
struct ProbabilityBound
{
    double p_below;    ///< P(x <= a) under the joint density
    double strip_mass; ///< negative-momentum mass that can cross a within delta_t
    double value;      ///< p_below + strip_mass
};

/// Grid cells are assigned to regions by their node (centre rule).
inline ProbabilityBound probability_upper_bound(const JointDensity& jd, double a, double delta_t, double mass)
{
    if (!(delta_t >= 0.0) || !std::isfinite(delta_t))
        throw InputError("delta_t must be non-negative");
    if (!(mass > 0.0))
        throw InputError("mass must be positive");
    const auto& gx = jd.grid.x;
    const auto& gp = jd.grid.p;
    if (!gx.contains(a))
        throw GridTooNarrow("detection level lies outside the joint-density grid");
    const double reach = a + std::max(0.0, -gp.lo()) * delta_t / mass;
    if (reach > gx.hi())
        throw GridTooNarrow("strip a + |p| delta_t / m extends beyond the x grid; widen the grid");

    const auto wx = gx.trapezoid_weights();
    const auto wp = gp.trapezoid_weights();
    ProbabilityBound out{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < gx.size(); ++i) {
        const double x = gx[i];
        for (std::size_t j = 0; j < gp.size(); ++j) {
            const double cell = wx[i] * wp[j] * jd.at(i, j);
            const double p = gp[j];
            if (x <= a)
                out.p_below += cell;
            else if (p < 0.0 && x <= a - p * delta_t / mass)
                out.strip_mass += cell;
        }
    }
    out.value = out.p_below + out.strip_mass;
    return out;
}

} // namespace bflab::backflow

#endif // BFLAB_BACKFLOW_BACKFLOW_HPP
