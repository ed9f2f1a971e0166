#ifndef BFLAB_OPTIMIZER_OPTIMIZER_HPP
#define BFLAB_OPTIMIZER_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bflab/backflow/backflow.hpp"
#include "bflab/corenum/error.hpp"
#include "bflab/corenum/parallel.hpp"
#include "bflab/phasespace/phasespace.hpp"
#include "bflab/states/wavefunction.hpp"

namespace bflab::optimizer {

using backflow::DetectionQuery;
using phasespace::PrecisionSpec;
using states::complex;
using states::WavefunctionState;

enum class Family
{
    gaussian_2_branch,
    coherent_2_branch,
};

inline std::string_view to_string(Family f)
{
    return f == Family::gaussian_2_branch ? "gaussian-2-branch" : "coherent-2-branch";
}

inline Family parse_family(std::string_view tag)
{
    for (auto f : {Family::gaussian_2_branch, Family::coherent_2_branch})
        if (to_string(f) == tag)
            return f;
    throw InputError("unknown search family '" + std::string(tag) + "'");
}

enum class ObjectiveKind
{
    peak,       ///< max over the scan of bound - j
    integrated, ///< integral over the scan of (bound - j)_+
};

inline std::string_view to_string(ObjectiveKind k) { return k == ObjectiveKind::peak ? "peak" : "integrated"; }

inline ObjectiveKind parse_objective(std::string_view tag)
{
    if (tag == "peak")
        return ObjectiveKind::peak;
    if (tag == "integrated")
        return ObjectiveKind::integrated;
    throw InputError("unknown objective '" + std::string(tag) + "'");
}

/// Names of the free parameters, in order.
///
/// Both families fix the first branch weight to 1. The second weight is
/// 10^log10_ratio * exp(i pi phase_pi). Gaussian momenta are in photon
/// recoils; coherent labels are |alpha| exp(i pi arg_pi).
inline std::vector< std::string > parameter_names(Family f)
{
    if (f == Family::gaussian_2_branch)
        return {"log10_ratio", "phase_pi", "p1_recoils", "p2_recoils"};
    return {"log10_ratio", "phase_pi", "alpha_abs", "alpha_arg_pi", "beta_abs", "beta_arg_pi"};
}

struct Bound
{
    double lo;
    double hi;

    bool operator==(const Bound&) const = default;
};

inline std::vector< Bound > default_bounds(Family f)
{
    if (f == Family::gaussian_2_branch)
        return {{-2.0, 1.0}, {-1.0, 1.0}, {-4.0, 4.0}, {-4.0, 4.0}};
    return {{-1.0, 1.0}, {-1.0, 1.0}, {0.0, 12.0}, {-1.0, 1.0}, {0.0, 12.0}, {-1.0, 1.0}};
}

/// Everything held fixed during a search.
struct Template
{
    states::PhysicalParams physical;
    double sigma = 1.0;         ///< Gaussian family width, internal units
    double lambda_nm = 780.0;   ///< recoil wavelength for the Gaussian momenta
    PrecisionSpec precision;
    DetectionQuery query;
    ObjectiveKind objective = ObjectiveKind::peak;

    bool operator==(const Template&) const = default;
};

struct SearchSpace
{
    Family family = Family::gaussian_2_branch;
    std::vector< Bound > bounds;
    Template fixed;

    void validate() const
    {
        if (bounds.size() != parameter_names(family).size())
            throw InputError("search space for " + std::string(to_string(family)) + " needs " +
                             std::to_string(parameter_names(family).size()) + " bounds");
        for (std::size_t k = 0; k < bounds.size(); ++k)
            if (!(std::isfinite(bounds[k].lo) && std::isfinite(bounds[k].hi) && bounds[k].lo < bounds[k].hi))
                throw InputError("bound for " + parameter_names(family)[k] + " must be finite with lo < hi");
        fixed.precision.validate();
        fixed.query.validate();
    }

    bool contains(const std::vector< double >& params) const
    {
        if (params.size() != bounds.size())
            return false;
        for (std::size_t k = 0; k < params.size(); ++k)
            if (!(params[k] >= bounds[k].lo && params[k] <= bounds[k].hi))
                return false;
        return true;
    }

    bool operator==(const SearchSpace&) const = default;
};

/// State described by a parameter vector of the family.
inline WavefunctionState make_state(Family family, const Template& fixed, const std::vector< double >& params)
{
    const complex w2 = std::pow(10.0, params.at(0)) * std::polar(1.0, std::numbers::pi * params.at(1));
    if (family == Family::gaussian_2_branch) {
        const auto units = corenum::UnitSystem::for_particle(fixed.physical.mass_kg);
        states::GaussianSuperpositionSpec spec{
            fixed.sigma,
            {{1.0, units.recoil_momentum(params.at(2), fixed.lambda_nm)},
             {w2, units.recoil_momentum(params.at(3), fixed.lambda_nm)}}};
        if (fixed.physical.g != 0.0)
            return WavefunctionState::falling(fixed.physical, std::move(spec));
        return WavefunctionState::free(fixed.physical, std::move(spec));
    }
    states::CoherentSuperpositionSpec spec{
        {{1.0, std::polar(params.at(2), std::numbers::pi * params.at(3))},
         {w2, std::polar(params.at(4), std::numbers::pi * params.at(5))}}};
    return WavefunctionState::harmonic(fixed.physical, std::move(spec));
}

/// Violation figure of merit of a state over the query window. Positive
/// means backflow somewhere in the window.
inline double objective(const WavefunctionState& state, const PrecisionSpec& precision, const DetectionQuery& query,
                        ObjectiveKind kind = ObjectiveKind::peak)
{
    query.validate();
    const corenum::Grid1D times(query.t_start, query.t_end, query.n_times);
    std::vector< double > margin(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        margin[i] = backflow::violation_margin(state, precision, query.a, times[i]);
    if (kind == ObjectiveKind::peak)
        return *std::max_element(margin.begin(), margin.end());
    for (auto& m : margin)
        m = std::max(m, 0.0);
    return corenum::integrate_1d(margin, times);
}

inline double objective(const SearchSpace& space, const std::vector< double >& params)
{
    if (!space.contains(params))
        throw InputError("parameters lie outside the search bounds");
    return objective(make_state(space.family, space.fixed, params), space.fixed.precision, space.fixed.query,
                     space.fixed.objective);
}

struct TraceEntry
{
    std::vector< double > params;
    double objective;
};

struct OptResult
{
    std::vector< double > best_params;
    double best_objective = -std::numeric_limits< double >::infinity();
    std::vector< TraceEntry > trace;
    std::size_t evaluations = 0;
    bool found_qb = false; ///< false reports "no QB found in family"
};

inline constexpr std::size_t minimum_budget = 50;

namespace detail {

// Evaluations that fail numerically score -inf so the search moves away.
inline double safe_objective(const SearchSpace& space, const std::vector< double >& params)
{
    try {
        return objective(space, params);
    } catch (const NumericError&) {
        return -std::numeric_limits< double >::infinity();
    }
}

class Recorder
{
public:
    Recorder(const SearchSpace& space, std::size_t budget) : space_(space), budget_(budget) {}

    bool exhausted() const { return result_.evaluations >= budget_; }
    std::size_t remaining() const { return budget_ - result_.evaluations; }

    std::vector< double > to_params(const std::vector< double >& unit) const
    {
        std::vector< double > p(unit.size());
        for (std::size_t k = 0; k < unit.size(); ++k) {
            const auto& b = space_.bounds[k];
            p[k] = std::clamp(b.lo + std::clamp(unit[k], 0.0, 1.0) * (b.hi - b.lo), b.lo, b.hi);
        }
        return p;
    }

    void record(const std::vector< double >& unit, double value)
    {
        auto p = to_params(unit);
        if (result_.trace.empty() || value > result_.best_objective) {
            result_.best_objective = value;
            result_.best_params = p;
        }
        result_.trace.push_back({std::move(p), value});
        ++result_.evaluations;
    }

    double evaluate(const std::vector< double >& unit)
    {
        const double v = safe_objective(space_, to_params(unit));
        record(unit, v);
        return v;
    }

    OptResult finish()
    {
        result_.found_qb = result_.best_objective > 0.0;
        return std::move(result_);
    }

private:
    const SearchSpace& space_;
    std::size_t budget_;
    OptResult result_;
};

struct Vertex
{
    std::vector< double > x;
    double f;
};

// Nelder-Mead maximisation in the unit cube; points are clamped to the cube.
inline Vertex nelder_mead(Recorder& rec, const std::vector< double >& start, double start_value, double step)
{
    const std::size_t d = start.size();
    auto clamp = [](std::vector< double > x) {
        for (auto& v : x)
            v = std::clamp(v, 0.0, 1.0);
        return x;
    };
    std::vector< Vertex > s{{start, start_value}};
    for (std::size_t k = 0; k < d && !rec.exhausted(); ++k) {
        auto x = start;
        x[k] += x[k] + step <= 1.0 ? step : -step;
        x = clamp(std::move(x));
        s.push_back({x, rec.evaluate(x)});
    }
    if (s.size() < d + 1)
        return *std::max_element(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });

    auto by_value = [](const Vertex& a, const Vertex& b) { return a.f > b.f; };
    while (!rec.exhausted()) {
        std::stable_sort(s.begin(), s.end(), by_value);
        double size = 0.0;
        for (std::size_t v = 1; v <= d; ++v)
            for (std::size_t k = 0; k < d; ++k)
                size = std::max(size, std::abs(s[v].x[k] - s[0].x[k]));
        if (size < 1e-6)
            break;

        std::vector< double > centroid(d, 0.0);
        for (std::size_t v = 0; v < d; ++v)
            for (std::size_t k = 0; k < d; ++k)
                centroid[k] += s[v].x[k] / static_cast< double >(d);
        auto along = [&](double c) {
            std::vector< double > x(d);
            for (std::size_t k = 0; k < d; ++k)
                x[k] = centroid[k] + c * (s[d].x[k] - centroid[k]);
            return clamp(std::move(x));
        };

        auto xr = along(-1.0);
        const double fr = rec.evaluate(xr);
        if (fr > s[0].f) {
            if (rec.exhausted()) {
                s[d] = {xr, fr};
                break;
            }
            auto xe = along(-2.0);
            const double fe = rec.evaluate(xe);
            s[d] = fe > fr ? Vertex{xe, fe} : Vertex{xr, fr};
        } else if (fr > s[d - 1].f) {
            s[d] = {xr, fr};
        } else {
            if (rec.exhausted())
                break;
            const bool outside = fr > s[d].f;
            auto xc = along(outside ? -0.5 : 0.5);
            const double fc = rec.evaluate(xc);
            if (fc > std::max(fr, s[d].f) || (!outside && fc > s[d].f)) {
                s[d] = {xc, fc};
            } else {
                for (std::size_t v = 1; v <= d && !rec.exhausted(); ++v) {
                    for (std::size_t k = 0; k < d; ++k)
                        s[v].x[k] = s[0].x[k] + 0.5 * (s[v].x[k] - s[0].x[k]);
                    s[v].f = rec.evaluate(s[v].x);
                }
            }
        }
    }
    return *std::max_element(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
}

} // namespace detail

/// Latin-hypercube seeding over a quarter of the budget, then Nelder-Mead
/// refinement restarted from the best unused seeds until the budget is spent.
/// Deterministic for a fixed (space, budget, seed) and independent of the
/// thread count: seeding evaluations are stored by index before recording.
inline OptResult optimize(const SearchSpace& space, std::size_t budget, std::uint64_t seed, std::size_t threads = 0)
{
    space.validate();
    if (budget < minimum_budget)
        throw InputError("optimisation budget must be at least " + std::to_string(minimum_budget) + " evaluations");

    const std::size_t d = space.bounds.size();
    const std::size_t n_seed = std::max(d + 1, budget / 4);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution< double > unif(0.0, 1.0);

    std::vector< std::vector< double > > seeds(n_seed, std::vector< double >(d));
    for (std::size_t k = 0; k < d; ++k) {
        std::vector< std::size_t > perm(n_seed);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n_seed; ++i)
            seeds[i][k] = (static_cast< double >(perm[i]) + unif(rng)) / static_cast< double >(n_seed);
    }

    detail::Recorder rec(space, budget);
    std::vector< double > values(n_seed);
    corenum::parallel_for(
        n_seed, [&](std::size_t i) { values[i] = detail::safe_objective(space, rec.to_params(seeds[i])); }, threads);
    for (std::size_t i = 0; i < n_seed; ++i)
        rec.record(seeds[i], values[i]);

    std::vector< std::size_t > order(n_seed);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    double step = 0.15;
    for (std::size_t r = 0; !rec.exhausted(); ++r) {
        const std::size_t i = order[r % n_seed];
        detail::nelder_mead(rec, seeds[i], values[i], step);
        if ((r + 1) % n_seed == 0)
            step *= 0.5;
    }
    return rec.finish();
}

} // namespace bflab::optimizer

#endif // BFLAB_OPTIMIZER_OPTIMIZER_HPP
