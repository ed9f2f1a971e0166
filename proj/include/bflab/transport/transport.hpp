#ifndef BFLAB_TRANSPORT_TRANSPORT_HPP
#define BFLAB_TRANSPORT_TRANSPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bflab/corenum/error.hpp"
#include "bflab/corenum/grid.hpp"
#include "bflab/phasespace/phasespace.hpp"
#include "bflab/transport/max_flow.hpp"

namespace bflab::transport {

using corenum::Grid1D;

/// Independently measured position and momentum densities (internal units).
struct MarginalPair
{
    Grid1D x_grid;
    std::vector< double > x_density;
    Grid1D p_grid;
    std::vector< double > p_density;

    static constexpr double mass_tolerance = 1e-6;

    void validate() const
    {
        check(x_grid, x_density, "position");
        check(p_grid, p_density, "momentum");
    }

private:
    static void check(const Grid1D& grid, const std::vector< double >& density, const char* what)
    {
        if (density.size() != grid.size())
            throw InputError(std::string(what) + " density length does not match its grid");
        for (double v : density)
            if (!(std::isfinite(v) && v >= 0.0))
                throw InputError(std::string(what) + " density must be finite and non-negative");
        const double mass = corenum::integrate_1d(density, grid);
        if (std::abs(mass - 1.0) > mass_tolerance)
            throw MarginalMismatch(std::string(what) + " density integrates to " + std::to_string(mass) +
                                   ", expected 1 within " + std::to_string(mass_tolerance));
    }
};

/// Position cell [lo, hi] carrying a fixed probability mass.
struct Cell
{
    double lo;
    double hi;
    double mass;
};

/// How position cells straddling a strip edge are handled.
enum class CellRule
{
    centre, ///< a cell belongs to the strip iff its node does
    split,  ///< cells are cut at every strip edge, mass shared by length
};

/// Minimum cut of the source/x-cells/p-cells/sink network. Cells flagged true
/// stay on the source side. Its capacity equals the maximum flow.
struct CutCertificate
{
    std::vector< bool > x_source_side;
    std::vector< bool > p_source_side;
    double capacity = 0.0;
};

struct FlowSolution
{
    double value = 0.0;
    CutCertificate certificate;
};

/// Maximum of sum_{ij} admissible(i,j) f_ij over couplings f >= 0 whose row
/// sums are bounded by x_mass and column sums by p_mass.
///
/// With 0/1 costs the transportation linear program reduces to a maximum
/// flow from a source through x cells and p cells to a sink; admissible arcs
/// are uncapacitated. Since an optimal flow can always be completed to a full
/// coupling with the remaining mass, this is also the maximum over the
/// transportation polytope when both totals agree.
template < typename Admissible >
FlowSolution max_admissible_mass(std::span< const double > x_mass, std::span< const double > p_mass,
                                 Admissible&& admissible)
{
    const std::size_t nx = x_mass.size();
    const std::size_t np = p_mass.size();
    const std::size_t source = nx + np;
    const std::size_t sink = source + 1;
    MaxFlow net(nx + np + 2);
    for (std::size_t i = 0; i < nx; ++i)
        if (x_mass[i] > 0.0)
            net.add_arc(source, i, x_mass[i]);
    for (std::size_t j = 0; j < np; ++j)
        if (p_mass[j] > 0.0)
            net.add_arc(nx + j, sink, p_mass[j]);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < np; ++j)
            if (admissible(i, j))
                net.add_arc(i, nx + j, MaxFlow::infinite);

    FlowSolution out;
    out.value = net.solve(source, sink);
    const auto side = net.source_side(source);
    out.certificate.x_source_side.assign(side.begin(), side.begin() + static_cast< std::ptrdiff_t >(nx));
    out.certificate.p_source_side.assign(side.begin() + static_cast< std::ptrdiff_t >(nx),
                                         side.begin() + static_cast< std::ptrdiff_t >(nx + np));
    double cut = 0.0;
    for (std::size_t i = 0; i < nx; ++i)
        if (!out.certificate.x_source_side[i])
            cut += x_mass[i];
    for (std::size_t j = 0; j < np; ++j)
        if (out.certificate.p_source_side[j])
            cut += p_mass[j];
    out.certificate.capacity = cut;
    return out;
}

/// Checks that a certificate is a finite cut (no admissible arc leaves the
/// source side) and recomputes its capacity.
template < typename Admissible >
bool verify_certificate(const CutCertificate& cert, std::span< const double > x_mass, std::span< const double > p_mass,
                        Admissible&& admissible, double* capacity = nullptr)
{
    if (cert.x_source_side.size() != x_mass.size() || cert.p_source_side.size() != p_mass.size())
        return false;
    double cut = 0.0;
    for (std::size_t i = 0; i < x_mass.size(); ++i) {
        if (!cert.x_source_side[i]) {
            cut += x_mass[i];
            continue;
        }
        for (std::size_t j = 0; j < p_mass.size(); ++j)
            if (admissible(i, j) && !cert.p_source_side[j])
                return false;
    }
    for (std::size_t j = 0; j < p_mass.size(); ++j)
        if (cert.p_source_side[j])
            cut += p_mass[j];
    if (capacity)
        *capacity = cut;
    return true;
}

/// Worst-case strip mass over all couplings of the measured marginals.
struct CouplingBound
{
    double max_strip_mass = 0.0; ///< max over couplings of the strip mass
    double p_below = 0.0;        ///< P(x <= a) from the position marginal
    double bound_value = 0.0;    ///< p_below + max_strip_mass
    double negative_mass = 0.0;  ///< total momentum mass with p < 0
    double strip_x_mass = 0.0;   ///< position mass in the widest strip
    CutCertificate certificate;
    bool certified = false;      ///< certificate is a finite cut with capacity == max_strip_mass
    std::vector< Cell > x_cells;
    std::vector< double > p_nodes;
    std::vector< double > p_mass;
};

namespace detail {

inline std::vector< double > cell_masses(const Grid1D& grid, std::span< const double > density)
{
    auto w = grid.trapezoid_weights();
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] *= density[i];
    return w;
}

inline std::vector< Cell > position_cells(const Grid1D& grid, std::span< const double > density)
{
    const auto mass = cell_masses(grid, density);
    const double h = grid.spacing();
    std::vector< Cell > cells(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        cells[i] = {std::max(grid.lo(), grid[i] - 0.5 * h), std::min(grid.hi(), grid[i] + 0.5 * h), mass[i]};
    return cells;
}

// Cuts cells at every breakpoint strictly inside them, sharing mass by length.
inline std::vector< Cell > split_cells(const std::vector< Cell >& cells, std::vector< double > breaks)
{
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    std::vector< Cell > out;
    out.reserve(cells.size() + breaks.size());
    for (const auto& c : cells) {
        double lo = c.lo;
        const double len = c.hi - c.lo;
        for (auto it = std::upper_bound(breaks.begin(), breaks.end(), c.lo); it != breaks.end() && *it < c.hi; ++it) {
            out.push_back({lo, *it, c.mass * (*it - lo) / len});
            lo = *it;
        }
        out.push_back({lo, c.hi, c.mass * (c.hi - lo) / len});
    }
    return out;
}

} // namespace detail

/// Maximises the short-horizon strip mass over every joint distribution with the
/// given marginals. The strip for momentum p < 0 is a < x <= a + |p| delta_t / m.
inline CouplingBound worst_case_bound(const MarginalPair& marginals, double a, double delta_t, double mass,
                                      CellRule rule = CellRule::centre)
{
    marginals.validate();
    if (!(std::isfinite(delta_t) && delta_t > 0.0))
        throw InputError("delta_t must be positive");
    if (!(std::isfinite(mass) && mass > 0.0))
        throw InputError("mass must be positive");

    CouplingBound out;
    out.p_nodes = marginals.p_grid.nodes();
    out.p_mass = detail::cell_masses(marginals.p_grid, marginals.p_density);
    auto cells = detail::position_cells(marginals.x_grid, marginals.x_density);

    const double x_total = std::accumulate(cells.begin(), cells.end(), 0.0, [](double s, const Cell& c) { return s + c.mass; });
    const double p_total = std::accumulate(out.p_mass.begin(), out.p_mass.end(), 0.0);
    if (std::abs(x_total - p_total) > MarginalPair::mass_tolerance)
        throw MarginalMismatch("position and momentum cell masses differ by " + std::to_string(x_total - p_total));

    std::vector< double > reach(out.p_nodes.size(), -INFINITY);
    for (std::size_t j = 0; j < out.p_nodes.size(); ++j)
        if (out.p_nodes[j] < 0.0) {
            reach[j] = a - out.p_nodes[j] * delta_t / mass;
            out.negative_mass += out.p_mass[j];
        }

    if (rule == CellRule::split) {
        std::vector< double > breaks{a};
        for (double r : reach)
            if (std::isfinite(r))
                breaks.push_back(r);
        cells = detail::split_cells(cells, std::move(breaks));
    }

    std::vector< double > x_mass(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
        x_mass[i] = cells[i].mass;
    // grid nodes decide membership under the centre rule
    const std::vector< double > anchor = rule == CellRule::centre ? marginals.x_grid.nodes() : std::vector< double >{};

    auto below = [&](std::size_t i) {
        return rule == CellRule::centre ? anchor[i] <= a : cells[i].hi <= a;
    };
    auto admissible = [&](std::size_t i, std::size_t j) {
        if (!std::isfinite(reach[j]))
            return false;
        if (rule == CellRule::centre)
            return anchor[i] > a && anchor[i] <= reach[j];
        return cells[i].lo >= a && cells[i].hi <= reach[j];
    };

    const double widest = *std::max_element(reach.begin(), reach.end());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (below(i))
            out.p_below += x_mass[i];
        else if (std::isfinite(widest) &&
                 (rule == CellRule::centre ? anchor[i] <= widest : cells[i].hi <= widest))
            out.strip_x_mass += x_mass[i];
    }

    auto solution = max_admissible_mass(std::span< const double >(x_mass), std::span< const double >(out.p_mass),
                                        admissible);
    out.max_strip_mass = solution.value;
    double capacity = 0.0;
    out.certified = verify_certificate(solution.certificate, std::span< const double >(x_mass),
                                       std::span< const double >(out.p_mass), admissible, &capacity) &&
                    std::abs(capacity - solution.value) <= 1e-9;
    out.certificate = std::move(solution.certificate);
    out.bound_value = out.p_below + out.max_strip_mass;
    out.x_cells = std::move(cells);
    return out;
}

/// Position and momentum marginals of a sampled joint density.
inline MarginalPair marginals_of(const phasespace::JointDensity& jd)
{
    return {jd.grid.x, phasespace::position_marginal(jd), jd.grid.p, phasespace::momentum_marginal(jd)};
}

/// Strip mass of a sampled joint density under the centre rule.
inline double strip_mass(const phasespace::JointDensity& jd, double a, double delta_t, double mass)
{
    const auto wx = jd.grid.x.trapezoid_weights();
    const auto wp = jd.grid.p.trapezoid_weights();
    double s = 0.0;
    for (std::size_t i = 0; i < wx.size(); ++i) {
        const double x = jd.grid.x[i];
        if (x <= a)
            continue;
        for (std::size_t j = 0; j < wp.size(); ++j) {
            const double p = jd.grid.p[j];
            if (p < 0.0 && x <= a - p * delta_t / mass)
                s += wx[i] * wp[j] * jd.at(i, j);
        }
    }
    return s;
}

struct ConsistencyResult
{
    bool pass = false;
    double joint_strip_mass = 0.0;
    double worst_case_strip_mass = 0.0;
};

inline constexpr double marginal_match_tolerance = 1e-5;
inline constexpr double consistency_slack = 1e-6;

/// The smoothed joint density is one feasible coupling of its own marginals,
/// so its strip mass may not exceed the worst case. Throws MarginalMismatch
/// when `marginals` are not the marginals of `jd`.
inline ConsistencyResult coupling_consistency_check(const phasespace::JointDensity& jd, const MarginalPair& marginals,
                                                    double a, double delta_t, double mass)
{
    if (!(jd.grid.x == marginals.x_grid) || !(jd.grid.p == marginals.p_grid))
        throw MarginalMismatch("marginals are sampled on different grids than the joint density");
    const auto own = marginals_of(jd);
    // Densities in x and p carry different units, so each is compared
    // relative to its own peak.
    auto mismatch = [](const std::vector< double >& u, const std::vector< double >& v) {
        double d = 0.0;
        double peak = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            d = std::max(d, std::abs(u[i] - v[i]));
            peak = std::max(peak, std::abs(v[i]));
        }
        return peak > 0.0 ? d / peak : d;
    };
    if (const double d = mismatch(own.x_density, marginals.x_density); d > marginal_match_tolerance)
        throw MarginalMismatch("position marginal of the joint density differs by " + std::to_string(d) +
                               " of its peak");
    if (const double d = mismatch(own.p_density, marginals.p_density); d > marginal_match_tolerance)
        throw MarginalMismatch("momentum marginal of the joint density differs by " + std::to_string(d) +
                               " of its peak");

    ConsistencyResult r;
    r.joint_strip_mass = strip_mass(jd, a, delta_t, mass);
    r.worst_case_strip_mass = worst_case_bound(marginals, a, delta_t, mass).max_strip_mass;
    r.pass = r.joint_strip_mass <= r.worst_case_strip_mass + consistency_slack;
    return r;
}

} // namespace bflab::transport

#endif // BFLAB_TRANSPORT_TRANSPORT_HPP
