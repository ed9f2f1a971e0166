#ifndef BFLAB_TRANSPORT_MAX_FLOW_HPP
#define BFLAB_TRANSPORT_MAX_FLOW_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

namespace bflab::transport {

/// Dinic's blocking-flow algorithm on real capacities.
///
/// Residual capacities at or below `tolerance` are treated as saturated, which
/// keeps floating-point round-off from creating phantom augmenting paths.
class MaxFlow
{
public:
    static constexpr double infinite = std::numeric_limits< double >::infinity();

    explicit MaxFlow(std::size_t nodes, double tolerance = 1e-15) : adj_(nodes), tol_(tolerance) {}

    std::size_t add_arc(std::size_t from, std::size_t to, double capacity)
    {
        const std::size_t id = arcs_.size();
        arcs_.push_back({to, capacity, id + 1});
        adj_[from].push_back(id);
        arcs_.push_back({from, 0.0, id});
        adj_[to].push_back(id + 1);
        return id;
    }

    double solve(std::size_t source, std::size_t sink)
    {
        double total = 0.0;
        while (build_levels(source, sink)) {
            next_.assign(adj_.size(), 0);
            while (true) {
                const double pushed = augment(source, sink, infinite);
                if (!(pushed > tol_))
                    break;
                total += pushed;
            }
        }
        return total;
    }

    /// Nodes reachable from the source in the residual graph after solve().
    std::vector< bool > source_side(std::size_t source) const
    {
        std::vector< bool > seen(adj_.size(), false);
        std::vector< std::size_t > stack{source};
        seen[source] = true;
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            for (auto id : adj_[v]) {
                const auto& e = arcs_[id];
                if (e.residual > tol_ && !seen[e.to]) {
                    seen[e.to] = true;
                    stack.push_back(e.to);
                }
            }
        }
        return seen;
    }

    /// Flow carried by the arc returned from add_arc.
    double flow(std::size_t arc) const { return arcs_[arcs_[arc].reverse].residual; }

private:
    struct Arc
    {
        std::size_t to;
        double residual;
        std::size_t reverse;
    };

    bool build_levels(std::size_t source, std::size_t sink)
    {
        level_.assign(adj_.size(), -1);
        std::queue< std::size_t > q;
        level_[source] = 0;
        q.push(source);
        while (!q.empty()) {
            const auto v = q.front();
            q.pop();
            for (auto id : adj_[v]) {
                const auto& e = arcs_[id];
                if (e.residual > tol_ && level_[e.to] < 0) {
                    level_[e.to] = level_[v] + 1;
                    q.push(e.to);
                }
            }
        }
        return level_[sink] >= 0;
    }

    double augment(std::size_t v, std::size_t sink, double limit)
    {
        if (v == sink)
            return limit;
        for (auto& i = next_[v]; i < adj_[v].size(); ++i) {
            auto& e = arcs_[adj_[v][i]];
            if (!(e.residual > tol_) || level_[e.to] != level_[v] + 1)
                continue;
            const double pushed = augment(e.to, sink, std::min(limit, e.residual));
            if (pushed > tol_) {
                e.residual -= pushed;
                arcs_[e.reverse].residual += pushed;
                return pushed;
            }
        }
        return 0.0;
    }

    std::vector< std::vector< std::size_t > > adj_;
    std::vector< Arc > arcs_;
    std::vector< int > level_;
    std::vector< std::size_t > next_;
    double tol_;
};

} // namespace bflab::transport

#endif // BFLAB_TRANSPORT_MAX_FLOW_HPP
