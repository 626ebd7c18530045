#pragma once

#include <limits>
#include <vector>

namespace mixlab::detail {

/// Successive-shortest-path min-cost flow with Johnson potentials.
/// Real-valued capacities; all costs must be nonnegative.
class MinCostFlow {
public:
    explicit MinCostFlow(int node_count);

    void add_edge(int from, int to, double capacity, double cost);

    /// Routes `amount` units from s to t. Returns the total cost.
    /// Returns NaN if the full amount cannot be routed.
    double solve(int s, int t, double amount);

    static constexpr double kInf = std::numeric_limits<double>::infinity();

private:
    struct Arc {
        int to;
        double cap;
        double cost;
        int rev;  // index of the reverse arc in graph_[to]
    };
    std::vector<std::vector<Arc>> graph_;
};

} // namespace mixlab::detail
