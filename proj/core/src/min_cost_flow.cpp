#include "mixlab/detail/min_cost_flow.hpp"

#include <cmath>
#include <queue>

namespace mixlab::detail {

MinCostFlow::MinCostFlow(int node_count) : graph_(static_cast<std::size_t>(node_count)) {}

void MinCostFlow::add_edge(int from, int to, double capacity, double cost) {
    auto& fw = graph_[static_cast<std::size_t>(from)];
    auto& bw = graph_[static_cast<std::size_t>(to)];
    fw.push_back({to, capacity, cost, static_cast<int>(bw.size())});
    bw.push_back({from, 0.0, -cost, static_cast<int>(fw.size()) - 1});
}

double MinCostFlow::solve(int s, int t, double amount) {
    const std::size_t n = graph_.size();
    std::vector<double> potential(n, 0.0);
    double remaining = amount;
    double total_cost = 0.0;
    const double eps = 1e-13 * std::max(1.0, amount);

    while (remaining > eps) {
        std::vector<double> dist(n, kInf);
        std::vector<int> prev_node(n, -1), prev_arc(n, -1);
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        dist[static_cast<std::size_t>(s)] = 0.0;
        heap.push({0.0, s});
        while (!heap.empty()) {
            auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[static_cast<std::size_t>(u)] + 1e-15) continue;
            for (std::size_t a = 0; a < graph_[static_cast<std::size_t>(u)].size(); ++a) {
                const Arc& arc = graph_[static_cast<std::size_t>(u)][a];
                if (arc.cap <= eps) continue;
                double rc = arc.cost + potential[static_cast<std::size_t>(u)] -
                            potential[static_cast<std::size_t>(arc.to)];
                if (rc < 0.0) rc = 0.0;  // numeric guard
                double nd = d + rc;
                if (nd < dist[static_cast<std::size_t>(arc.to)] - 1e-15) {
                    dist[static_cast<std::size_t>(arc.to)] = nd;
                    prev_node[static_cast<std::size_t>(arc.to)] = u;
                    prev_arc[static_cast<std::size_t>(arc.to)] = static_cast<int>(a);
                    heap.push({nd, arc.to});
                }
            }
        }
        if (!std::isfinite(dist[static_cast<std::size_t>(t)]))
            return std::numeric_limits<double>::quiet_NaN();
        for (std::size_t v = 0; v < n; ++v)
            if (std::isfinite(dist[v])) potential[v] += dist[v];

        double push = remaining;
        for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)]) {
            const Arc& arc = graph_[static_cast<std::size_t>(prev_node[static_cast<std::size_t>(v)])]
                                   [static_cast<std::size_t>(prev_arc[static_cast<std::size_t>(v)])];
            push = std::min(push, arc.cap);
        }
        for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)]) {
            Arc& arc = graph_[static_cast<std::size_t>(prev_node[static_cast<std::size_t>(v)])]
                             [static_cast<std::size_t>(prev_arc[static_cast<std::size_t>(v)])];
            arc.cap -= push;
            graph_[static_cast<std::size_t>(arc.to)][static_cast<std::size_t>(arc.rev)].cap += push;
            total_cost += push * arc.cost;
        }
        remaining -= push;
    }
    return total_cost;
}

} // namespace mixlab::detail
