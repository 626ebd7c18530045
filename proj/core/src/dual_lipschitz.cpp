#include "mixlab/detail/min_cost_flow.hpp"
#include "mixlab/measures.hpp"

#include <cmath>

namespace mixlab {

namespace {

struct Edge {
    int a, b;
    double w;  // center distance
};

// The LP  max c.f  s.t.  sup|f| <= t, |f_i - f_j| <= s w_ij on edges
// is dual to a min-cost flow: supplies c_i, every edge carries flow at unit
// cost s*w, and a super node reachable at unit cost t absorbs/creates the
// sup-norm slack. V(t) below evaluates that flow for s = 1 - t.
double inner_value(const std::vector<double>& c, const std::vector<Edge>& edges,
                   double t, double s) {
    const int n = static_cast<int>(c.size());
    const int super = n, source = n + 1, sink = n + 2;
    detail::MinCostFlow mcf(n + 3);
    for (const Edge& e : edges) {
        mcf.add_edge(e.a, e.b, detail::MinCostFlow::kInf, s * e.w);
        mcf.add_edge(e.b, e.a, detail::MinCostFlow::kInf, s * e.w);
    }
    double supply = 0.0;
    for (int i = 0; i < n; ++i) {
        mcf.add_edge(i, super, detail::MinCostFlow::kInf, t);
        mcf.add_edge(super, i, detail::MinCostFlow::kInf, t);
        if (c[static_cast<std::size_t>(i)] > 0.0) {
            mcf.add_edge(source, i, c[static_cast<std::size_t>(i)], 0.0);
            supply += c[static_cast<std::size_t>(i)];
        } else if (c[static_cast<std::size_t>(i)] < 0.0) {
            mcf.add_edge(i, sink, -c[static_cast<std::size_t>(i)], 0.0);
        }
    }
    if (supply <= 0.0) return 0.0;
    double cost = mcf.solve(source, sink, supply);
    if (std::isnan(cost)) throw SolverFailure("dual_lipschitz: flow did not route");
    return cost;
}

// Worst-case ratio of 8-neighbour path length to Euclidean length for a
// rectangular grid with spacings hx, hy.
double octile_ratio(double hx, double hy) {
    double diag = std::hypot(hx, hy);
    double worst = 1.0;
    const int samples = 256;
    for (int k = 1; k < samples; ++k) {
        double theta = (0.5 * M_PI) * k / samples;
        double dx = std::cos(theta), dy = std::sin(theta);
        // steps along (hx,hy) diagonals plus straight remainder
        double m = std::min(dx / hx, dy / hy);
        double cost = diag * m + hx * (dx / hx - m) + hy * (dy / hy - m);
        worst = std::max(worst, cost);
    }
    return worst;
}

} // namespace

DualLipschitzResult dual_lipschitz_distance_detailed(const GridDensity& a, const GridDensity& b,
                                                     const DualLipschitzOptions& opts) {
    if (!a.same_support(b))
        throw MismatchedSupport("dual_lipschitz_distance: grids differ in box or resolution");
    const int dim = a.box().dim();
    if (dim > 2)
        throw ConfigError("dual_lipschitz_distance: exact LP limited to dims <= 2; "
                          "use dual_lipschitz_sampled_lower_bound");
    double ma = a.total_mass(), mb = b.total_mass();
    if (ma < 1e-300 || mb < 1e-300)
        throw EmptyMeasure("dual_lipschitz_distance: zero-mass measure");

    const std::size_t n = a.cell_count();
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = a.prob(i) / ma - b.prob(i) / mb;
    // canonical sign so the result is exactly symmetric in (a, b)
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(c[i]) > 1e-15) {
            if (c[i] < 0.0)
                for (auto& x : c) x = -x;
            break;
        }
    }

    std::vector<Edge> edges;
    double ratio = 1.0;
    double cell_diam = 0.0;
    if (dim == 1) {
        double h = a.cell_width(0);
        cell_diam = h;
        if (h <= opts.lipschitz_cap)
            for (int i = 0; i + 1 < static_cast<int>(n); ++i) edges.push_back({i, i + 1, h});
    } else {
        int nx = a.cells_per_axis()[0], ny = a.cells_per_axis()[1];
        double hx = a.cell_width(0), hy = a.cell_width(1);
        cell_diam = std::hypot(hx, hy);
        double diag = cell_diam;
        auto id = [&](int ix, int iy) { return ix * ny + iy; };
        for (int ix = 0; ix < nx; ++ix) {
            for (int iy = 0; iy < ny; ++iy) {
                if (ix + 1 < nx && hx <= opts.lipschitz_cap)
                    edges.push_back({id(ix, iy), id(ix + 1, iy), hx});
                if (iy + 1 < ny && hy <= opts.lipschitz_cap)
                    edges.push_back({id(ix, iy), id(ix, iy + 1), hy});
                if (ix + 1 < nx && iy + 1 < ny && diag <= opts.lipschitz_cap) {
                    edges.push_back({id(ix, iy), id(ix + 1, iy + 1), diag});
                    edges.push_back({id(ix + 1, iy), id(ix, iy + 1), diag});
                }
            }
        }
        ratio = octile_ratio(hx, hy);
    }

    // V(t) is concave in the budget split; golden-section over t in [0,1].
    auto V = [&](double t) { return inner_value(c, edges, t, 1.0 - t); };
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = 1.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = V(x1), f2 = V(x2);
    double best = std::max(f1, f2);
    double best_t = f1 > f2 ? x1 : x2;
    for (int it = 0; it < opts.outer_iterations; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = V(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = V(x1);
        }
        if (f1 > best) best = f1, best_t = x1;
        if (f2 > best) best = f2, best_t = x2;
    }

    DualLipschitzResult r;
    r.graph_ratio = ratio;
    r.value = best / ratio;
    r.discretization_bound = (1.0 - best_t) * cell_diam;
    return r;
}

double dual_lipschitz_distance(const GridDensity& a, const GridDensity& b) {
    return dual_lipschitz_distance_detailed(a, b).value;
}

double dual_lipschitz_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                               const Box& box, const std::vector<int>& cells) {
    return dual_lipschitz_distance(histogram(a, box, cells), histogram(b, box, cells));
}

double dual_lipschitz_sampled_lower_bound(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                          int trials, std::uint64_t seed) {
    // f(x) = t * cos(k.x + phi) has sup <= t and Lip <= t|k|; scale so the
    // bounded-Lipschitz budget is exactly 1. Any such f certifies a lower bound.
    const int dim = a.bounding_box.dim();
    double best = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(trial));
        Vec k(dim);
        for (int i = 0; i < dim; ++i) k[i] = rng.uniform(-4.0, 4.0);
        double phi = rng.uniform(0.0, 2.0 * M_PI);
        double t = 1.0 / (1.0 + k.norm());
        double s = 0.0;
        for (std::size_t i = 0; i < a.points.size(); ++i)
            s += a.weights[i] * t * std::cos(k.dot(a.points[i]) + phi);
        for (std::size_t i = 0; i < b.points.size(); ++i)
            s -= b.weights[i] * t * std::cos(k.dot(b.points[i]) + phi);
        best = std::max(best, std::abs(s));
    }
    return best;
}

} // namespace mixlab
