#include "mixlab/markov_noise.hpp"
#include "mixlab/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace mixlab {

namespace {

std::vector<int> uniform_cells(int dim, int cells) {
    return std::vector<int>(static_cast<std::size_t>(dim), cells);
}

} // namespace

namespace detail {

std::vector<double> conditional_cdf(const GridDensity& layout,
                                    const std::function<double(const Vec&)>& density) {
    const std::size_t n = layout.cell_count();
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = density(layout.cell_center(i));
        if (v < 0.0) v = 0.0;
        acc += v;
        cdf[i] = acc;
    }
    if (acc < 1e-12)
        throw DegenerateDensity("sample: conditional density integrates to < 1e-12");
    for (double& c : cdf) c /= acc;
    return cdf;
}

Vec inverse_cdf_draw(const GridDensity& layout, const std::vector<double>& cdf,
                     RngStream& rng) {
    double u = rng.uniform01();
    std::size_t cell = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (cell >= cdf.size()) cell = cdf.size() - 1;
    double lo = cell == 0 ? 0.0 : cdf[cell - 1];
    double seg = cdf[cell] - lo;
    double frac = seg > 0.0 ? (u - lo) / seg : 0.5;
    if (frac < 0.0) frac = 0.0;
    if (frac > 1.0) frac = 1.0;
    Vec z = layout.cell_center(cell);
    z[0] += (frac - 0.5) * layout.cell_width(0);
    for (int d = 1; d < layout.box().dim(); ++d)
        z[d] += (rng.uniform01() - 0.5) * layout.cell_width(d);
    return z;
}

} // namespace detail

namespace {

std::vector<double> build_cdf(const MarkovKernel& kernel, const GridDensity& layout,
                              const Vec& y) {
    return detail::conditional_cdf(
        layout, [&](const Vec& z) { return kernel.density(y, z); });
}

} // namespace

Vec sample(const MarkovKernel& kernel, const Vec& y, RngStream& rng) {
    GridDensity layout(kernel.noise_support,
                       uniform_cells(kernel.noise_support.dim(), kernel.sampler_grid));
    return detail::inverse_cdf_draw(layout, build_cdf(kernel, layout, y), rng);
}

CdfCache::CdfCache(const MarkovKernel& kernel, int y_cells)
    : kernel_(kernel),
      y_grid_(kernel.noise_support, uniform_cells(kernel.noise_support.dim(), y_cells)),
      z_grid_(kernel.noise_support,
              uniform_cells(kernel.noise_support.dim(), kernel.sampler_grid)) {
    // eager build so sampling is lock-free afterwards
    for (std::size_t i = 0; i < y_grid_.cell_count(); ++i)
        rows_.emplace(i, build_cdf(kernel_, z_grid_, y_grid_.cell_center(i)));
}

const std::vector<double>& CdfCache::row(std::size_t y_flat) const { return rows_.at(y_flat); }

Vec CdfCache::sample_quantized(const Vec& y, RngStream& rng) const {
    return detail::inverse_cdf_draw(z_grid_, row(y_grid_.locate(y_grid_.box().clamp(y))),
                                    rng);
}

double kernel_quadrature_bound(const MarkovKernel& kernel, int cells_per_axis, int k) {
    const Box& box = kernel.noise_support;
    double diam2 = 0.0;
    for (int d = 0; d < box.dim(); ++d) {
        double w = (box.hi()[d] - box.lo()[d]) / cells_per_axis;
        diam2 += w * w;
    }
    return kernel.lipschitz_bound * std::sqrt(diam2) * k;
}

GridDensity propagate_density(const MarkovKernel& kernel, const GridDensity& d) {
    GridDensity out(d.box(), d.cells_per_axis());
    const std::size_t n = d.cell_count();
    std::vector<Vec> centers(n);
    for (std::size_t i = 0; i < n; ++i) centers[i] = d.cell_center(i);
    parallel_for(n, [&](std::size_t j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double w = d.value(i);
            if (w > 0.0) acc += w * kernel.density(centers[i], centers[j]);
        }
        out.value(j) = acc * d.cell_volume();
    });
    return out;
}

GridDensity k_step_kernel(const MarkovKernel& kernel, const Vec& y, int k,
                          int cells_per_axis) {
    if (k < 1) throw ConfigError("k_step_kernel: k must be >= 1");
    double bound = kernel_quadrature_bound(kernel, cells_per_axis, k);
    if (bound > 0.1)
        throw ResolutionTooCoarse("k_step_kernel: quadrature bound " +
                                  std::to_string(bound) + " exceeds 0.1 at " +
                                  std::to_string(cells_per_axis) + " cells");
    GridDensity d(kernel.noise_support,
                  uniform_cells(kernel.noise_support.dim(), cells_per_axis));
    for (std::size_t i = 0; i < d.cell_count(); ++i)
        d.value(i) = std::max(0.0, kernel.density(y, d.cell_center(i)));
    if (d.total_mass() < 1e-12)
        throw DegenerateDensity("k_step_kernel: one-step density has vanishing mass");
    d.normalize();
    for (int step = 1; step < k; ++step) {
        d = propagate_density(kernel, d);
        d.normalize();
    }
    return d;
}

namespace {

// Probe points for infima over (a slice of) the support: per-axis lattice in
// 1-d, seeded random points above.
std::vector<Vec> probe_points(const Box& box, int probes, std::uint64_t seed) {
    std::vector<Vec> pts;
    if (box.dim() == 1) {
        for (int i = 0; i < probes; ++i) {
            double t = probes == 1 ? 0.5 : static_cast<double>(i) / (probes - 1);
            pts.push_back(vec1(box.lo()[0] + t * (box.hi()[0] - box.lo()[0])));
        }
    } else {
        RngStream rng(seed);
        for (std::uint64_t mask = 0; mask < (1ULL << box.dim()); ++mask) {
            Vec p(box.dim());
            for (int i = 0; i < box.dim(); ++i)
                p[i] = (mask >> i) & 1 ? box.hi()[i] : box.lo()[i];
            pts.push_back(p);
        }
        pts.push_back(box.center());
        for (int i = 0; i < probes; ++i) pts.push_back(box.sample(rng));
    }
    return pts;
}

double probe_spacing(const Box& box, int probes) {
    if (box.dim() == 1) return (box.hi()[0] - box.lo()[0]) / std::max(1, probes - 1);
    return box.diameter() / std::cbrt(static_cast<double>(probes));
}

} // namespace

MinorizationCertificate check_minorization(const MarkovKernel& kernel, double radius_r,
                                           int probes, int cells_per_axis,
                                           GridDensity* envelope) {
    if (radius_r <= 0.0) throw ConfigError("check_minorization: radius must be positive");
    const Box& K = kernel.noise_support;
    Vec lo = K.lo(), hi = K.hi();
    for (int d = 0; d < K.dim(); ++d) {
        lo[d] = std::max(lo[d], -radius_r);
        hi[d] = std::min(hi[d], radius_r);
        if (lo[d] >= hi[d])
            throw ConfigError("check_minorization: ball does not meet the support");
    }
    Box ball(lo, hi);
    std::vector<Vec> ys = probe_points(ball, probes, 4242);

    GridDensity m(K, uniform_cells(K.dim(), cells_per_axis));
    for (std::size_t j = 0; j < m.cell_count(); ++j) {
        Vec z = m.cell_center(j);
        double env = std::numeric_limits<double>::infinity();
        for (const Vec& y : ys) env = std::min(env, kernel.density(y, z));
        m.value(j) = std::max(0.0, env);
    }

    double slack = kernel.lipschitz_bound *
                   (0.5 * probe_spacing(ball, probes) +
                    0.5 * std::sqrt(K.dim()) * m.cell_width(0));
    Vec zero = Vec::Zero(K.dim());
    double m0 = m.value(m.locate(zero)) - slack;
    if (m0 <= 0.0)
        throw MinorizationFails("check_minorization: envelope at 0 is " +
                                std::to_string(m0) + " after probe slack");

    MinorizationCertificate cert;
    cert.radius_r = radius_r;
    cert.lower_density_at_zero = m0;
    cert.minorizing_mass = m.total_mass();
    cert.probe_count = static_cast<int>(ys.size());
    if (envelope) *envelope = m;
    return cert;
}

RecurrenceCertificate check_strong_recurrence(const MarkovKernel& kernel, double delta,
                                              int budget_l, int probes,
                                              int cells_per_axis) {
    if (delta <= 0.0) throw ConfigError("check_strong_recurrence: delta must be positive");
    std::vector<Vec> ys = probe_points(kernel.noise_support, probes, 8989);
    std::vector<GridDensity> laws;
    laws.reserve(ys.size());

    auto ball_mass = [&](const GridDensity& d) {
        // cells entirely inside B(0, delta): conservative count
        double half_diam = 0.0;
        for (int a = 0; a < d.box().dim(); ++a)
            half_diam += 0.25 * d.cell_width(a) * d.cell_width(a);
        half_diam = std::sqrt(half_diam);
        double mass = 0.0;
        for (std::size_t i = 0; i < d.cell_count(); ++i)
            if (d.cell_center(i).norm() + half_diam <= delta) mass += d.prob(i);
        return mass;
    };

    for (int l = 1; l <= budget_l; ++l) {
        double bound = kernel_quadrature_bound(kernel, cells_per_axis, l);
        if (bound > 0.1)
            throw ResolutionTooCoarse("check_strong_recurrence: quadrature bound " +
                                      std::to_string(bound) + " exceeds 0.1");
        double inf = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < ys.size(); ++p) {
            if (l == 1) {
                laws.push_back(k_step_kernel(kernel, ys[p], 1, cells_per_axis));
            } else {
                laws[p] = propagate_density(kernel, laws[p]);
                laws[p].normalize();
            }
            inf = std::min(inf, ball_mass(laws[p]));
        }
        double kappa = inf - bound;
        if (kappa > 0.0) return {delta, l, kappa};
    }
    throw BudgetExceeded("check_strong_recurrence: no l <= " + std::to_string(budget_l) +
                         " gives positive conservative mass near 0");
}

GridDensity kernel_invariant_density(const MarkovKernel& kernel, int cells_per_axis,
                                     int max_iter, double tol) {
    const Box& K = kernel.noise_support;
    GridDensity d(K, uniform_cells(K.dim(), cells_per_axis));
    for (std::size_t i = 0; i < d.cell_count(); ++i) d.value(i) = 1.0;
    d.normalize();
    for (int it = 0; it < max_iter; ++it) {
        GridDensity next = propagate_density(kernel, d);
        next.normalize();
        double gap = 0.0;
        for (std::size_t i = 0; i < d.cell_count(); ++i)
            gap += std::abs(next.prob(i) - d.prob(i));
        d = next;
        if (0.5 * gap < tol) break;
    }
    return d;
}

namespace {

double take(std::map<std::string, double>& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    if (it == p.end()) return fallback;
    double v = it->second;
    p.erase(it);
    return v;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Numeric Lipschitz bound of a 1-d kernel density by dense central differences.
double scan_lipschitz_1d(const MarkovKernel& kernel) {
    const Box& K = kernel.noise_support;
    const int n = 201;
    const double h = (K.hi()[0] - K.lo()[0]) / (n - 1);
    double worst = 0.0;
    for (int i = 1; i + 1 < n; ++i) {
        double y = K.lo()[0] + i * h;
        for (int j = 1; j + 1 < n; ++j) {
            double z = K.lo()[0] + j * h;
            double dz = (kernel.density(vec1(y), vec1(z + h)) -
                         kernel.density(vec1(y), vec1(z - h))) / (2 * h);
            double dy = (kernel.density(vec1(y + h), vec1(z)) -
                         kernel.density(vec1(y - h), vec1(z))) / (2 * h);
            worst = std::max({worst, std::abs(dz), std::abs(dy)});
        }
    }
    return 1.15 * worst;
}

} // namespace

MarkovKernel kernel_catalog(const std::string& name,
                            const std::map<std::string, double>& params) {
    std::map<std::string, double> p = params;
    MarkovKernel k;
    if (name == "iid_uniform") {
        double kappa = take(p, "kappa", 1.0);
        int dim = static_cast<int>(take(p, "dim", 1));
        k.noise_support = Box::cube(kappa, dim);
        double inv_vol = 1.0 / k.noise_support.volume();
        k.density = [inv_vol](const Vec&, const Vec&) { return inv_vol; };
        k.lipschitz_bound = 0.0;
    } else if (name == "ar1_truncgauss") {
        double a = take(p, "a", 0.5);
        double s = take(p, "s", 0.3);
        double kappa = take(p, "kappa", 1.0);
        if (s <= 0.0) throw ConfigError("ar1_truncgauss: s must be positive");
        k.noise_support = Box::cube(kappa, 1);
        k.density = [a, s, kappa](const Vec& y, const Vec& z) {
            if (std::abs(z[0]) > kappa) return 0.0;
            double mean = a * y[0];
            double zfrac = std_normal_cdf((kappa - mean) / s) -
                           std_normal_cdf((-kappa - mean) / s);
            double u = (z[0] - mean) / s;
            return std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * M_PI) * zfrac);
        };
        k.lipschitz_bound = scan_lipschitz_1d(k);
    } else if (name == "drift_away") {
        double width = take(p, "width", 0.25);
        double shift = take(p, "shift", 0.5);
        double kappa = take(p, "kappa", 1.0);
        if (width <= 0.0 || width >= kappa)
            throw ConfigError("drift_away: width must lie in (0, kappa)");
        k.noise_support = Box::cube(kappa, 1);
        // compact quartic bump centred at clamp(y + shift); drifts mass away
        // from 0 and vanishes outside the bump window
        k.density = [width, shift, kappa](const Vec& y, const Vec& z) {
            double c = std::clamp(y[0] + shift, -kappa + width, kappa - width);
            double t = (z[0] - c) / width;
            if (std::abs(t) >= 1.0) return 0.0;
            double q = 1.0 - t * t;
            return (15.0 / (16.0 * width)) * q * q;
        };
        k.lipschitz_bound = scan_lipschitz_1d(k);
    } else {
        throw ConfigError("kernel_catalog: unknown kernel '" + name + "'");
    }
    k.sampler_grid = static_cast<int>(take(p, "sampler_grid", 256));
    if (!p.empty())
        throw ConfigError("kernel_catalog: unknown parameter '" + p.begin()->first + "'");
    return k;
}

} // namespace mixlab
