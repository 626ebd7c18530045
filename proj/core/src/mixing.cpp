#include "mixlab/mixing.hpp"
#include "mixlab/parallel.hpp"
#include "mixlab/pushforward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>

namespace mixlab {

void write_decay_csv(std::ostream& os, const DecayCurve& curve) {
    os << "k,tv,band_lo,band_hi,floor\n";
    char buf[160];
    for (std::size_t k = 0; k < curve.tv_values.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", k,
                      curve.tv_values[k], curve.bands[k].lo, curve.bands[k].hi,
                      curve.noise_floor);
        os << buf;
    }
}

namespace {

std::vector<int> uniform_cells(int dim, int cells) {
    return std::vector<int>(static_cast<std::size_t>(dim), cells);
}

int decorrelation_gap(const std::vector<double>& obs) {
    const std::size_t n = obs.size();
    double mean = std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double x : obs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n);
    if (var < 1e-14) return 1;
    for (std::size_t lag = 1; lag <= 64 && lag < n / 4; ++lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i)
            acc += (obs[i] - mean) * (obs[i + lag] - mean);
        acc /= static_cast<double>(n - lag) * var;
        if (std::abs(acc) < 0.1) return static_cast<int>(lag);
    }
    throw InsufficientDecorrelation(
        "estimate_stationary: pilot autocorrelation stays above 0.1 up to lag 64");
}

// Bulk trajectory sampler: Markov noise goes through the quantized-CDF cache
// (one prebuilt row per quantized y, read-only afterwards), the stationary
// wrapper falls back to the exact conditional draw. The quantization error is
// shared by every consumer of the same sampler, so decay measurements compare
// like with like.
struct BulkSim {
    const RdsSystem& sys;
    const NoiseModel& noise;
    const GridDensity& eta0_law;
    std::optional<CdfCache> cache;

    BulkSim(const RdsSystem& s, const NoiseModel& n, const GridDensity& law)
        : sys(s), noise(n), eta0_law(law) {
        if (const MarkovKernel* k = std::get_if<MarkovKernel>(&n)) cache.emplace(*k, 512);
    }

    /// States u_1..u_n from u_0 (same layout as simulate_extended).
    std::vector<Vec> states(const Vec& u0, int n, RngStream& rng) const {
        std::vector<Vec> out;
        out.reserve(static_cast<std::size_t>(n));
        if (cache) {
            Vec xi = eta0_law.sample(rng);
            Vec v = u0;
            for (int k = 0; k < n; ++k) {
                xi = cache->sample_quantized(xi, rng);
                v = step(sys, v, xi);
                out.push_back(v);
            }
            return out;
        }
        ExtendedState U0 = initial_extended(sys, noise, u0, eta0_law, rng);
        auto traj = simulate_extended(sys, noise, U0, n, rng);
        for (auto& U : traj) out.push_back(U.state_v);
        return out;
    }
};

} // namespace

std::vector<GridDensity> estimate_stationary(const RdsSystem& sys, const NoiseModel& noise,
                                             const GridDensity& eta0_law, int burn_in,
                                             int ensemble_n, int cells, int product_cells,
                                             int segment_m, std::uint64_t seed,
                                             int harvest_per_trajectory) {
    if (segment_m < 0 || segment_m > 3)
        throw ConfigError("estimate_stationary: segment_m must be in 0..3");
    if (burn_in < 1) throw ConfigError("estimate_stationary: burn_in must be >= 1");
    std::uint64_t s = seed;
    std::uint64_t pilot_root = splitmix64(s);
    std::uint64_t main_root = splitmix64(s);

    BulkSim sim(sys, noise, eta0_law);

    // pilot run for the decorrelation gap
    int gap;
    {
        RngStream rng(pilot_root);
        auto traj = sim.states(sys.invariant_set.center(), burn_in + 2048, rng);
        std::vector<double> obs;
        for (std::size_t k = static_cast<std::size_t>(burn_in); k < traj.size(); ++k)
            obs.push_back(traj[k][0]);
        gap = decorrelation_gap(obs);
    }

    const int H = sys.dim_state;
    const int h = harvest_per_trajectory;
    const int steps = burn_in + (h - 1) * gap + segment_m;
    std::size_t N = static_cast<std::size_t>(ensemble_n);
    // flat storage: per trajectory, h segments of (segment_m + 1) states
    std::vector<double> store(N * static_cast<std::size_t>(h * (segment_m + 1) * H));
    parallel_for(N, [&](std::size_t i) {
        RngStream rng = RngStream::substream(main_root, i);
        Vec u0 = sys.invariant_set.sample(rng);
        auto traj = sim.states(u0, steps, rng);
        double* slot = store.data() + i * static_cast<std::size_t>(h * (segment_m + 1) * H);
        for (int seg = 0; seg < h; ++seg) {
            int base = burn_in + seg * gap;
            for (int j = 0; j <= segment_m; ++j) {
                const Vec& v = traj[static_cast<std::size_t>(base + j - 1)];
                for (int d = 0; d < H; ++d) *slot++ = v[d];
            }
        }
    });

    std::vector<GridDensity> marginals;
    for (int j = 0; j <= segment_m; ++j) {
        Box box = Box::power(sys.invariant_set, j + 1);
        GridDensity mu(box, uniform_cells(box.dim(), j == 0 ? cells : product_cells));
        Vec point(box.dim());
        const std::size_t seg_len = static_cast<std::size_t>((segment_m + 1) * H);
        for (std::size_t i = 0; i < N; ++i) {
            const double* traj_base =
                store.data() + i * static_cast<std::size_t>(h) * seg_len;
            for (int seg = 0; seg < h; ++seg) {
                const double* p = traj_base + static_cast<std::size_t>(seg) * seg_len;
                for (int d = 0; d < (j + 1) * H; ++d) point[d] = p[d];
                mu.value(mu.locate(box.clamp(point))) += 1.0;
            }
        }
        mu.normalize();
        marginals.push_back(std::move(mu));
    }
    return marginals;
}

DecayCurve decay_curve(const RdsSystem& sys, const NoiseModel& noise,
                       const GridDensity& eta0_law, const Vec& u0,
                       const GridDensity& mu_ref, int horizon, int ensemble_n,
                       std::uint64_t seed) {
    std::uint64_t s = seed;
    std::uint64_t main_root = splitmix64(s);
    std::uint64_t floor_root = splitmix64(s);
    std::uint64_t boot_root = splitmix64(s);

    const int H = sys.dim_state;
    std::size_t N = static_cast<std::size_t>(ensemble_n);
    std::vector<double> states(N * static_cast<std::size_t>((horizon + 1) * H));
    BulkSim sim(sys, noise, eta0_law);
    parallel_for(N, [&](std::size_t i) {
        RngStream rng = RngStream::substream(main_root, i);
        auto traj = sim.states(u0, horizon, rng);
        double* slot = states.data() + i * static_cast<std::size_t>((horizon + 1) * H);
        for (int d = 0; d < H; ++d) *slot++ = u0[d];
        for (int k = 0; k < horizon; ++k)
            for (int d = 0; d < H; ++d) *slot++ = traj[static_cast<std::size_t>(k)][d];
    });

    DecayCurve curve;
    curve.horizon = horizon;
    for (int k = 0; k <= horizon; ++k) {
        std::vector<Vec> pts(N);
        for (std::size_t i = 0; i < N; ++i) {
            Vec v(H);
            const double* p =
                states.data() + i * static_cast<std::size_t>((horizon + 1) * H) +
                static_cast<std::size_t>(k * H);
            for (int d = 0; d < H; ++d) v[d] = p[d];
            pts[i] = mu_ref.box().clamp(v);
        }
        auto cloud = EmpiricalMeasure::equal_weights(std::move(pts), mu_ref.box(), main_root);
        GridDensity hist = histogram(cloud, mu_ref.box(), mu_ref.cells_per_axis());
        curve.tv_values.push_back(tv_distance(hist, mu_ref));
        curve.bands.push_back(bootstrap_tv_band_vs_ref(
            cloud, mu_ref, 200, 0.95, boot_root + static_cast<std::uint64_t>(k)));
    }

    // operational floor: median TV between independent same-size draws of mu_ref
    std::vector<double> floors;
    for (int rep = 0; rep < 5; ++rep) {
        GridDensity ha(mu_ref.box(), mu_ref.cells_per_axis());
        GridDensity hb(mu_ref.box(), mu_ref.cells_per_axis());
        RngStream ra = RngStream::substream(floor_root, static_cast<std::uint64_t>(2 * rep));
        RngStream rb = RngStream::substream(floor_root, static_cast<std::uint64_t>(2 * rep + 1));
        for (std::size_t i = 0; i < N; ++i) {
            ha.value(ha.locate(mu_ref.sample(ra))) += 1.0;
            hb.value(hb.locate(mu_ref.sample(rb))) += 1.0;
        }
        ha.normalize();
        hb.normalize();
        floors.push_back(tv_distance(ha, hb));
    }
    std::sort(floors.begin(), floors.end());
    curve.noise_floor = floors[floors.size() / 2];
    return curve;
}

RateFit fit_rate(const DecayCurve& curve) {
    std::vector<std::pair<int, double>> usable;
    for (std::size_t k = 0; k < curve.tv_values.size(); ++k) {
        double tv = curve.tv_values[k];
        if (tv > 10.0 * curve.noise_floor && tv <= 0.95)
            usable.push_back({static_cast<int>(k), std::log(tv)});
    }
    if (usable.size() < 4)
        throw TooFewPoints("fit_rate: only " + std::to_string(usable.size()) +
                           " points between 10x the noise floor and 0.95");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [k, y] : usable) {
        sx += k;
        sy += y;
        sxx += static_cast<double>(k) * k;
        sxy += k * y;
    }
    double n = static_cast<double>(usable.size());
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double intercept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0, mean = sy / n;
    for (auto [k, y] : usable) {
        double fit = intercept + slope * k;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean) * (y - mean);
    }
    RateFit fit;
    fit.c_fit = std::exp(intercept);
    fit.gamma_fit = -slope;
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    fit.k_min = usable.front().first;
    fit.k_max = usable.back().first;
    return fit;
}

namespace {

int auto_cells(const MarkovKernel& kernel, int worst_steps) {
    for (int cells = 256; cells <= 4096; cells *= 2)
        if (kernel_quadrature_bound(kernel, cells, worst_steps) <= 0.08) return cells;
    return 4096;
}

// Largest delta <= hi such that m kicked steps with adversarial kicks of size
// delta keep every probe start within target_norm.
double kick_margin(const RdsSystem& sys, int m, double hi, double target_norm) {
    std::vector<Vec> starts;
    const Box& X = sys.invariant_set;
    for (std::uint64_t mask = 0; mask < (1ULL << X.dim()); ++mask) {
        Vec p(X.dim());
        for (int i = 0; i < X.dim(); ++i) p[i] = (mask >> i) & 1 ? X.hi()[i] : X.lo()[i];
        starts.push_back(p);
    }
    starts.push_back(X.center());
    RngStream rng(1212);
    for (int i = 0; i < 16; ++i) starts.push_back(X.sample(rng));

    std::vector<std::vector<Vec>> patterns;  // unit kick directions per step
    auto constant_pattern = [&](double sign) {
        std::vector<Vec> pat;
        for (int k = 0; k < m; ++k) pat.push_back(Vec::Constant(sys.dim_noise, sign));
        return pat;
    };
    patterns.push_back(constant_pattern(1.0));
    patterns.push_back(constant_pattern(-1.0));
    RngStream prng(3434);
    for (int r = 0; r < 16; ++r) {
        std::vector<Vec> pat;
        for (int k = 0; k < m; ++k) {
            Vec v(sys.dim_noise);
            for (int d = 0; d < sys.dim_noise; ++d)
                v[d] = prng.uniform01() < 0.5 ? -1.0 : 1.0;
            pat.push_back(v);
        }
        patterns.push_back(pat);
    }

    auto worst_after = [&](double delta) {
        double worst = 0.0;
        for (const Vec& s0 : starts) {
            for (const auto& pat : patterns) {
                Vec v = s0;
                for (int k = 0; k < m; ++k) v = sys.map(v, delta * pat[static_cast<std::size_t>(k)]);
                worst = std::max(worst, v.norm());
            }
        }
        return worst;
    };

    double lo = 0.0;
    if (worst_after(hi) <= target_norm) return hi;
    for (int it = 0; it < 30; ++it) {
        double mid = 0.5 * (lo + hi);
        if (worst_after(mid) <= target_norm)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

} // namespace

RecurrenceReport certify_recurrence(const RdsSystem& sys, const MarkovKernel& kernel,
                                    double radius, int budget_m, int mc_trials,
                                    std::uint64_t seed) {
    if (radius <= 0.0) throw ConfigError("certify_recurrence: radius must be positive");
    DissipativityOptions dopts;
    dopts.budget = budget_m;
    int m = check_dissipativity(sys, radius / 2.0, dopts);
    if (m < 1) m = 1;

    double kick_cap = kernel.noise_support.hi().cwiseAbs().minCoeff();
    double delta = kick_margin(sys, m, std::min(0.7 * radius, kick_cap), 0.7 * radius);
    if (delta <= 0.0)
        throw BudgetExceeded("certify_recurrence: no positive kick margin at the target "
                             "radius");

    const int budget_l = std::min(budget_m, 4);
    const int cells = auto_cells(kernel, budget_l + m);
    RecurrenceCertificate reach = check_strong_recurrence(kernel, delta, budget_l, 17, cells);
    double p2 = reach.kappa;

    // probability of staying near zero for m steps: each step lands in the
    // cube C inscribed in B(delta) with probability at least
    // vol(C) * min rho over B(delta) x C, the min taken as a lattice scan
    // minus the declared Lipschitz slack
    double p1;
    {
        const int d = kernel.noise_support.dim();
        const double half_side = delta / std::sqrt(static_cast<double>(d));
        const int scan = d == 1 ? 65 : 17;
        const double hy = 2.0 * delta / (scan - 1);
        const double hz = 2.0 * half_side / (scan - 1);
        std::vector<Vec> ys, zs;
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (;;) {  // odometer over the d-dim lattice
            Vec y(d), z(d);
            for (int a = 0; a < d; ++a) {
                y[a] = -delta + idx[static_cast<std::size_t>(a)] * hy;
                z[a] = -half_side + idx[static_cast<std::size_t>(a)] * hz;
            }
            if (y.norm() <= delta) ys.push_back(y);
            zs.push_back(z);
            int a = 0;
            while (a < d && ++idx[static_cast<std::size_t>(a)] == scan) {
                idx[static_cast<std::size_t>(a)] = 0;
                ++a;
            }
            if (a == d) break;
        }
        double rho_min = std::numeric_limits<double>::infinity();
        for (const Vec& y : ys)
            for (const Vec& z : zs) rho_min = std::min(rho_min, kernel.density(y, z));
        double spacing =
            0.5 * std::sqrt(static_cast<double>(d) * (hy * hy + hz * hz));
        double rho_lb = rho_min - kernel.lipschitz_bound * spacing;
        double vol_c = std::pow(2.0 * half_side, d);
        double per_step = std::min(1.0, vol_c * std::max(0.0, rho_lb));
        p1 = std::pow(per_step, m);
    }

    double p_bound = p1 * p2;
    if (p_bound <= 0.0)
        throw BudgetExceeded("certify_recurrence: conservative bound vanished (p1 = " +
                             std::to_string(p1) + ", p2 = " + std::to_string(p2) + ")");

    // direct Monte-Carlo hitting frequency at step l + m from extremal starts
    int total_steps = reach.steps_l + m;
    std::vector<std::pair<Vec, Vec>> starts;
    const Box& X = sys.invariant_set;
    const Box& K = kernel.noise_support;
    for (int sv : {-1, 0, 1})
        for (int sn : {-1, 0, 1})
            starts.push_back({sv < 0   ? Vec(X.lo())
                              : sv > 0 ? Vec(X.hi())
                                       : Vec(X.center()),
                              sn < 0   ? Vec(K.lo())
                              : sn > 0 ? Vec(K.hi())
                                       : Vec(K.center())});

    CdfCache cache(kernel, 512);
    std::size_t per_start = static_cast<std::size_t>(
        std::max(1, mc_trials / static_cast<int>(starts.size())));
    double worst_freq = std::numeric_limits<double>::infinity();
    for (std::size_t si = 0; si < starts.size(); ++si) {
        std::vector<char> hits(per_start, 0);
        parallel_for(per_start, [&](std::size_t i) {
            RngStream rng = RngStream::substream(
                seed, si * (per_start + 1) + i);
            Vec v = starts[si].first;
            Vec xi = starts[si].second;
            for (int k = 0; k < total_steps; ++k) {
                Vec z = cache.sample_quantized(xi, rng);
                v = sys.map(v, z);
                xi = z;
            }
            double norm2 = v.squaredNorm() + xi.squaredNorm();
            hits[i] = norm2 <= radius * radius ? 1 : 0;
        });
        double freq = 0.0;
        for (char h : hits) freq += h;
        freq /= static_cast<double>(per_start);
        worst_freq = std::min(worst_freq, freq);
    }
    if (worst_freq < p_bound)
        throw CertificateContradicted(
            "certify_recurrence: Monte-Carlo frequency " + std::to_string(worst_freq) +
            " fell below the certified bound " + std::to_string(p_bound));

    RecurrenceReport report;
    report.m_steps = total_steps;
    report.p_bound = p_bound;
    report.target_radius = radius;
    report.mc_frequency = worst_freq;
    return report;
}

MinorizingMeasure minorizing_measure(const RdsSystem& sys, const MarkovKernel& kernel,
                                     double delta, int state_cells, int noise_cells) {
    const int fine = 512;
    GridDensity env;
    double env_slack;
    try {
        check_minorization(kernel, delta, 65, fine, &env);
    } catch (const MinorizationFails& e) {
        throw EmptyMinorization(std::string("minorizing_measure: ") + e.what());
    }
    {
        double spacing = 2.0 * delta / 64.0;
        env_slack = kernel.lipschitz_bound *
                    (0.5 * spacing + 0.5 * std::sqrt(kernel.noise_support.dim()) *
                                         env.cell_width(0));
    }
    auto m_used = [&](const Vec& z) {
        std::size_t flat;
        if (!env.try_locate(z, flat)) return 0.0;
        return std::max(0.0, env.value(flat) - env_slack);
    };

    // v-probes in the delta-ball of the state space
    std::vector<Vec> v_probes;
    for (int p = 0; p < 5; ++p) {
        double t = static_cast<double>(p) / 4.0;
        v_probes.push_back(Vec::Constant(sys.dim_state, -delta + 2 * delta * t));
    }

    Box product = Box::product(sys.invariant_set, kernel.noise_support);
    std::vector<int> cells;
    for (int d = 0; d < sys.dim_state; ++d) cells.push_back(state_cells);
    for (int d = 0; d < sys.dim_noise; ++d) cells.push_back(noise_cells);
    GridDensity lambda(product, cells);

    GridDensity noise_axis(kernel.noise_support,
                           uniform_cells(sys.dim_noise, noise_cells));
    GridDensity state_axis(sys.invariant_set, uniform_cells(sys.dim_state, state_cells));

    RegularMap F;
    F.dim_in = sys.dim_noise;
    F.dim_out = sys.dim_state;
    F.eval = [&](const Vec& U, const Vec& z1) {
        Vec v = U.head(sys.dim_state);
        Vec z2 = U.tail(sys.dim_noise);
        return sys.map(sys.map(v, z1), z2);
    };
    F.d_y = [&](const Vec& U, const Vec& z1) {
        Vec v = U.head(sys.dim_state);
        Vec z2 = U.tail(sys.dim_noise);
        Vec mid = sys.map(v, z1);
        return Mat(sys.d_state(mid, z2) * sys.d_noise(v, z1));
    };

    ParamDensityKernel rho1;
    rho1.support = kernel.noise_support;
    rho1.density = [&](const Vec&, const Vec& z1) {
        return m_used(z1) * bump_cutoff(z1.norm() / delta);
    };

    PushforwardOptions opts;
    opts.normalize = false;

    // lambda(v2, z2) = min over v-probes of Push[m bump](v2 | v, z2) * m(z2),
    // shaved 5% for grid discretization before extracting the flat component
    bool any_positive = false;
    for (std::size_t zc = 0; zc < noise_axis.cell_count(); ++zc) {
        Vec z2 = noise_axis.cell_center(zc);
        double mz2 = m_used(z2);
        std::vector<double> min_push(state_axis.cell_count(),
                                     std::numeric_limits<double>::infinity());
        if (mz2 > 0.0) {
            for (const Vec& v : v_probes) {
                Vec U(sys.dim_state + sys.dim_noise);
                U.head(sys.dim_state) = v;
                U.tail(sys.dim_noise) = z2;
                PushforwardResult push = pushforward_density_detailed(
                    F, rho1, U, sys.invariant_set, state_axis.cells_per_axis(), opts);
                for (std::size_t sc = 0; sc < state_axis.cell_count(); ++sc)
                    min_push[sc] = std::min(min_push[sc], push.density.value(sc));
            }
        } else {
            std::fill(min_push.begin(), min_push.end(), 0.0);
        }
        for (std::size_t sc = 0; sc < state_axis.cell_count(); ++sc) {
            std::vector<int> idx = state_axis.unflatten(sc);
            std::vector<int> zidx = noise_axis.unflatten(zc);
            idx.insert(idx.end(), zidx.begin(), zidx.end());
            double val = 0.95 * min_push[sc] * mz2;
            lambda.value(lambda.flatten(idx)) = val;
            if (val > 0.0) any_positive = true;
        }
    }
    if (!any_positive)
        throw EmptyMinorization("minorizing_measure: the two-step lower density vanishes");

    // flat component gamma 1_W maximizing mass
    std::vector<double> sorted(lambda.values());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double best_mass = 0.0, best_gamma = 0.0;
    for (std::size_t i = 0; i < sorted.size() && sorted[i] > 0.0; ++i) {
        double mass = sorted[i] * static_cast<double>(i + 1) * lambda.cell_volume();
        if (mass > best_mass) {
            best_mass = mass;
            best_gamma = sorted[i];
        }
    }
    if (best_mass <= 0.0)
        throw EmptyMinorization("minorizing_measure: no positive flat component");

    MinorizingMeasure out;
    out.gamma = best_gamma;
    out.mass = best_mass;
    out.delta = delta;
    GridDensity flat(product, cells);
    for (std::size_t i = 0; i < lambda.cell_count(); ++i)
        flat.value(i) = lambda.value(i) >= best_gamma ? best_gamma : 0.0;
    out.lambda = std::move(flat);
    return out;
}

double verify_minorization_mc(const RdsSystem& sys, const MarkovKernel& kernel,
                              const MinorizingMeasure& lam, int probes, int samples,
                              std::uint64_t seed) {
    CdfCache cache(kernel, 512);
    const GridDensity& lambda = lam.lambda;
    std::vector<double> margins(static_cast<std::size_t>(probes));
    GridDensity z_layout(kernel.noise_support,
                         uniform_cells(kernel.noise_support.dim(), kernel.sampler_grid));

    parallel_for(static_cast<std::size_t>(probes), [&](std::size_t p) {
        RngStream rng = RngStream::substream(seed, p);
        Vec v(sys.dim_state), xi0(sys.dim_noise);
        for (int d = 0; d < sys.dim_state; ++d) v[d] = rng.uniform(-lam.delta, lam.delta);
        for (int d = 0; d < sys.dim_noise; ++d) xi0[d] = rng.uniform(-lam.delta, lam.delta);

        auto cdf0 = detail::conditional_cdf(
            z_layout, [&](const Vec& z) { return kernel.density(xi0, z); });
        std::vector<double> counts(lambda.cell_count(), 0.0);
        Vec point(lambda.box().dim());
        for (int i = 0; i < samples; ++i) {
            Vec z1 = detail::inverse_cdf_draw(z_layout, cdf0, rng);
            Vec z2 = cache.sample_quantized(z1, rng);
            Vec v2 = sys.map(sys.map(v, z1), z2);
            point.head(sys.dim_state) = v2;
            point.tail(sys.dim_noise) = z2;
            std::size_t flat;
            if (lambda.try_locate(point, flat)) counts[flat] += 1.0;
        }
        double worst = std::numeric_limits<double>::infinity();
        double n = static_cast<double>(samples);
        for (std::size_t c = 0; c < lambda.cell_count(); ++c) {
            double lp = lambda.prob(c);
            if (lp <= 0.0) continue;
            double phat = counts[c] / n;
            double pref = std::max(phat, lp);
            double slack = 3.0 * std::sqrt(pref * (1.0 - pref) / n) + 2.0 / n;
            worst = std::min(worst, phat + slack - lp);
        }
        margins[p] = worst;
    });
    return *std::min_element(margins.begin(), margins.end());
}

GridDensity two_step_extended_law(const RdsSystem& sys, const MarkovKernel& kernel,
                                  const Vec& v, const Vec& xi0, int state_cells,
                                  int noise_cells, int sub) {
    Box product = Box::product(sys.invariant_set, kernel.noise_support);
    std::vector<int> cells;
    for (int d = 0; d < sys.dim_state; ++d) cells.push_back(state_cells);
    for (int d = 0; d < sys.dim_noise; ++d) cells.push_back(noise_cells);
    GridDensity joint(product, cells);
    GridDensity fine(kernel.noise_support,
                     uniform_cells(sys.dim_noise, noise_cells * sub));

    Vec point(product.dim());
    for (std::size_t i = 0; i < fine.cell_count(); ++i) {
        Vec z1 = fine.cell_center(i);
        double w1 = kernel.density(xi0, z1) * fine.cell_volume();
        if (w1 <= 0.0) continue;
        Vec mid = sys.map(v, z1);
        for (std::size_t j = 0; j < fine.cell_count(); ++j) {
            Vec z2 = fine.cell_center(j);
            double w2 = kernel.density(z1, z2) * fine.cell_volume();
            if (w2 <= 0.0) continue;
            point.head(sys.dim_state) = sys.map(mid, z2);
            point.tail(sys.dim_noise) = z2;
            std::size_t flat;
            if (joint.try_locate(point, flat))
                joint.value(flat) += w1 * w2 / joint.cell_volume();
        }
    }
    if (joint.total_mass() < 1e-12)
        throw DegenerateDensity("two_step_extended_law: vanishing grid mass");
    joint.normalize();
    return joint;
}

CouplingCertificate certify_coupling(const RdsSystem& sys, const MarkovKernel& kernel,
                                     double lam_mass, double ball_radius, int pairs,
                                     std::uint64_t seed, int state_cells, int noise_cells,
                                     int sub) {
    if (lam_mass <= 0.0 || lam_mass >= 1.0)
        throw ConfigError("certify_coupling: lam_mass must lie in (0, 1)");
    std::vector<double> tvs(static_cast<std::size_t>(pairs));
    parallel_for(static_cast<std::size_t>(pairs), [&](std::size_t p) {
        RngStream rng = RngStream::substream(seed, p);
        auto draw = [&] {
            Vec v(sys.dim_state), xi(sys.dim_noise);
            for (int d = 0; d < sys.dim_state; ++d)
                v[d] = rng.uniform(-ball_radius, ball_radius);
            for (int d = 0; d < sys.dim_noise; ++d)
                xi[d] = rng.uniform(-ball_radius, ball_radius);
            return std::pair<Vec, Vec>(v, xi);
        };
        auto [v1, xi1] = draw();
        auto [v2, xi2] = draw();
        GridDensity a = two_step_extended_law(sys, kernel, v1, xi1, state_cells,
                                              noise_cells, sub);
        GridDensity b = two_step_extended_law(sys, kernel, v2, xi2, state_cells,
                                              noise_cells, sub);
        tvs[p] = tv_distance(a, b);
    });
    double worst = *std::max_element(tvs.begin(), tvs.end());
    double band = kernel_quadrature_bound(kernel, noise_cells * sub, 2) + 0.02;
    if (worst > 1.0 - lam_mass + band)
        throw CertificateContradicted("certify_coupling: worst pair TV " +
                                      std::to_string(worst) + " exceeds 1 - mass + band = " +
                                      std::to_string(1.0 - lam_mass + band));
    CouplingCertificate cert;
    cert.n_steps = 2;
    cert.epsilon = lam_mass;
    cert.ball_radius = ball_radius;
    cert.worst_pair_tv = worst;
    return cert;
}

} // namespace mixlab
