#include "mixlab/reduction.hpp"
#include "mixlab/parallel.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>

namespace mixlab {

PastBuffer PastBuffer::shifted(const Vec& eta) const {
    PastBuffer out;
    out.iota = iota;
    out.entries.assign(entries.begin() + 1, entries.end());
    out.entries.push_back(eta);
    return out;
}

double past_metric(const PastBuffer& a, const PastBuffer& b) {
    if (a.memory() != b.memory() || a.iota != b.iota)
        throw MismatchedBuffers("past_metric: buffers differ in memory or iota");
    double d = 0.0;
    double w = 1.0;
    for (int j = 0; j < a.memory(); ++j) {
        d += w * (a.entries[a.memory() - 1 - j] - b.entries[b.memory() - 1 - j]).norm();
        w /= a.iota;
    }
    return d;
}

void write_buffer(std::ostream& os, const PastBuffer& b) {
    std::uint32_t m = static_cast<std::uint32_t>(b.memory());
    std::uint32_t dim = m ? static_cast<std::uint32_t>(b.entries[0].size()) : 0;
    os.write(reinterpret_cast<const char*>(&m), sizeof m);
    os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    os.write(reinterpret_cast<const char*>(&b.iota), sizeof b.iota);
    for (const Vec& e : b.entries)
        os.write(reinterpret_cast<const char*>(e.data()),
                 static_cast<std::streamsize>(sizeof(double) * dim));
}

PastBuffer read_buffer(std::istream& is) {
    std::uint32_t m = 0, dim = 0;
    PastBuffer b;
    is.read(reinterpret_cast<char*>(&m), sizeof m);
    is.read(reinterpret_cast<char*>(&dim), sizeof dim);
    is.read(reinterpret_cast<char*>(&b.iota), sizeof b.iota);
    for (std::uint32_t i = 0; i < m; ++i) {
        Vec e(dim);
        is.read(reinterpret_cast<char*>(e.data()),
                static_cast<std::streamsize>(sizeof(double) * dim));
        b.entries.push_back(e);
    }
    if (!is) throw Error("read_buffer: truncated stream");
    return b;
}

const Vec& ExtendedState::last_noise() const {
    if (const Vec* xi = std::get_if<Vec>(&noise)) return *xi;
    return std::get<PastBuffer>(noise).last();
}

StationaryNoiseModel stationary_from_kernel(const MarkovKernel& kernel, int memory_m,
                                            double iota) {
    if (memory_m < 1) throw ConfigError("stationary_from_kernel: memory must be >= 1");
    StationaryNoiseModel m;
    m.noise_support = kernel.noise_support;
    MarkovKernel k = kernel;
    m.conditional_density = [k](const PastBuffer& b, const Vec& z) {
        return k.density(b.last(), z);
    };
    m.memory_m = memory_m;
    m.effective_memory = 1;
    m.iota = iota;
    m.burn_in = 8;  // memory-1 conditional forgets its start in a few steps
    m.lipschitz_bound = kernel.lipschitz_bound;
    m.sampler_grid = kernel.sampler_grid;
    return m;
}

namespace {

std::vector<int> uniform_cells(int dim, int cells) {
    return std::vector<int>(static_cast<std::size_t>(dim), cells);
}

GridDensity sampler_layout(const Box& support, int cells) {
    return GridDensity(support, uniform_cells(support.dim(), cells));
}

} // namespace

Vec sample_conditional(const StationaryNoiseModel& model, const PastBuffer& b,
                       RngStream& rng) {
    GridDensity layout = sampler_layout(model.noise_support, model.sampler_grid);
    auto cdf = detail::conditional_cdf(
        layout, [&](const Vec& z) { return model.conditional_density(b, z); });
    return detail::inverse_cdf_draw(layout, cdf, rng);
}

ExtendedState extended_map(const RdsSystem& sys, const ExtendedState& U, const Vec& zeta) {
    ExtendedState out;
    out.state_v = step(sys, U.state_v, zeta);
    if (std::holds_alternative<Vec>(U.noise))
        out.noise = zeta;
    else
        out.noise = std::get<PastBuffer>(U.noise).shifted(zeta);
    return out;
}

ExtendedState extended_map_mutated(const RdsSystem& sys, const ExtendedState& U,
                                   const Vec& zeta) {
    ExtendedState out;
    out.state_v = step(sys, U.state_v, zeta);
    out.noise = U.noise;
    return out;
}

GridDensity extended_kernel(const RdsSystem& sys, const MarkovKernel& kernel,
                            const ExtendedState& U, int state_cells, int noise_cells,
                            int sub) {
    if (sub < 1) throw ConfigError("extended_kernel: sub must be >= 1");
    Box product = Box::product(sys.invariant_set, kernel.noise_support);
    std::vector<int> cells;
    for (int d = 0; d < sys.dim_state; ++d) cells.push_back(state_cells);
    for (int d = 0; d < sys.dim_noise; ++d) cells.push_back(noise_cells);
    GridDensity joint(product, cells);

    GridDensity fine = sampler_layout(kernel.noise_support, noise_cells * sub);
    const Vec& xi = U.last_noise();
    for (std::size_t i = 0; i < fine.cell_count(); ++i) {
        Vec z = fine.cell_center(i);
        double w = kernel.density(xi, z) * fine.cell_volume();
        if (w <= 0.0) continue;
        Vec x = step(sys, U.state_v, z);
        Vec point(product.dim());
        point.head(sys.dim_state) = x;
        point.tail(sys.dim_noise) = z;
        joint.value(joint.locate(point)) += w / joint.cell_volume();
    }
    if (joint.total_mass() < 1e-12)
        throw DegenerateDensity("extended_kernel: vanishing mass on the grid");
    joint.normalize();
    return joint;
}

ExtendedState initial_extended(const RdsSystem& sys, const NoiseModel& noise,
                               const Vec& u0, const GridDensity& eta0_law,
                               RngStream& rng) {
    ExtendedState U;
    U.state_v = u0;
    if (std::holds_alternative<MarkovKernel>(noise)) {
        U.noise = eta0_law.sample(rng);
        return U;
    }
    const StationaryNoiseModel& model = std::get<StationaryNoiseModel>(noise);
    PastBuffer b;
    b.iota = model.iota;
    for (int j = 0; j < model.memory_m; ++j) b.entries.push_back(eta0_law.sample(rng));
    for (int j = 0; j < model.burn_in; ++j) b = b.shifted(sample_conditional(model, b, rng));
    U.noise = b;
    return U;
}

std::vector<ExtendedState> simulate_extended(const RdsSystem& sys, const NoiseModel& noise,
                                             const ExtendedState& U0, int n,
                                             RngStream& rng) {
    std::vector<ExtendedState> traj;
    traj.reserve(static_cast<std::size_t>(n));
    ExtendedState U = U0;
    for (int k = 0; k < n; ++k) {
        Vec zeta;
        if (const MarkovKernel* kern = std::get_if<MarkovKernel>(&noise))
            zeta = sample(*kern, U.last_noise(), rng);
        else
            zeta = sample_conditional(std::get<StationaryNoiseModel>(noise),
                                      std::get<PastBuffer>(U.noise), rng);
        U = extended_map(sys, U, zeta);
        traj.push_back(U);
    }
    return traj;
}

namespace {

// Bulk sampler for the law-equality ensembles. Markov kernels and
// effective-memory-1 stationary models route through a quantized CDF cache;
// both compared ensembles share the quantization, so the law comparison is
// unaffected. General stationary models fall back to the exact conditional.
struct BulkNoiseSampler {
    const StationaryNoiseModel* stat = nullptr;
    MarkovKernel adapter;
    std::optional<CdfCache> cache;

    explicit BulkNoiseSampler(const NoiseModel& noise) {
        if (const MarkovKernel* kern = std::get_if<MarkovKernel>(&noise)) {
            adapter = *kern;
            cache.emplace(adapter, 512);
            return;
        }
        stat = &std::get<StationaryNoiseModel>(noise);
        if (stat->effective_memory == 1) {
            const StationaryNoiseModel& m = *stat;
            adapter.noise_support = m.noise_support;
            adapter.density = [&m](const Vec& y, const Vec& z) {
                PastBuffer b;
                b.iota = m.iota;
                b.entries.push_back(y);
                return m.conditional_density(b, z);
            };
            adapter.lipschitz_bound = m.lipschitz_bound;
            adapter.sampler_grid = m.sampler_grid;
            cache.emplace(adapter, 512);
        }
    }
    BulkNoiseSampler(const BulkNoiseSampler&) = delete;

    Vec draw_markov(const Vec& y, RngStream& rng) const {
        return cache->sample_quantized(y, rng);
    }
    Vec draw_stationary(const PastBuffer& b, RngStream& rng) const {
        if (cache) return cache->sample_quantized(b.last(), rng);
        return sample_conditional(*stat, b, rng);
    }
};

// Direct simulation of the original process: the noise chain is advanced on
// its own (full history for the stationary case) and fed to S.
std::vector<Vec> simulate_direct_states(const RdsSystem& sys, const BulkNoiseSampler& bulk,
                                        const GridDensity& eta0_law, const Vec& u0, int n,
                                        RngStream& rng) {
    std::vector<Vec> states;
    states.reserve(static_cast<std::size_t>(n) + 1);
    states.push_back(u0);
    Vec u = u0;
    if (!bulk.stat) {
        Vec eta = eta0_law.sample(rng);
        for (int k = 0; k < n; ++k) {
            eta = bulk.draw_markov(eta, rng);
            u = step(sys, u, eta);
            states.push_back(u);
        }
        return states;
    }
    const StationaryNoiseModel& model = *bulk.stat;
    std::deque<Vec> history;
    for (int j = 0; j < model.memory_m; ++j) history.push_back(eta0_law.sample(rng));
    auto view = [&] {
        PastBuffer b;
        b.iota = model.iota;
        b.entries.assign(history.end() - model.memory_m, history.end());
        return b;
    };
    for (int j = 0; j < model.burn_in; ++j) {
        history.push_back(bulk.draw_stationary(view(), rng));
        if (static_cast<int>(history.size()) > 4 * model.memory_m) history.pop_front();
    }
    for (int k = 0; k < n; ++k) {
        Vec eta = bulk.draw_stationary(view(), rng);
        history.push_back(eta);
        if (static_cast<int>(history.size()) > 4 * model.memory_m) history.pop_front();
        u = step(sys, u, eta);
        states.push_back(u);
    }
    return states;
}

std::vector<Vec> simulate_reduced_states(const RdsSystem& sys, const BulkNoiseSampler& bulk,
                                         const GridDensity& eta0_law, const Vec& u0, int n,
                                         RngStream& rng, bool mutate) {
    std::vector<Vec> states;
    states.reserve(static_cast<std::size_t>(n) + 1);
    states.push_back(u0);
    ExtendedState U;
    U.state_v = u0;
    if (!bulk.stat) {
        U.noise = eta0_law.sample(rng);
    } else {
        PastBuffer b;
        b.iota = bulk.stat->iota;
        for (int j = 0; j < bulk.stat->memory_m; ++j) b.entries.push_back(eta0_law.sample(rng));
        for (int j = 0; j < bulk.stat->burn_in; ++j)
            b = b.shifted(bulk.draw_stationary(b, rng));
        U.noise = b;
    }
    for (int k = 0; k < n; ++k) {
        Vec zeta;
        if (!bulk.stat)
            zeta = bulk.draw_markov(U.last_noise(), rng);
        else
            zeta = bulk.draw_stationary(std::get<PastBuffer>(U.noise), rng);
        U = mutate ? extended_map_mutated(sys, U, zeta) : extended_map(sys, U, zeta);
        states.push_back(U.state_v);
    }
    return states;
}

Vec stack_segment(const std::vector<Vec>& states, int upto) {
    int dim = static_cast<int>(states[0].size());
    Vec out(static_cast<int>((upto + 1)) * dim);
    for (int j = 0; j <= upto; ++j) out.segment(j * dim, dim) = states[static_cast<std::size_t>(j)];
    return out;
}

} // namespace

void write_law_equality_csv(std::ostream& os, const LawEqualityReport& report) {
    os << "k,tv,band_lo,band_hi,verdict\n";
    char buf[128];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%s\n", r.k, r.tv, r.band.lo,
                      r.band.hi, r.pass ? "pass" : "fail");
        os << buf;
    }
}

LawEqualityReport law_equality_test(const RdsSystem& sys, const NoiseModel& noise,
                                    const GridDensity& eta0_law, const Vec& u0,
                                    int horizon_k, int ensemble_n, int cells_per_axis,
                                    std::uint64_t seed, bool mutate_reduction) {
    if (horizon_k < 1 || horizon_k > 3)
        throw ConfigError("law_equality_test: horizon_k must be in 1..3");
    std::uint64_t s = seed;
    std::uint64_t direct_root = splitmix64(s);
    std::uint64_t reduced_root = splitmix64(s);

    std::size_t N = static_cast<std::size_t>(ensemble_n);
    BulkNoiseSampler bulk(noise);
    std::vector<std::vector<Vec>> direct(N), reduced(N);
    parallel_for(N, [&](std::size_t i) {
        RngStream rd = RngStream::substream(direct_root, i);
        direct[i] = simulate_direct_states(sys, bulk, eta0_law, u0, horizon_k, rd);
        RngStream rr = RngStream::substream(reduced_root, i);
        reduced[i] = simulate_reduced_states(sys, bulk, eta0_law, u0, horizon_k, rr,
                                             mutate_reduction);
    });

    LawEqualityReport report;
    report.pass = true;
    for (int k = 1; k <= horizon_k; ++k) {
        Box segment_box = Box::power(sys.invariant_set, k + 1);
        std::vector<int> cells = uniform_cells(segment_box.dim(), cells_per_axis);
        std::vector<Vec> pd(N), pr(N);
        for (std::size_t i = 0; i < N; ++i) {
            pd[i] = stack_segment(direct[i], k);
            pr[i] = stack_segment(reduced[i], k);
        }
        auto md = EmpiricalMeasure::equal_weights(std::move(pd), segment_box, direct_root);
        auto mr = EmpiricalMeasure::equal_weights(std::move(pr), segment_box, reduced_root);
        LawEqualityRow row;
        row.k = k;
        row.tv = tv_distance(md, mr, segment_box, cells);
        row.band = bootstrap_tv_band(md, mr, segment_box, cells, 200, 0.95,
                                     splitmix64(s));
        row.pass = row.tv <= row.band.hi;
        report.pass = report.pass && row.pass;
        report.rows.push_back(row);
    }
    return report;
}

GridDensity conditional_m_step(const StationaryNoiseModel& model, const PastBuffer& b,
                               int k, int cells_per_axis) {
    if (k < 1 || k > 3) throw ConfigError("conditional_m_step: k must be in 1..3");
    double cell_diam = std::sqrt(static_cast<double>(model.noise_support.dim())) *
                       (model.noise_support.hi()[0] - model.noise_support.lo()[0]) /
                       cells_per_axis;
    if (model.lipschitz_bound * cell_diam * k > 0.1)
        throw ResolutionTooCoarse("conditional_m_step: quadrature bound exceeds 0.1");

    GridDensity axis = sampler_layout(model.noise_support, cells_per_axis);
    Box joint_box = Box::power(model.noise_support, k);
    std::vector<int> cells;
    for (int j = 0; j < k; ++j)
        for (int d = 0; d < model.noise_support.dim(); ++d) cells.push_back(cells_per_axis);
    GridDensity joint(joint_box, cells);

    const int nd = model.noise_support.dim();
    std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
    std::function<void(int, const PastBuffer&, double, std::size_t)> dfs =
        [&](int level, const PastBuffer& past, double weight, std::size_t flat_base) {
            if (level == k) {
                joint.value(flat_base) = weight;
                return;
            }
            std::size_t stride = 1;
            for (int l = level + 1; l < k; ++l)
                for (int d = 0; d < nd; ++d) stride *= static_cast<std::size_t>(cells_per_axis);
            for (std::size_t c = 0; c < axis.cell_count(); ++c) {
                Vec y = axis.cell_center(c);
                double q = model.conditional_density(past, y);
                if (q <= 0.0 && level + 1 < k) continue;
                dfs(level + 1, past.shifted(y), weight * q, flat_base + c * stride);
            }
        };
    dfs(0, b, 1.0, 0);
    joint.normalize();
    return joint;
}

namespace {

MarkovKernel memory1_kernel(const StationaryNoiseModel& model) {
    MarkovKernel k;
    k.noise_support = model.noise_support;
    StationaryNoiseModel m = model;
    k.density = [m](const Vec& y, const Vec& z) {
        PastBuffer b;
        b.iota = m.iota;
        b.entries.assign(static_cast<std::size_t>(m.memory_m), y);
        return m.conditional_density(b, z);
    };
    k.lipschitz_bound = model.lipschitz_bound;
    k.sampler_grid = model.sampler_grid;
    return k;
}

std::vector<PastBuffer> harvest_buffers(const StationaryNoiseModel& model, int count,
                                        int spacing, std::uint64_t seed) {
    RngStream rng(seed);
    PastBuffer b;
    b.iota = model.iota;
    Vec c = model.noise_support.center();
    b.entries.assign(static_cast<std::size_t>(model.memory_m), c);
    for (int j = 0; j < model.burn_in; ++j)
        b = b.shifted(sample_conditional(model, b, rng));
    std::vector<PastBuffer> out;
    for (int i = 0; i < count; ++i) {
        for (int j = 0; j < spacing; ++j)
            b = b.shifted(sample_conditional(model, b, rng));
        out.push_back(b);
    }
    return out;
}

} // namespace

RecurrenceToZero check_recurrence_to_zero(const StationaryNoiseModel& model, int n,
                                          double delta, int budget_s, int probe_buffers,
                                          int cells_per_axis, std::uint64_t seed) {
    if (n < 1 || n > 2) throw ConfigError("check_recurrence_to_zero: n must be 1 or 2");
    if (delta <= 0.0) throw ConfigError("check_recurrence_to_zero: delta must be positive");
    if (model.effective_memory > 1)
        throw ConfigError("check_recurrence_to_zero: grid certificate implemented for "
                          "conditionals reading only the most recent entry");
    std::vector<PastBuffer> probes = harvest_buffers(model, probe_buffers, 25, seed);
    MarkovKernel kern = memory1_kernel(model);

    auto restrict_to_ball = [&](GridDensity& d) {
        double half_diam = 0.0;
        for (int a = 0; a < d.box().dim(); ++a)
            half_diam += 0.25 * d.cell_width(a) * d.cell_width(a);
        half_diam = std::sqrt(half_diam);
        for (std::size_t i = 0; i < d.cell_count(); ++i)
            if (d.cell_center(i).norm() + half_diam > delta) d.value(i) = 0.0;
    };

    for (int s = 1; s <= budget_s; ++s) {
        double slack = kernel_quadrature_bound(kern, cells_per_axis, s + n);
        if (slack > 0.1)
            throw ResolutionTooCoarse("check_recurrence_to_zero: quadrature bound " +
                                      std::to_string(slack) + " exceeds 0.1");
        double bound = std::numeric_limits<double>::infinity();
        for (const PastBuffer& b : probes) {
            GridDensity d = k_step_kernel(kern, b.last(), s, cells_per_axis);
            for (int j = 0; j < n; ++j) {
                d = propagate_density(kern, d);
                restrict_to_ball(d);
            }
            bound = std::min(bound, d.total_mass() - slack);
        }
        if (bound > 0.0) return {s, bound};
    }
    throw BudgetExceeded("check_recurrence_to_zero: no s <= " + std::to_string(budget_s) +
                         " gives a positive conservative bound");
}

double check_vec_surjectivity(const RdsSystem& sys, int m, int probes, std::uint64_t seed) {
    if (m < 1) throw ConfigError("check_vec_surjectivity: m must be >= 1");
    const int H = sys.dim_state, E = sys.dim_noise;
    double worst = std::numeric_limits<double>::infinity();
    for (int p = 0; p < probes; ++p) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(p));
        Vec x = sys.invariant_set.sample(rng);
        std::vector<Vec> etas;
        for (int j = 0; j < m; ++j) etas.push_back(sys.noise_support.sample(rng));

        // blocks[j][i] = d x_{j+1} / d eta_{i+1}
        std::vector<std::vector<Mat>> blocks(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            Mat A = sys.d_state(x, etas[static_cast<std::size_t>(j)]);
            Mat B = sys.d_noise(x, etas[static_cast<std::size_t>(j)]);
            blocks[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(j) + 1);
            for (int i = 0; i < j; ++i)
                blocks[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                    A * blocks[static_cast<std::size_t>(j) - 1][static_cast<std::size_t>(i)];
            blocks[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = B;
            x = sys.map(x, etas[static_cast<std::size_t>(j)]);
        }

        Mat M = Mat::Zero(m * H, m * E);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i <= j; ++i)
                M.block(j * H, i * E, H, E) =
                    blocks[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        Eigen::JacobiSVD<Mat> svd(M);
        worst = std::min(worst, svd.singularValues().minCoeff());
    }
    return worst;
}

} // namespace mixlab
