#include "mixlab/measures.hpp"

#include <algorithm>
#include <cmath>

namespace mixlab {

EmpiricalMeasure EmpiricalMeasure::equal_weights(std::vector<Vec> pts, Box box,
                                                 std::uint64_t seed) {
    EmpiricalMeasure m;
    m.bounding_box = std::move(box);
    m.weights.assign(pts.size(), pts.empty() ? 0.0 : 1.0 / static_cast<double>(pts.size()));
    m.points = std::move(pts);
    m.seed = seed;
    return m;
}

void EmpiricalMeasure::validate() const {
    if (points.empty()) throw EmptyMeasure("EmpiricalMeasure: no points");
    if (points.size() != weights.size())
        throw ConfigError("EmpiricalMeasure: points/weights size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (weights[i] < 0.0) throw ConfigError("EmpiricalMeasure: negative weight");
        if (!bounding_box.contains(points[i], 1e-9))
            throw SampleOutOfBox("EmpiricalMeasure: point " + std::to_string(i) +
                                 " outside bounding box");
        s += weights[i];
    }
    if (std::abs(s - 1.0) > 1e-12)
        throw ConfigError("EmpiricalMeasure: weights sum to " + std::to_string(s));
}

double tv_distance(const GridDensity& a, const GridDensity& b) {
    if (!a.same_support(b))
        throw MismatchedSupport("tv_distance: grids differ in box or resolution");
    double ma = a.total_mass(), mb = b.total_mass();
    if (ma < 1e-300 || mb < 1e-300) throw EmptyMeasure("tv_distance: zero-mass measure");
    double s = 0.0;
    for (std::size_t i = 0; i < a.cell_count(); ++i)
        s += std::abs(a.prob(i) / ma - b.prob(i) / mb);
    return 0.5 * s;
}

GridDensity histogram(const EmpiricalMeasure& samples, const Box& box,
                      const std::vector<int>& cells) {
    if (samples.points.empty()) throw EmptyMeasure("histogram: no samples");
    GridDensity g(box, cells);
    for (std::size_t i = 0; i < samples.points.size(); ++i) {
        std::size_t flat;
        if (!g.try_locate(samples.points[i], flat))
            throw SampleOutOfBox("histogram: sample " + std::to_string(i) + " outside box");
        g.value(flat) += samples.weights[i];
    }
    for (std::size_t f = 0; f < g.cell_count(); ++f) g.value(f) /= g.cell_volume();
    g.normalize();
    return g;
}

double tv_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                   const Box& box, const std::vector<int>& cells) {
    return tv_distance(histogram(a, box, cells), histogram(b, box, cells));
}

namespace {

std::vector<double> band_quantiles(std::vector<double>& draws, double level) {
    std::sort(draws.begin(), draws.end());
    double alpha = (1.0 - level) / 2.0;
    auto at = [&](double q) {
        double pos = q * (static_cast<double>(draws.size()) - 1.0);
        std::size_t i = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(i);
        if (i + 1 >= draws.size()) return draws.back();
        return draws[i] * (1.0 - frac) + draws[i + 1] * frac;
    };
    return {at(alpha), at(1.0 - alpha)};
}

} // namespace

BootstrapBand bootstrap_tv_band(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                const Box& box, const std::vector<int>& cells,
                                int resamples, double level, std::uint64_t seed) {
    // Pooled-null band: both resamples drawn from the combined cloud, so the
    // band describes the TV noise level when the two laws are equal. Each
    // point's cell is located once; resampling shuffles the cached indices.
    constexpr std::size_t kOutside = static_cast<std::size_t>(-1);
    GridDensity proto(box, cells);
    std::vector<std::size_t> pool;
    pool.reserve(a.points.size() + b.points.size());
    for (const auto& p : a.points) {
        std::size_t flat;
        pool.push_back(proto.try_locate(p, flat) ? flat : kOutside);
    }
    for (const auto& p : b.points) {
        std::size_t flat;
        pool.push_back(proto.try_locate(p, flat) ? flat : kOutside);
    }

    std::size_t na = a.points.size(), nb = b.points.size();
    std::vector<double> draws(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(r));
        GridDensity ga(box, cells), gb(box, cells);
        for (std::size_t i = 0; i < na; ++i) {
            std::size_t flat = pool[rng.uniform_index(pool.size())];
            if (flat != kOutside) ga.value(flat) += 1.0;
        }
        for (std::size_t i = 0; i < nb; ++i) {
            std::size_t flat = pool[rng.uniform_index(pool.size())];
            if (flat != kOutside) gb.value(flat) += 1.0;
        }
        ga.normalize();
        gb.normalize();
        draws[static_cast<std::size_t>(r)] = tv_distance(ga, gb);
    }
    auto q = band_quantiles(draws, level);
    return {q[0], q[1], resamples};
}

BootstrapBand bootstrap_tv_band_vs_ref(const EmpiricalMeasure& a, const GridDensity& ref,
                                       int resamples, double level, std::uint64_t seed) {
    // Null: samples of the same size drawn from ref, compared against ref.
    // Cells are drawn directly from the cell CDF; positions within a cell
    // never change the histogram, so they are skipped.
    double mass = ref.total_mass();
    if (mass < 1e-300) throw EmptyMeasure("bootstrap_tv_band_vs_ref: zero-mass reference");
    std::vector<double> cdf(ref.cell_count());
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.cell_count(); ++i) {
        acc += ref.prob(i) / mass;
        cdf[i] = acc;
    }
    std::size_t n = a.points.size();
    std::vector<double> draws(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        RngStream rng = RngStream::substream(seed ^ 0xabcdefULL, static_cast<std::uint64_t>(r));
        GridDensity g(ref.box(), ref.cells_per_axis());
        for (std::size_t i = 0; i < n; ++i) {
            double u = rng.uniform01();
            std::size_t flat = static_cast<std::size_t>(
                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            if (flat >= cdf.size()) flat = cdf.size() - 1;
            g.value(flat) += 1.0;
        }
        g.normalize();
        draws[static_cast<std::size_t>(r)] = tv_distance(g, ref);
    }
    auto q = band_quantiles(draws, level);
    return {q[0], q[1], resamples};
}

} // namespace mixlab
