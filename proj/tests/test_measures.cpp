#include <doctest.h>

#include "mixlab/measures.hpp"

#include <cmath>
#include <sstream>

using namespace mixlab;

namespace {

GridDensity uniform_on(double lo, double hi, const Box& box, int cells) {
    GridDensity g(box, {cells});
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
        double x = g.cell_center(i)[0];
        g.value(i) = (x >= lo && x <= hi) ? 1.0 : 0.0;
    }
    g.normalize();
    return g;
}

// grid over [-0.005, 1.005] with 101 cells puts cell centers exactly at
// 0, 0.01, ..., 1
Box unit_lp_box() { return Box(vec1(-0.005), vec1(1.005)); }

GridDensity point_mass_at(double x, const Box& box, int cells) {
    GridDensity g(box, {cells});
    g.value(g.locate(vec1(x))) = 1.0;
    g.normalize();
    return g;
}

} // namespace

TEST_CASE("tv distance on identical uniform densities is zero") {
    Box box(vec1(0.0), vec1(1.0));
    GridDensity g = uniform_on(0.0, 1.0, box, 64);
    CHECK(tv_distance(g, g) == doctest::Approx(0.0));
}

TEST_CASE("tv distance on disjoint supports is one") {
    Box box(vec1(0.0), vec1(1.0));
    GridDensity a = uniform_on(0.0, 0.4, box, 100);
    GridDensity b = uniform_on(0.6, 1.0, box, 100);
    CHECK(tv_distance(a, b) == doctest::Approx(1.0));
}

TEST_CASE("tv distance of shifted uniforms is one half") {
    Box box(vec1(0.0), vec1(1.5));
    GridDensity a = uniform_on(0.0, 1.0, box, 300);
    GridDensity b = uniform_on(0.5, 1.5, box, 300);
    CHECK(tv_distance(a, b) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("tv distance rejects mismatched grids") {
    Box box(vec1(0.0), vec1(1.0));
    GridDensity a = uniform_on(0.0, 1.0, box, 64);
    GridDensity b = uniform_on(0.0, 1.0, box, 32);
    CHECK_THROWS_AS(tv_distance(a, b), MismatchedSupport);
}

TEST_CASE("dual-Lipschitz distance of a measure to itself is zero") {
    Box box(vec1(0.0), vec1(1.0));
    GridDensity g = uniform_on(0.2, 0.8, box, 101);
    CHECK(dual_lipschitz_distance(g, g) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dual-Lipschitz distance between point masses at 0 and 1 is 2/3") {
    // optimum of min over f with sup|f| + Lip(f) <= 1 of f(0) - f(1):
    // f = a on [0, t], affine down to -(1 - a - Lip t)... the 1-d LP value is
    // max over a of min(2a, 1 - a) = 2/3
    Box box = unit_lp_box();
    GridDensity a = point_mass_at(0.0, box, 101);
    GridDensity b = point_mass_at(1.0, box, 101);
    CHECK(dual_lipschitz_distance(a, b) == doctest::Approx(2.0 / 3.0).epsilon(1.5e-3));
}

TEST_CASE("dual-Lipschitz distance between nearby point masses") {
    Box box = unit_lp_box();
    GridDensity a = point_mass_at(0.0, box, 101);
    GridDensity b = point_mass_at(0.1, box, 101);
    CHECK(dual_lipschitz_distance(a, b) == doctest::Approx(0.2 / 2.1).epsilon(1.5e-2));
}

TEST_CASE("histogram of a single point concentrates in one cell") {
    Box box(vec1(0.0), vec1(1.0));
    auto m = EmpiricalMeasure::equal_weights({vec1(0.5)}, box, 1);
    GridDensity g = histogram(m, box, {10});
    int occupied = 0;
    for (std::size_t i = 0; i < g.cell_count(); ++i)
        if (g.value(i) > 0.0) {
            ++occupied;
            CHECK(g.value(i) == doctest::Approx(10.0));  // 1 / cellVolume
        }
    CHECK(occupied == 1);
}

TEST_CASE("histogram of uniform samples is flat within binomial error") {
    Box box(vec1(0.0), vec1(1.0));
    const std::size_t n = 1000000;
    RngStream rng(2024);
    std::vector<Vec> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(vec1(rng.uniform01()));
    GridDensity g = histogram(EmpiricalMeasure::equal_weights(std::move(pts), box, 2024),
                              box, {100});
    double p = 0.01;
    double stderr3 = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    for (std::size_t i = 0; i < g.cell_count(); ++i)
        CHECK(std::abs(g.prob(i) - p) < stderr3 * 1.5);
}

TEST_CASE("histogram of two equal-weight points splits mass evenly") {
    Box box(vec1(0.0), vec1(1.0));
    auto m = EmpiricalMeasure::equal_weights({vec1(0.1), vec1(0.9)}, box, 3);
    GridDensity g = histogram(m, box, {10});
    CHECK(g.prob(g.locate(vec1(0.1))) == doctest::Approx(0.5));
    CHECK(g.prob(g.locate(vec1(0.9))) == doctest::Approx(0.5));
}

TEST_CASE("histogram rejects samples outside the box") {
    Box box(vec1(0.0), vec1(1.0));
    auto m = EmpiricalMeasure::equal_weights({vec1(0.5), vec1(2.0)}, box, 4);
    CHECK_THROWS_AS(histogram(m, Box(vec1(0.0), vec1(1.0)), {10}), SampleOutOfBox);
}

TEST_CASE("metric axioms hold on random triples") {
    Box box(vec1(0.0), vec1(1.0));
    RngStream rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        GridDensity g[3] = {GridDensity(box, {21}), GridDensity(box, {21}),
                            GridDensity(box, {21})};
        for (auto& d : g) {
            for (std::size_t i = 0; i < d.cell_count(); ++i) d.value(i) = rng.uniform01();
            d.normalize();
        }
        double ab = tv_distance(g[0], g[1]);
        double ba = tv_distance(g[1], g[0]);
        double ac = tv_distance(g[0], g[2]);
        double cb = tv_distance(g[2], g[1]);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab <= ac + cb + 1e-12);
        CHECK(tv_distance(g[0], g[0]) == doctest::Approx(0.0));

        double dab = dual_lipschitz_distance(g[0], g[1]);
        double dba = dual_lipschitz_distance(g[1], g[0]);
        double dac = dual_lipschitz_distance(g[0], g[2]);
        double dcb = dual_lipschitz_distance(g[2], g[1]);
        auto bound = dual_lipschitz_distance_detailed(g[0], g[1]).discretization_bound;
        CHECK(std::abs(dab - dba) <= 2.0 * bound + 1e-9);
        CHECK(dab <= dac + dcb + 2.0 * bound + 1e-9);
        // the dual-Lipschitz value never exceeds twice the TV
        CHECK(dab <= 2.0 * ab + 1e-9);
    }
}

TEST_CASE("empirical tv to the generating density shrinks like sqrt(cells/N)") {
    Box box(vec1(0.0), vec1(1.0));
    GridDensity ref = uniform_on(0.0, 1.0, box, 32);
    double prev = 2.0;
    for (std::size_t n : {2000u, 32000u, 512000u}) {
        RngStream rng(7);
        std::vector<Vec> pts;
        pts.reserve(n);
        for (std::size_t i = 0; i < n; ++i) pts.push_back(vec1(rng.uniform01()));
        GridDensity h = histogram(EmpiricalMeasure::equal_weights(std::move(pts), box, 7),
                                  box, {32});
        double tv = tv_distance(h, ref);
        CHECK(tv < prev);  // 16x more samples should cut TV roughly 4x
        CHECK(tv < 3.0 * std::sqrt(32.0 / static_cast<double>(n)));
        prev = tv;
    }
}

TEST_CASE("grid density binary serialization round-trips") {
    Box box(vec2(-1.0, 0.0), vec2(1.0, 2.0));
    GridDensity g(box, {8, 6});
    RngStream rng(5);
    for (std::size_t i = 0; i < g.cell_count(); ++i) g.value(i) = rng.uniform01();
    g.normalize();
    std::stringstream ss;
    g.write_binary(ss);
    GridDensity back = GridDensity::read_binary(ss);
    REQUIRE(back.same_support(g));
    for (std::size_t i = 0; i < g.cell_count(); ++i)
        CHECK(back.value(i) == doctest::Approx(g.value(i)).epsilon(1e-15));
}

TEST_CASE("bootstrap band brackets the null tv between equal laws") {
    Box box(vec1(0.0), vec1(1.0));
    RngStream ra(11), rb(12);
    std::vector<Vec> pa, pb;
    for (int i = 0; i < 20000; ++i) {
        pa.push_back(vec1(ra.uniform01()));
        pb.push_back(vec1(rb.uniform01()));
    }
    auto a = EmpiricalMeasure::equal_weights(std::move(pa), box, 11);
    auto b = EmpiricalMeasure::equal_weights(std::move(pb), box, 12);
    double tv = tv_distance(a, b, box, {32});
    BootstrapBand band = bootstrap_tv_band(a, b, box, {32});
    CHECK(band.lo < band.hi);
    CHECK(tv <= band.hi * 1.5);  // same law: observed tv sits near the band
}

TEST_CASE("sampled lower bound stays below the exact dual-Lipschitz value") {
    Box box(vec1(0.0), vec1(1.0));
    RngStream rng(21);
    std::vector<Vec> pa, pb;
    for (int i = 0; i < 500; ++i) {
        pa.push_back(vec1(0.25 + 0.1 * rng.uniform01()));
        pb.push_back(vec1(0.65 + 0.1 * rng.uniform01()));
    }
    auto a = EmpiricalMeasure::equal_weights(std::move(pa), box, 21);
    auto b = EmpiricalMeasure::equal_weights(std::move(pb), box, 22);
    double exact = dual_lipschitz_distance(a, b, box, {101});
    double sampled = dual_lipschitz_sampled_lower_bound(a, b, 200, 33);
    CHECK(sampled > 0.0);
    CHECK(sampled <= exact + 1e-6);
}
