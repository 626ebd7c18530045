#include <doctest.h>

#include "mixlab/pushforward.hpp"

#include <cmath>

using namespace mixlab;

namespace {

RegularMap identity_map_1d() {
    return {1, 1, [](const Vec&, const Vec& y) { return y; },
            [](const Vec&, const Vec&) { return Mat::Identity(1, 1); }, 0.0};
}

RegularMap scale_map_1d(double factor) {
    return {1, 1, [factor](const Vec&, const Vec& y) { return Vec(factor * y); },
            [factor](const Vec&, const Vec&) { return Mat(factor * Mat::Identity(1, 1)); },
            0.0};
}

RegularMap sum_map_2to1() {
    return {2, 1, [](const Vec&, const Vec& y) { return vec1(y[0] + y[1]); },
            [](const Vec&, const Vec&) {
                Mat J(1, 2);
                J << 1.0, 1.0;
                return J;
            },
            0.0};
}

ParamDensityKernel unit_uniform_1d() {
    return {[](const Vec&, const Vec& y) { return (y[0] >= 0.0 && y[0] <= 1.0) ? 1.0 : 0.0; },
            Box(vec1(0.0), vec1(1.0)), 0.0};
}

ParamDensityKernel unit_uniform_2d() {
    return {[](const Vec&, const Vec& y) {
                return (y[0] >= 0.0 && y[0] <= 1.0 && y[1] >= 0.0 && y[1] <= 1.0) ? 1.0 : 0.0;
            },
            Box(vec2(0.0, 0.0), vec2(1.0, 1.0)), 0.0};
}

// shifted uniform lambda(U, .) = uniform on [U0, U0 + 1/2]
ParamDensityKernel shifted_uniform_1d() {
    return {[](const Vec& U, const Vec& y) {
                return (y[0] >= U[0] && y[0] <= U[0] + 0.5) ? 2.0 : 0.0;
            },
            Box(vec1(-0.5), vec1(1.5)), 2.0};
}

} // namespace

TEST_CASE("identity pushforward reproduces the uniform density") {
    PushforwardResult res = pushforward_density_detailed(
        identity_map_1d(), unit_uniform_1d(), Vec::Zero(0), Box(vec1(0.0), vec1(1.0)), {200});
    GridDensity ref(Box(vec1(0.0), vec1(1.0)), {200});
    for (std::size_t i = 0; i < ref.cell_count(); ++i) ref.value(i) = 1.0;
    CHECK(tv_distance(res.density, ref) < 1e-3);
    CHECK(res.mass_defect < 1e-3);
    CHECK(res.newton_skips == 0);
}

TEST_CASE("doubling map halves the density") {
    PushforwardResult res = pushforward_density_detailed(
        scale_map_1d(2.0), unit_uniform_1d(), Vec::Zero(0), Box(vec1(0.0), vec1(2.0)), {200});
    for (std::size_t i = 0; i < res.density.cell_count(); ++i)
        CHECK(res.density.value(i) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.mass_defect < 1e-3);
}

TEST_CASE("sum of two uniforms is the triangle density") {
    PushforwardResult res = pushforward_density_detailed(
        sum_map_2to1(), unit_uniform_2d(), Vec::Zero(0), Box(vec1(0.0), vec1(2.0)), {200});
    GridDensity ref(Box(vec1(0.0), vec1(2.0)), {200});
    for (std::size_t i = 0; i < ref.cell_count(); ++i) {
        double x = ref.cell_center(i)[0];
        ref.value(i) = x <= 1.0 ? x : 2.0 - x;
    }
    CHECK(tv_distance(res.density, ref) < 2e-2);
    CHECK(res.mass_defect < 1e-3);
    // peak value g(1) = 1 away from the kink
    CHECK(res.density.value(res.density.locate(vec1(0.995))) ==
          doctest::Approx(1.0).epsilon(2e-2));
}

TEST_CASE("sum pushforward agrees with a Monte Carlo histogram") {
    PushforwardResult res = pushforward_density_detailed(
        sum_map_2to1(), unit_uniform_2d(), Vec::Zero(0), Box(vec1(0.0), vec1(2.0)), {64});
    RngStream rng(2222);
    const int n = 400000;
    std::vector<Vec> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) pts.push_back(vec1(rng.uniform01() + rng.uniform01()));
    GridDensity hist =
        histogram(EmpiricalMeasure::equal_weights(std::move(pts), Box(vec1(0.0), vec1(2.0)),
                                                  2222),
                  Box(vec1(0.0), vec1(2.0)), {64});
    CHECK(tv_distance(res.density, hist) < 0.02);
}

TEST_CASE("image map of a point mass is a single pushforward") {
    RegularMap F = identity_map_1d();
    ParamDensityKernel lam = shifted_uniform_1d();
    Box out(vec1(-0.5), vec1(1.5));
    auto nu = EmpiricalMeasure::equal_weights({vec1(0.25)}, Box(vec1(0.0), vec1(1.0)), 9);
    GridDensity img = image_map_apply(F, lam, nu, out, {100});
    GridDensity direct = pushforward_density(F, lam, vec1(0.25), out, {100});
    CHECK(tv_distance(img, direct) < 1e-12);
}

TEST_CASE("image map of two equal atoms is the average of the pushforwards") {
    RegularMap F = identity_map_1d();
    ParamDensityKernel lam = shifted_uniform_1d();
    Box out(vec1(-0.5), vec1(1.5));
    auto nu = EmpiricalMeasure::equal_weights({vec1(0.0), vec1(0.5)}, Box(vec1(0.0), vec1(1.0)),
                                              10);
    GridDensity img = image_map_apply(F, lam, nu, out, {100});
    GridDensity a = pushforward_density(F, lam, vec1(0.0), out, {100});
    GridDensity b = pushforward_density(F, lam, vec1(0.5), out, {100});
    for (std::size_t i = 0; i < img.cell_count(); ++i)
        CHECK(img.value(i) == doctest::Approx(0.5 * (a.value(i) + b.value(i))).epsilon(1e-9));
}

TEST_CASE("image map of many atoms agrees with a Monte Carlo double sample") {
    RegularMap F = identity_map_1d();
    ParamDensityKernel lam = shifted_uniform_1d();
    Box out(vec1(-0.5), vec1(1.5));
    Box param(vec1(0.0), vec1(1.0));
    RngStream rng(808);
    std::vector<Vec> atoms;
    for (int i = 0; i < 100; ++i) atoms.push_back(param.sample(rng));
    auto nu = EmpiricalMeasure::equal_weights(atoms, param, 808);
    GridDensity img = image_map_apply(F, lam, nu, out, {50});

    // MC: pick an atom, then y ~ uniform on [U, U + 1/2]
    std::vector<Vec> pts;
    const int n = 400000;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const Vec& U = atoms[rng.uniform_index(atoms.size())];
        pts.push_back(vec1(U[0] + 0.5 * rng.uniform01()));
    }
    GridDensity hist = histogram(EmpiricalMeasure::equal_weights(std::move(pts), out, 809),
                                 out, {50});
    CHECK(tv_distance(img, hist) < 0.02);
}

TEST_CASE("parameter-independent kernels give a vanishing image Lipschitz ratio") {
    RegularMap F = identity_map_1d();
    ParamDensityKernel lam = unit_uniform_1d();  // ignores U entirely
    ImageLipschitzEstimate est = estimate_image_lipschitz(
        F, lam, Box(vec1(0.0), vec1(1.0)), Box(vec1(0.0), vec1(1.0)), {50}, 40, 17);
    CHECK(est.ratio_max == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("image Lipschitz estimate is finite and stable across seeds") {
    RegularMap F = identity_map_1d();
    ParamDensityKernel lam = shifted_uniform_1d();
    Box param(vec1(0.0), vec1(1.0));
    Box out(vec1(-0.5), vec1(1.5));
    ImageLipschitzEstimate a = estimate_image_lipschitz(F, lam, param, out, {50}, 60, 1);
    ImageLipschitzEstimate b = estimate_image_lipschitz(F, lam, param, out, {50}, 60, 2);
    CHECK(a.ratio_max > 0.0);
    CHECK(std::isfinite(a.ratio_max));
    CHECK(a.pair_index >= 0);
    CHECK(std::abs(a.ratio_max - b.ratio_max) < 0.2 * std::max(a.ratio_max, b.ratio_max));
}

TEST_CASE("tv of image measures is controlled by the dual-Lipschitz input distance") {
    RegularMap F = identity_map_1d();
    ParamDensityKernel lam = shifted_uniform_1d();
    Box param(vec1(0.0), vec1(1.0));
    Box out(vec1(-0.5), vec1(1.5));
    ImageLipschitzEstimate est =
        estimate_image_lipschitz(F, lam, param, out, {50}, 100, 23);
    RngStream rng(55);
    for (int t = 0; t < 20; ++t) {
        std::vector<Vec> pa, pb;
        for (int i = 0; i < 16; ++i) {
            pa.push_back(param.sample(rng));
            pb.push_back(param.sample(rng));
        }
        auto na = EmpiricalMeasure::equal_weights(pa, param, 100 + static_cast<std::uint64_t>(t));
        auto nb = EmpiricalMeasure::equal_weights(pb, param, 200 + static_cast<std::uint64_t>(t));
        double dl = dual_lipschitz_distance(na, nb, param, {101});
        if (dl < 1e-9) continue;
        double tv = tv_distance(image_map_apply(F, lam, na, out, {50}),
                                image_map_apply(F, lam, nb, out, {50}));
        CHECK(tv <= 1.3 * est.ratio_max * dl + 1e-9);
    }
}

TEST_CASE("lipschitz ratio is stable under grid doubling") {
    RegularMap F = identity_map_1d();
    ParamDensityKernel lam = shifted_uniform_1d();
    Box param(vec1(0.0), vec1(1.0));
    Box out(vec1(-0.5), vec1(1.5));
    ImageLipschitzEstimate coarse =
        estimate_image_lipschitz(F, lam, param, out, {50}, 40, 5);
    ImageLipschitzEstimate fine =
        estimate_image_lipschitz(F, lam, param, out, {100}, 40, 5);
    CHECK(std::abs(coarse.ratio_max - fine.ratio_max) <
          0.1 * std::max(coarse.ratio_max, fine.ratio_max) + 1e-9);
}

TEST_CASE("bump cutoff is a C2 blend between one and zero") {
    CHECK(bump_cutoff(0.0) == doctest::Approx(1.0));
    CHECK(bump_cutoff(0.5) == doctest::Approx(1.0));
    CHECK(bump_cutoff(1.0) == doctest::Approx(0.0));
    CHECK(bump_cutoff(2.0) == doctest::Approx(0.0));
    double prev = 1.0;
    for (int i = 1; i <= 100; ++i) {
        double t = 0.5 + 0.5 * i / 100.0;
        double v = bump_cutoff(t);
        CHECK(v <= prev + 1e-12);  // monotone down
        prev = v;
    }
    // continuity at the joints
    CHECK(std::abs(bump_cutoff(0.5 + 1e-8) - 1.0) < 1e-6);
    CHECK(std::abs(bump_cutoff(1.0 - 1e-8)) < 1e-6);
}

TEST_CASE("affine maps extend to themselves") {
    Mat A(1, 1);
    A << 1.7;
    auto local = [&A](const Vec& z) { return Vec(A * z + vec1(0.3)); };
    GlobalDiffeo g = extend_local_diffeo(local, vec1(0.2), A, 0.5);
    RngStream rng(42);
    for (int i = 0; i < 2000; ++i) {
        Vec z = vec1(rng.uniform(-3.0, 3.0));
        CHECK(g(z)[0] == doctest::Approx(local(z)[0]).epsilon(1e-9));
    }
}

TEST_CASE("perturbed identity extends to an injective global map") {
    auto local = [](const Vec& z) { return vec1(z[0] + 0.01 * std::sin(z[0])); };
    Mat A(1, 1);
    A << 1.01;
    GlobalDiffeo g = extend_local_diffeo(local, vec1(0.0), A, 0.5);
    // agrees with the local map well inside the cutoff
    RngStream rng(43);
    for (int i = 0; i < 1000; ++i) {
        double z = rng.uniform(-0.2, 0.2);
        if (std::abs(z) < 0.5 * g.cutoff_radius())
            CHECK(g(vec1(z))[0] == doctest::Approx(local(vec1(z))[0]).epsilon(1e-12));
    }
    // injectivity probes over a wide range
    double prev = g(vec1(-4.0))[0];
    for (int i = 1; i <= 100000; ++i) {
        double z = -4.0 + 8.0 * i / 100000.0;
        double v = g(vec1(z))[0];
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("a singular derivative at the base point is rejected") {
    auto local = [](const Vec& z) { return vec1(z[0] * z[0]); };
    Mat A(1, 1);
    A << 0.0;
    CHECK_THROWS_AS(extend_local_diffeo(local, vec1(0.0), A, 0.5), NotLocallyInjective);
}

TEST_CASE("global diffeo is continuous across the blend region") {
    auto local = [](const Vec& z) { return vec1(z[0] + 0.05 * z[0] * z[0]); };
    Mat A(1, 1);
    A << 1.0;
    GlobalDiffeo g = extend_local_diffeo(local, vec1(0.0), A, 0.4);
    double eps = g.cutoff_radius();
    for (int i = 0; i < 400; ++i) {
        double z = -2.0 * eps + 4.0 * eps * i / 400.0;
        double v0 = g(vec1(z))[0];
        double v1 = g(vec1(z + 1e-5))[0];
        CHECK(std::abs(v1 - v0) < 1e-3);
    }
}
