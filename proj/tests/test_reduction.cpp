#include <doctest.h>

#include "mixlab/reduction.hpp"

#include <cmath>
#include <sstream>

using namespace mixlab;

namespace {

PastBuffer buffer_of(std::initializer_list<double> xs, double iota = 2.0) {
    PastBuffer b;
    b.iota = iota;
    for (double x : xs) b.entries.push_back(vec1(x));
    return b;
}

GridDensity invariant_of(const MarkovKernel& k, int cells = 64) {
    return kernel_invariant_density(k, cells);
}

} // namespace

TEST_CASE("extended map of pure noise copies the draw into both slots") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    ExtendedState U{vec1(0.4), vec1(-0.1)};
    ExtendedState next = extended_map(sys, U, vec1(0.7));
    CHECK(next.state_v[0] == doctest::Approx(0.7));
    CHECK(next.last_noise()[0] == doctest::Approx(0.7));
}

TEST_CASE("extended map of the kicked system applies flow plus kick") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    ExtendedState U{vec1(1.0), vec1(0.5)};
    ExtendedState next = extended_map(sys, U, vec1(0.2));
    CHECK(next.state_v[0] == doctest::Approx(std::exp(-1.0) + 0.2).epsilon(1e-6));
    CHECK(next.last_noise()[0] == doctest::Approx(0.2));
}

TEST_CASE("extended map shifts the stationary past buffer") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    ExtendedState U{vec1(0.0), buffer_of({0.1, 0.2, 0.3})};
    ExtendedState next = extended_map(sys, U, vec1(0.9));
    const auto& b = std::get<PastBuffer>(next.noise);
    REQUIRE(b.memory() == 3);
    CHECK(b.entries[0][0] == doctest::Approx(0.2));
    CHECK(b.entries[1][0] == doctest::Approx(0.3));
    CHECK(b.entries[2][0] == doctest::Approx(0.9));
    CHECK(next.state_v[0] == doctest::Approx(0.9));
}

TEST_CASE("mutated extended map leaves the noise slot stale") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    ExtendedState U{vec1(1.0), vec1(0.5)};
    ExtendedState next = extended_map_mutated(sys, U, vec1(0.2));
    CHECK(next.state_v[0] == doctest::Approx(std::exp(-1.0) + 0.2).epsilon(1e-6));
    CHECK(next.last_noise()[0] == doctest::Approx(0.5));
}

TEST_CASE("past metric on equal buffers is zero") {
    PastBuffer a = buffer_of({0.1, -0.4, 0.9});
    CHECK(past_metric(a, a) == doctest::Approx(0.0));
}

TEST_CASE("past metric weights lags geometrically") {
    PastBuffer a = buffer_of({0.0, 0.0, 0.0});
    PastBuffer recent = buffer_of({0.0, 0.0, 0.5});
    PastBuffer lag1 = buffer_of({0.0, 0.5, 0.0});
    PastBuffer lag2 = buffer_of({0.5, 0.0, 0.0});
    CHECK(past_metric(a, recent) == doctest::Approx(0.5));        // iota^0
    CHECK(past_metric(a, lag1) == doctest::Approx(0.25));         // iota^-1
    CHECK(past_metric(a, lag2) == doctest::Approx(0.125));        // iota^-2
}

TEST_CASE("past metric satisfies the metric axioms on random buffers") {
    RngStream rng(404);
    for (int trial = 0; trial < 500; ++trial) {
        PastBuffer b[3];
        for (auto& p : b) {
            p.iota = 2.0;
            for (int j = 0; j < 5; ++j) p.entries.push_back(vec1(rng.uniform(-1.0, 1.0)));
        }
        double ab = past_metric(b[0], b[1]);
        CHECK(ab == doctest::Approx(past_metric(b[1], b[0])));
        CHECK(ab <= past_metric(b[0], b[2]) + past_metric(b[2], b[1]) + 1e-12);
        if (ab == 0.0)
            for (int j = 0; j < 5; ++j)
                CHECK(b[0].entries[static_cast<std::size_t>(j)][0] ==
                      b[1].entries[static_cast<std::size_t>(j)][0]);
    }
}

TEST_CASE("past metric of bounded buffers obeys the geometric tail bound") {
    // entries in [-1, 1]: d <= sum_j iota^-j * 2 <= 2 iota / (iota - 1)
    RngStream rng(405);
    for (int trial = 0; trial < 200; ++trial) {
        PastBuffer a, b;
        a.iota = b.iota = 2.0;
        for (int j = 0; j < 8; ++j) {
            a.entries.push_back(vec1(rng.uniform(-1.0, 1.0)));
            b.entries.push_back(vec1(rng.uniform(-1.0, 1.0)));
        }
        CHECK(past_metric(a, b) <= 4.0 + 1e-12);
    }
}

TEST_CASE("buffer serialization round-trips") {
    PastBuffer b = buffer_of({0.125, -0.75, 0.333333333333333315, 0.9}, 1.5);
    std::stringstream ss;
    write_buffer(ss, b);
    PastBuffer back = read_buffer(ss);
    REQUIRE(back.memory() == b.memory());
    CHECK(back.iota == doctest::Approx(b.iota));
    for (int j = 0; j < b.memory(); ++j)
        CHECK(back.entries[static_cast<std::size_t>(j)][0] ==
              b.entries[static_cast<std::size_t>(j)][0]);
}

TEST_CASE("extended kernel noise marginal matches the one-step kernel grid") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.5}, {"s", 0.3}});
    ExtendedState U{vec1(0.5), vec1(0.3)};
    GridDensity joint = extended_kernel(sys, k, U, 32, 128);
    GridDensity one = k_step_kernel(k, vec1(0.3), 1, 128);
    // marginalize the state axis
    for (int j = 0; j < 128; ++j) {
        double mass = 0.0;
        for (int i = 0; i < 32; ++i) {
            Vec c(2);
            c[0] = joint.box().lo()[0] +
                   (i + 0.5) * (joint.box().hi()[0] - joint.box().lo()[0]) / 32.0;
            c[1] = one.cell_center(static_cast<std::size_t>(j))[0];
            mass += joint.prob(joint.locate(c));
        }
        CHECK(mass == doctest::Approx(one.prob(static_cast<std::size_t>(j))).epsilon(1e-9));
    }
}

TEST_CASE("extended kernel state marginal of pure noise is the kernel law") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.5}, {"s", 0.3}});
    ExtendedState U{vec1(0.2), vec1(-0.4)};
    GridDensity joint = extended_kernel(sys, k, U, 128, 128, 4);
    GridDensity one = k_step_kernel(k, vec1(-0.4), 1, 128);
    for (int i = 0; i < 128; ++i) {
        double mass = 0.0;
        for (int j = 0; j < 128; ++j) {
            Vec c(2);
            c[0] = one.cell_center(static_cast<std::size_t>(i))[0];
            c[1] = one.cell_center(static_cast<std::size_t>(j))[0];
            mass += joint.prob(joint.locate(c));
        }
        CHECK(mass == doctest::Approx(one.prob(static_cast<std::size_t>(i))).epsilon(5e-2));
    }
}

TEST_CASE("simulate_extended with n = 0 is empty") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    MarkovKernel k = kernel_catalog("iid_uniform");
    RngStream rng(1);
    ExtendedState U0 = initial_extended(sys, k, vec1(0.0), invariant_of(k), rng);
    CHECK(simulate_extended(sys, k, U0, 0, rng).empty());
}

TEST_CASE("iid extended simulation produces uniform states") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    MarkovKernel k = kernel_catalog("iid_uniform");
    RngStream rng(77);
    ExtendedState U0 = initial_extended(sys, k, vec1(0.0), invariant_of(k), rng);
    auto traj = simulate_extended(sys, k, U0, 20000, rng);
    std::vector<double> xs;
    for (const auto& U : traj) xs.push_back(U.state_v[0]);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double cdf = 0.5 * (xs[i] + 1.0);
        ks = std::max(ks, std::abs(cdf - (static_cast<double>(i) + 1.0) / xs.size()));
        ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / xs.size()));
    }
    CHECK(ks < 1.95 / std::sqrt(static_cast<double>(xs.size())));
}

TEST_CASE("memory-1 stationary wrapper reproduces the Markov path law") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d", {{"rk4_steps", 8.0}});
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.5}, {"s", 0.3}});
    StationaryNoiseModel model = stationary_from_kernel(k, 4);

    ExtendedState Um{vec1(0.0), vec1(0.25)};
    ExtendedState Us{vec1(0.0), buffer_of({0.0, 0.0, 0.0, 0.25})};
    RngStream r1(321), r2(321);
    auto tm = simulate_extended(sys, k, Um, 200, r1);
    auto ts = simulate_extended(sys, NoiseModel(model), Us, 200, r2);
    REQUIRE(tm.size() == ts.size());
    for (std::size_t i = 0; i < tm.size(); ++i)
        CHECK(std::abs(tm[i].state_v[0] - ts[i].state_v[0]) < 1e-9);
}

TEST_CASE("law equality holds for the faithful reduction at small scale") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d", {{"rk4_steps", 8.0}});
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.5}, {"s", 0.3}});
    LawEqualityReport rep =
        law_equality_test(sys, k, invariant_of(k), vec1(0.0), 2, 8000, 16, 5);
    CHECK(rep.pass);
    REQUIRE(rep.rows.size() == 2);
    for (const auto& row : rep.rows) CHECK(row.tv <= row.band.hi);
}

TEST_CASE("law equality flags the mutated reduction") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d", {{"rk4_steps", 8.0}});
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.5}, {"s", 0.3}});
    LawEqualityReport rep =
        law_equality_test(sys, k, invariant_of(k), vec1(0.0), 2, 8000, 16, 5, true);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("law equality csv has one row per horizon") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    MarkovKernel k = kernel_catalog("iid_uniform");
    LawEqualityReport rep =
        law_equality_test(sys, k, invariant_of(k), vec1(0.0), 2, 2000, 10, 5);
    std::ostringstream os;
    write_law_equality_csv(os, rep);
    std::string text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + 2 rows
}

TEST_CASE("conditional m-step density factorizes for a past-independent model") {
    MarkovKernel k = kernel_catalog("iid_uniform");
    StationaryNoiseModel model = stationary_from_kernel(k, 3);
    PastBuffer b = buffer_of({0.3, -0.1, 0.6});
    GridDensity joint = conditional_m_step(model, b, 2, 16);
    for (std::size_t i = 0; i < joint.cell_count(); ++i)
        CHECK(joint.value(i) == doctest::Approx(0.25).epsilon(1e-9));  // (1/2)^2
}

TEST_CASE("conditional two-step density matches the chain-rule quadrature") {
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.5}, {"s", 0.3}});
    StationaryNoiseModel model = stationary_from_kernel(k, 2);
    PastBuffer b = buffer_of({0.0, 0.4});
    GridDensity joint = conditional_m_step(model, b, 2, 160);
    for (std::size_t i = 0; i < joint.cell_count(); i += 113) {
        Vec c = joint.cell_center(i);
        double ref = k.density(vec1(0.4), vec1(c[0])) * k.density(vec1(c[0]), vec1(c[1]));
        CHECK(joint.value(i) == doctest::Approx(ref).epsilon(1e-3));
    }
}

TEST_CASE("conditional m-step first marginal is the one-step conditional") {
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.5}, {"s", 0.3}});
    StationaryNoiseModel model = stationary_from_kernel(k, 2);
    PastBuffer b = buffer_of({0.0, 0.4});
    GridDensity joint = conditional_m_step(model, b, 2, 160);
    GridDensity one = k_step_kernel(k, vec1(0.4), 1, 160);
    for (int i = 0; i < 160; ++i) {
        double mass = 0.0;
        for (int j = 0; j < 160; ++j) {
            Vec c(2);
            c[0] = one.cell_center(static_cast<std::size_t>(i))[0];
            c[1] = one.cell_center(static_cast<std::size_t>(j))[0];
            mass += joint.prob(joint.locate(c));
        }
        CHECK(mass == doctest::Approx(one.prob(static_cast<std::size_t>(i))).epsilon(1e-6));
    }
}

TEST_CASE("recurrence-to-zero bound for the iid model tracks the ball mass") {
    MarkovKernel k = kernel_catalog("iid_uniform");
    StationaryNoiseModel model = stationary_from_kernel(k, 2);
    RecurrenceToZero r1 = check_recurrence_to_zero(model, 1, 0.5, 4);
    CHECK(r1.bound > 0.35);
    CHECK(r1.bound <= 0.5 + 1e-9);
    RecurrenceToZero r2 = check_recurrence_to_zero(model, 2, 0.5, 4);
    CHECK(r2.bound > 0.35 * 0.35);
    CHECK(r2.bound <= 0.25 + 1e-9);
    CHECK(r2.bound < r1.bound);
}

TEST_CASE("recurrence-to-zero works for the AR(1) model") {
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.3}, {"s", 0.6}});
    StationaryNoiseModel model = stationary_from_kernel(k, 2);
    RecurrenceToZero r = check_recurrence_to_zero(model, 1, 0.25, 4);
    CHECK(r.bound > 0.0);
    CHECK(r.bound < 1.0);
}

TEST_CASE("vec surjectivity margin of the kicked linear system") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    double m1 = check_vec_surjectivity(sys, 1);
    CHECK(m1 == doctest::Approx(1.0).epsilon(1e-9));  // D_eta S = I
    double m3 = check_vec_surjectivity(sys, 3);
    CHECK(m3 > 0.1);
}

TEST_CASE("vec surjectivity vanishes when the map ignores the noise") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    sys.map = [](const Vec& u, const Vec&) { return Vec(std::exp(-1.0) * u); };
    sys.d_noise = [](const Vec&, const Vec&) { return Mat(Mat::Zero(1, 1)); };
    CHECK(check_vec_surjectivity(sys, 2) == doctest::Approx(0.0));
}
