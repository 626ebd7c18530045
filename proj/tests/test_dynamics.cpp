#include <doctest.h>

#include "mixlab/dynamics.hpp"

#include <cmath>

using namespace mixlab;

namespace {

// closed-form kicked linear system e^{-1} x + eta on a chosen box
RdsSystem exact_linear(double box_radius) {
    RdsSystem sys;
    sys.dim_state = 1;
    sys.dim_noise = 1;
    double a = std::exp(-1.0);
    sys.map = [a](const Vec& u, const Vec& eta) { return Vec(a * u + eta); };
    sys.d_state = [a](const Vec&, const Vec&) { return Mat(a * Mat::Identity(1, 1)); };
    sys.d_noise = [](const Vec&, const Vec&) { return Mat::Identity(1, 1); };
    sys.invariant_set = Box::cube(box_radius, 1);
    sys.noise_support = Box::cube(1.0, 1);
    return sys;
}

} // namespace

TEST_CASE("step preserves the zero fixed point") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    Vec out = step(sys, vec1(0.0), vec1(0.0));
    CHECK(std::abs(out[0]) < 1e-9);
}

TEST_CASE("step of the kicked linear system matches the closed form") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    Vec out = step(sys, vec1(1.0), vec1(0.25));
    CHECK(out[0] == doctest::Approx(std::exp(-1.0) + 0.25).epsilon(1e-6));
}

TEST_CASE("pure-noise step ignores the state") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    CHECK(step(sys, vec1(0.7), vec1(-0.3))[0] == doctest::Approx(-0.3));
}

TEST_CASE("iterate on an empty noise sequence is empty") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    CHECK(iterate(sys, vec1(1.0), {}).empty());
}

TEST_CASE("iterate with zero noise follows the decaying exponential") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    auto traj = iterate(sys, vec1(1.0), {vec1(0.0), vec1(0.0), vec1(0.0)});
    REQUIRE(traj.size() == 3);
    for (int k = 1; k <= 3; ++k)
        CHECK(traj[static_cast<std::size_t>(k - 1)][0] ==
              doctest::Approx(std::exp(-k)).epsilon(1e-5));
}

TEST_CASE("iterate of pure noise reproduces the noise sequence") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    std::vector<Vec> noise = {vec1(0.3), vec1(-0.9), vec1(0.1)};
    auto traj = iterate(sys, vec1(0.5), noise);
    for (std::size_t i = 0; i < noise.size(); ++i) CHECK(traj[i][0] == noise[i][0]);
}

TEST_CASE("flow of x' = -x over unit time is e^{-1}") {
    KickedOde ode = make_linear_ode(1, 1.0, 64.0, 100);
    CHECK(flow_map(ode, vec1(1.0))[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("equilibrium stays put under the flow") {
    KickedOde ode = make_cubic_ode();
    CHECK(flow_map(ode, vec1(0.0))[0] == doctest::Approx(0.0));
}

TEST_CASE("cubic flow matches a much finer reference integration") {
    KickedOde coarse = make_cubic_ode(64.0, 100);
    KickedOde fine = make_cubic_ode(64.0, 20000);
    CHECK(flow_map(coarse, vec1(2.0))[0] ==
          doctest::Approx(flow_map(fine, vec1(2.0))[0]).epsilon(1e-5));
}

TEST_CASE("RK4 error drops by roughly 16x when the step is halved") {
    // order-4 convergence on the cubic field
    KickedOde ref = make_cubic_ode(64.0, 20000);
    double truth = flow_map(ref, vec1(0.5))[0];
    double e1 = std::abs(flow_map(make_cubic_ode(64.0, 10), vec1(0.5))[0] - truth);
    double e2 = std::abs(flow_map(make_cubic_ode(64.0, 20), vec1(0.5))[0] - truth);
    double factor = e1 / e2;
    CHECK(factor > 12.0);
    CHECK(factor < 20.0);
}

TEST_CASE("kicked system fit recovers the linear contraction factor") {
    DissipationFit fit;
    KickedOde ode = make_linear_ode(1, 1.0, 64.0, 100);
    RdsSystem sys = make_kicked_system(ode, Box::cube(1.0, 1), &fit);
    CHECK(fit.beta == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
    CHECK(fit.c1 < 1e-2);
    CHECK(fit.radius == doctest::Approx(2.0 / (1.0 - std::exp(-1.0))).epsilon(1e-2));
    CHECK(sys.invariant_set.hi()[0] == doctest::Approx(fit.radius));
}

TEST_CASE("expanding flow is rejected as not dissipative") {
    KickedOde ode;
    ode.dim = 1;
    ode.vector_field = [](const Vec& x) { return Vec(1.0 * x); };
    ode.d_vector_field = [](const Vec&) { return Mat::Identity(1, 1); };
    ode.rk4_steps = 50;
    ode.bounding_box = Box::cube(64.0, 1);
    CHECK_THROWS_AS(make_kicked_system(ode, Box::cube(1.0, 1)), NotDissipative);
}

TEST_CASE("Lyapunov-type bound |S(x,eta)| <= beta|x| + |eta| + C1 on probes") {
    DissipationFit fit;
    KickedOde ode = make_linear_ode(1, 1.0, 64.0, 100);
    RdsSystem sys = make_kicked_system(ode, Box::cube(1.0, 1), &fit);
    RngStream rng(314);
    for (int i = 0; i < 10000; ++i) {
        Vec u = sys.invariant_set.sample(rng);
        Vec eta = sys.noise_support.sample(rng);
        double lhs = step(sys, u, eta).norm();
        CHECK(lhs <= fit.beta * u.norm() + eta.norm() + fit.c1 + 1e-9);
    }
}

TEST_CASE("invariance of the fitted ball under the kicked map") {
    KickedOde ode = make_linear_ode(1, 1.0, 64.0, 100);
    RdsSystem sys = make_kicked_system(ode, Box::cube(1.0, 1));
    RngStream rng(161);
    for (int i = 0; i < 100000; ++i) {
        Vec u = sys.invariant_set.sample(rng);
        Vec eta = sys.noise_support.sample(rng);
        CHECK_NOTHROW(step(sys, u, eta));
    }
}

TEST_CASE("dissipativity step count matches the logarithmic formula") {
    // |x_n| = e^{-n} |x_0|, X = [-3.2, 3.2], eps = 0.1: n = ceil(ln 32) = 4
    RdsSystem sys = exact_linear(3.2);
    CHECK(check_dissipativity(sys, 0.1) == 4);
}

TEST_CASE("dissipativity is immediate when eps covers the whole set") {
    RdsSystem sys = exact_linear(3.2);
    CHECK(check_dissipativity(sys, 10.0) == 0);
}

TEST_CASE("pure noise reaches zero after one zero-kick") {
    RdsSystem sys = dynamics_catalog("pure_noise");
    CHECK(check_dissipativity(sys, 1e-6) == 1);
}

TEST_CASE("dissipativity budget is enforced") {
    RdsSystem sys = exact_linear(3.2);
    DissipativityOptions opts;
    opts.budget = 2;
    CHECK_THROWS_AS(check_dissipativity(sys, 0.1, opts), BudgetExceeded);
}

TEST_CASE("controllability margins of the kicked system") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    ControllabilityMargins m = check_controllability(sys);
    CHECK(m.sigma_min_noise == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.sigma_min_state == doctest::Approx(std::exp(-1.0)).epsilon(1e-4));
    CHECK(m.pass());
}

TEST_CASE("state-independent noise derivative fails controllability") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    sys.d_noise = [](const Vec&, const Vec&) { return Mat(Mat::Zero(1, 1)); };
    ControllabilityMargins m = check_controllability(sys);
    CHECK(m.sigma_min_noise == doctest::Approx(0.0));
    CHECK_FALSE(m.pass());
}

TEST_CASE("semigroup property holds exactly along the same float path") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d");
    RngStream rng(88);
    std::vector<Vec> noise;
    for (int i = 0; i < 8; ++i) noise.push_back(sys.noise_support.sample(rng));
    auto full = iterate(sys, vec1(0.9), noise);
    for (std::size_t k = 1; k < noise.size(); ++k) {
        auto head = iterate(sys, vec1(0.9),
                            std::vector<Vec>(noise.begin(), noise.begin() + static_cast<long>(k)));
        auto tail = iterate(sys, head.back(),
                            std::vector<Vec>(noise.begin() + static_cast<long>(k), noise.end()));
        CHECK(tail.back()[0] == full.back()[0]);
    }
}

TEST_CASE("absorption from far away happens in logarithmic time") {
    // worst-case kicks of size 1 against the contraction e^{-1}
    KickedOde ode = make_linear_ode(1, 1.0, 4096.0, 100);
    RdsSystem sys = make_kicked_system(ode, Box::cube(1.0, 1));
    double R = sys.invariant_set.hi()[0];
    for (double M : {10.0, 100.0, 1000.0}) {
        double x = M;
        int n = 0;
        while (std::abs(x) > R && n < 100) {
            x = flow_map(ode, vec1(x))[0] + 1.0;  // kick away from zero
            ++n;
        }
        CHECK(n <= static_cast<int>(std::ceil(std::log(M))) + 3);
    }
}

TEST_CASE("supplied derivatives agree with finite differences") {
    for (const char* name : {"kicked_linear_1d", "kicked_cubic_1d", "pure_noise",
                             "kicked_linear_2d"}) {
        RdsSystem sys = dynamics_catalog(name);
        CHECK(validate_derivatives(sys) < 1e-4);
    }
}

TEST_CASE("leaving the invariant set is reported") {
    RdsSystem sys = exact_linear(0.1);  // box too small for the kicks
    CHECK_THROWS_AS(step(sys, vec1(0.1), vec1(1.0)), LeftInvariantSet);
}

TEST_CASE("catalog rejects unknown names and parameters") {
    CHECK_THROWS_AS(dynamics_catalog("no_such_system"), ConfigError);
    CHECK_THROWS_AS(dynamics_catalog("kicked_linear_1d", {{"bogus", 1.0}}), ConfigError);
}

TEST_CASE("catalog parameters are honored") {
    RdsSystem sys = dynamics_catalog("kicked_linear_1d", {{"rate", 0.5}, {"rk4_steps", 8.0}});
    Vec out = step(sys, vec1(1.0), vec1(0.0));
    CHECK(out[0] == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
}
