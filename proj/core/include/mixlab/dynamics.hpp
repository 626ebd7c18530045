#pragma once

#include "mixlab/box.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mixlab {

/// Discrete-time random dynamical system u_{k} = S(u_{k-1}, eta_k) together
/// with its partial derivatives and the compact invariant/noise supports.
struct RdsSystem {
    int dim_state = 0;
    int dim_noise = 0;
    std::function<Vec(const Vec&, const Vec&)> map;              // S(u, eta)
    std::function<Mat(const Vec&, const Vec&)> d_state;          // D_u S
    std::function<Mat(const Vec&, const Vec&)> d_noise;          // D_eta S
    Box invariant_set;                                           // X
    Box noise_support;                                           // K
    bool zero_fixed_point = true;                                // S(0,0)=0
};

/// ODE x' = V(x) observed through its time-1 flow, kicked by additive noise
/// at integer times.
struct KickedOde {
    int dim = 0;
    std::function<Vec(const Vec&)> vector_field;                 // V
    std::function<Mat(const Vec&)> d_vector_field;               // DV
    double dissipation_c = 0.0;
    double dissipation_C = 0.0;
    int rk4_steps = 100;
    Box bounding_box;
};

Vec step(const RdsSystem& sys, const Vec& u, const Vec& eta);
std::vector<Vec> iterate(const RdsSystem& sys, const Vec& u0, const std::vector<Vec>& noise_seq);

/// Time-1 flow of the unforced ODE by fixed-substep RK4 (global error O(h^4)).
Vec flow_map(const KickedOde& ode, const Vec& x);

struct DissipationFit {
    double beta = 0.0;   // contraction factor of |phi(x)| <= beta|x| + C1
    double c1 = 0.0;
    double radius = 0.0; // invariant ball radius 2(kappa + C1)/(1 - beta)
};

/// Builds the RDS (x, eta) -> flow(x) + eta. The invariant ball radius is
/// derived from a least-squares fit of the flow's contraction over sampled
/// radii; throws NotDissipative if the fitted factor is not < 1.
RdsSystem make_kicked_system(const KickedOde& ode, const Box& noise_support,
                             DissipationFit* fit_out = nullptr,
                             int probes = 10000, std::uint64_t seed = 1234);

struct DissipativityOptions {
    int random_probes = 64;
    int budget = 256;
    std::uint64_t seed = 99;
};

/// Smallest n such that every probe point of X lands within eps of zero after
/// n zero-noise steps. Probe set: corners and axis extremes of X plus seeded
/// random points. Throws BudgetExceeded if no such n exists within budget.
int check_dissipativity(const RdsSystem& sys, double eps,
                        const DissipativityOptions& opts = {});

struct ControllabilityMargins {
    double sigma_min_noise = 0.0;  // smallest singular value of D_eta S(0,0)
    double sigma_min_state = 0.0;  // smallest singular value of D_u S(0,0)
    bool pass(double threshold = 1e-8) const {
        return sigma_min_noise > threshold && sigma_min_state > threshold;
    }
};

ControllabilityMargins check_controllability(const RdsSystem& sys);

/// Compares supplied derivatives against central finite differences on
/// random probe points. Returns the worst relative error.
double validate_derivatives(const RdsSystem& sys, int probes = 32,
                            std::uint64_t seed = 5150, double fd_step = 1e-5);

/// Built-in systems: "kicked_linear_1d", "kicked_cubic_1d", "pure_noise",
/// "kicked_linear_2d". Parameters (rate, kappa, rk4_steps, ...) may be
/// overridden; unknown parameter names are rejected.
RdsSystem dynamics_catalog(const std::string& name,
                           const std::map<std::string, double>& params = {});

KickedOde make_linear_ode(int dim, double rate, double box_radius = 64.0, int rk4_steps = 100);
KickedOde make_cubic_ode(double box_radius = 64.0, int rk4_steps = 100);

} // namespace mixlab
