#pragma once

#include "mixlab/reduction.hpp"

#include <iosfwd>

namespace mixlab {

struct DecayCurve {
    int horizon = 0;
    std::vector<double> tv_values;     // indexed by k = 0..horizon
    std::vector<BootstrapBand> bands;
    double noise_floor = 0.0;
};

void write_decay_csv(std::ostream& os, const DecayCurve& curve);

struct RateFit {
    double c_fit = 0.0;
    double gamma_fit = 0.0;
    double r_squared = 0.0;
    int k_min = 0;
    int k_max = 0;
};

struct CouplingCertificate {
    int n_steps = 2;
    double epsilon = 0.0;     // minorizing mass lambda(X)
    double ball_radius = 0.0;
    double worst_pair_tv = 0.0;
};

struct RecurrenceReport {
    int m_steps = 0;
    double p_bound = 0.0;
    double target_radius = 0.0;
    double mc_frequency = 0.0;  // worst direct hitting frequency over starts
};

struct MinorizingMeasure {
    GridDensity lambda;  // gamma on W(gamma), 0 elsewhere, over X x K
    double mass = 0.0;   // gamma * volume(W)
    double gamma = 0.0;
    double delta = 0.0;
};

/// Long-run empirical estimate of the stationary segment marginals mu_0..mu_m.
/// Segments are harvested at offsets spaced by the pilot decorrelation gap
/// (smallest lag with |autocorrelation| < 0.1); marginal j lives on X^{j+1}
/// with `cells` cells per axis for j = 0 and `product_cells` above.
std::vector<GridDensity> estimate_stationary(const RdsSystem& sys, const NoiseModel& noise,
                                             const GridDensity& eta0_law, int burn_in,
                                             int ensemble_n, int cells, int product_cells,
                                             int segment_m, std::uint64_t seed,
                                             int harvest_per_trajectory = 4);

/// TV between the law of u_k (N trajectories from (u0, xi ~ eta0_law)) and
/// mu_ref, for k = 0..horizon, with bootstrap bands. The noise floor is the
/// median TV between independent N-sample histograms of mu_ref.
DecayCurve decay_curve(const RdsSystem& sys, const NoiseModel& noise,
                       const GridDensity& eta0_law, const Vec& u0,
                       const GridDensity& mu_ref, int horizon, int ensemble_n,
                       std::uint64_t seed);

/// Least squares of log tv against k over the window
/// 10 * noise_floor < tv <= 0.95 (the upper cut drops saturated early points).
RateFit fit_rate(const DecayCurve& curve);

/// Two-stage certificate for P_m(U, B((0,0), r)) >= p: dissipativity gives m
/// and a kick margin delta by bisection; the kernel gives the probability of
/// reaching and then staying in B(delta). Cross-validated by direct
/// Monte-Carlo hitting frequencies; CertificateContradicted if they fall
/// below the bound.
RecurrenceReport certify_recurrence(const RdsSystem& sys, const MarkovKernel& kernel,
                                    double radius, int budget_m, int mc_trials,
                                    std::uint64_t seed);

/// Two-step minorizing measure: chi(z1, z2) built from the kernel envelope
/// over the delta-ball times the bump cutoff in z1, pushed through S composed
/// with itself and minimized over state probes; the flat density gamma 1_W
/// maximizing mass is extracted.
MinorizingMeasure minorizing_measure(const RdsSystem& sys, const MarkovKernel& kernel,
                                     double delta, int state_cells, int noise_cells);

/// Monte-Carlo domination check of the two-step law over lambda at random
/// starts in the delta-ball; returns the worst cellwise margin
/// (histogram + statistical slack - lambda), nonnegative on pass.
double verify_minorization_mc(const RdsSystem& sys, const MarkovKernel& kernel,
                              const MinorizingMeasure& lam, int probes, int samples,
                              std::uint64_t seed);

/// Worst TV between two-step grid-propagated kernels started at random pairs
/// in the ball; passes iff it stays below 1 - lam_mass plus the propagation
/// slack.
CouplingCertificate certify_coupling(const RdsSystem& sys, const MarkovKernel& kernel,
                                     double lam_mass, double ball_radius, int pairs,
                                     std::uint64_t seed, int state_cells, int noise_cells,
                                     int sub = 4);

/// Two-step grid propagation of the extended kernel from a fixed start
/// (building block of certify_coupling, exposed for tests).
GridDensity two_step_extended_law(const RdsSystem& sys, const MarkovKernel& kernel,
                                  const Vec& v, const Vec& xi0, int state_cells,
                                  int noise_cells, int sub);

} // namespace mixlab
