#pragma once

#include "mixlab/dynamics.hpp"
#include "mixlab/markov_noise.hpp"
#include "mixlab/measures.hpp"

#include <iosfwd>
#include <variant>

namespace mixlab {

/// Truncated noise past (xi_{-m+1}, ..., xi_0), oldest first, with the
/// geometric metric weight iota > 1.
struct PastBuffer {
    std::vector<Vec> entries;
    double iota = 2.0;

    int memory() const { return static_cast<int>(entries.size()); }
    const Vec& last() const { return entries.back(); }
    /// Drops the oldest entry and appends eta.
    PastBuffer shifted(const Vec& eta) const;
};

/// d(xi, xi') = sum_j iota^{-j} |xi_{-j} - xi'_{-j}| over the buffer length.
double past_metric(const PastBuffer& a, const PastBuffer& b);

void write_buffer(std::ostream& os, const PastBuffer& b);
PastBuffer read_buffer(std::istream& is);

/// Point U = (v, xi) of the extended space: noise component is the last
/// noise (Markovian case) or the truncated past (stationary case).
struct ExtendedState {
    Vec state_v;
    std::variant<Vec, PastBuffer> noise;

    const Vec& last_noise() const;
};

/// Conditional law of the next noise given the truncated past.
struct StationaryNoiseModel {
    Box noise_support;
    std::function<double(const PastBuffer&, const Vec&)> conditional_density;
    int memory_m = 16;
    int effective_memory = 1;  // recent entries the density actually reads
    double iota = 2.0;
    int burn_in = 10000;
    double lipschitz_bound = 0.0;  // in past_metric + |z - z'|
    int sampler_grid = 256;
};

using NoiseModel = std::variant<MarkovKernel, StationaryNoiseModel>;

/// Memory-m wrapper around a Markov kernel (the conditional reads only the
/// most recent entry).
StationaryNoiseModel stationary_from_kernel(const MarkovKernel& kernel, int memory_m,
                                            double iota = 2.0);

/// Draws the next noise by the buffer-dependent inverse CDF; the draw is
/// continuous in the buffer for fixed stream state.
Vec sample_conditional(const StationaryNoiseModel& model, const PastBuffer& b,
                       RngStream& rng);

/// S(U, zeta): (S(v,zeta), zeta) in the Markovian case, (S(v,eta), shift and
/// append) in the stationary case.
ExtendedState extended_map(const RdsSystem& sys, const ExtendedState& U, const Vec& zeta);

/// Negative control: applies S to the state but leaves the noise component
/// stale. Exists only so reduction bugs are detectable by law_equality_test.
ExtendedState extended_map_mutated(const RdsSystem& sys, const ExtendedState& U,
                                   const Vec& zeta);

/// Law of (S(v,zeta), zeta), zeta ~ Q(xi;.), binned on the product grid
/// (state_cells x noise_cells over X x K). `sub` noise nodes per noise cell;
/// with sub = 1 the noise marginal matches k_step_kernel(.., 1, noise_cells)
/// cell for cell.
GridDensity extended_kernel(const RdsSystem& sys, const MarkovKernel& kernel,
                            const ExtendedState& U, int state_cells, int noise_cells,
                            int sub = 1);

/// Initial extended state: xi_0 ~ eta0_law (Markovian) or a buffer harvested
/// from a burn-in run of the conditional process (stationary).
ExtendedState initial_extended(const RdsSystem& sys, const NoiseModel& noise,
                               const Vec& u0, const GridDensity& eta0_law,
                               RngStream& rng);

std::vector<ExtendedState> simulate_extended(const RdsSystem& sys, const NoiseModel& noise,
                                             const ExtendedState& U0, int n,
                                             RngStream& rng);

struct LawEqualityRow {
    int k = 0;
    double tv = 0.0;
    BootstrapBand band;
    bool pass = false;
};

struct LawEqualityReport {
    std::vector<LawEqualityRow> rows;
    bool pass = false;
};

void write_law_equality_csv(std::ostream& os, const LawEqualityReport& report);

/// Compares the joint law of [u_0,...,u_k] from direct simulation of the
/// original process against the reduced system's state component, for each
/// k = 1..horizon_k (<= 3), on product grids with cells_per_axis cells.
/// With mutate_reduction the reduced side uses extended_map_mutated.
LawEqualityReport law_equality_test(const RdsSystem& sys, const NoiseModel& noise,
                                    const GridDensity& eta0_law, const Vec& u0,
                                    int horizon_k, int ensemble_n, int cells_per_axis,
                                    std::uint64_t seed, bool mutate_reduction = false);

/// Joint density of the next k noises given past b (chain-rule product of
/// conditionals), on the grid over K^k.
GridDensity conditional_m_step(const StationaryNoiseModel& model, const PastBuffer& b,
                               int k, int cells_per_axis);

struct RecurrenceToZero {
    int steps_s = 0;
    double bound = 0.0;
};

/// First s <= budget_s such that, uniformly over probe buffers harvested from
/// a burn-in run, the noises s+1..s+n all land in B(0, delta) with positive
/// conservative probability.
RecurrenceToZero check_recurrence_to_zero(const StationaryNoiseModel& model, int n,
                                          double delta, int budget_s,
                                          int probe_buffers = 16, int cells_per_axis = 256,
                                          std::uint64_t seed = 31415);

/// Minimum over probes of the smallest singular value of D(vec-S_m), the
/// derivative in (eta_1..eta_m) of [S_1(v;...), ..., S_m(v;...)], assembled
/// by the block recursion from d_state/d_noise.
double check_vec_surjectivity(const RdsSystem& sys, int m, int probes = 32,
                              std::uint64_t seed = 2718);

} // namespace mixlab
