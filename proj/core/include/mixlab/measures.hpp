#pragma once

#include "mixlab/grid_density.hpp"

#include <cstdint>
#include <vector>

namespace mixlab {

/// Weighted sample cloud inside a declared bounding box.
struct EmpiricalMeasure {
    std::vector<Vec> points;
    std::vector<double> weights;  // nonnegative, sum to 1
    Box bounding_box;
    std::uint64_t seed = 0;

    static EmpiricalMeasure equal_weights(std::vector<Vec> pts, Box box, std::uint64_t seed);
    void validate() const;
};

/// Half the L1 distance between cell probabilities. Both grids must share
/// box and resolution.
double tv_distance(const GridDensity& a, const GridDensity& b);

/// Empirical version: both clouds are binned on the supplied grid first.
double tv_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                   const Box& box, const std::vector<int>& cells);

/// Weight-preserving binning followed by normalization.
GridDensity histogram(const EmpiricalMeasure& samples, const Box& box,
                      const std::vector<int>& cells);

struct BootstrapBand {
    double lo = 0.0;
    double hi = 0.0;
    int resamples = 0;
};

/// Percentile band (default 95%) for the TV distance between two sample
/// clouds under the pooled null, via resampling. Empirical TV between finite
/// samples is biased upward; acceptance checks compare against this band.
BootstrapBand bootstrap_tv_band(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                const Box& box, const std::vector<int>& cells,
                                int resamples = 200, double level = 0.95,
                                std::uint64_t seed = 7777);

/// Same band for a sample cloud against a fixed reference grid density.
BootstrapBand bootstrap_tv_band_vs_ref(const EmpiricalMeasure& a, const GridDensity& ref,
                                       int resamples = 200, double level = 0.95,
                                       std::uint64_t seed = 7777);

struct DualLipschitzOptions {
    int outer_iterations = 48;       // golden-section steps over the sup/Lip budget split
    double lipschitz_cap = 1.0;      // quotient counted only for pairs at distance <= cap
};

struct DualLipschitzResult {
    double value = 0.0;               // certified lower bound of the grid optimum
    double discretization_bound = 0.0;// Lipschitz budget x cell diameter
    double graph_ratio = 1.0;         // path-metric overhead (1 in 1-d)
};

/// Dual-Lipschitz (bounded-Lipschitz) distance between grid measures,
/// evaluated as a linear program over grid functions f with
/// sup|f| + Lip(f) <= 1. Exact in 1-d; in 2-d the value is a certified
/// lower bound with the reported discretization error. Dimensions above 2
/// are rejected here; use the sampled-function bound instead.
DualLipschitzResult dual_lipschitz_distance_detailed(const GridDensity& a, const GridDensity& b,
                                                     const DualLipschitzOptions& opts = {});

double dual_lipschitz_distance(const GridDensity& a, const GridDensity& b);
double dual_lipschitz_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                               const Box& box, const std::vector<int>& cells);

/// Monte-Carlo lower bound for dims > 2: best of `trials` random smooth test
/// functions with unit bounded-Lipschitz budget.
double dual_lipschitz_sampled_lower_bound(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                          int trials, std::uint64_t seed);

} // namespace mixlab
