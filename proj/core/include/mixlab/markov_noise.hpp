#pragma once

#include "mixlab/grid_density.hpp"

#include <functional>
#include <map>
#include <string>
#include <unordered_map>

namespace mixlab {

/// Transition probability Q(y; dz) = density(y, z) dz on a compact support.
struct MarkovKernel {
    Box noise_support;
    std::function<double(const Vec& y, const Vec& z)> density;  // rho(y, z)
    double lipschitz_bound = 0.0;  // declared Lipschitz constant of rho in (y, z)
    int sampler_grid = 256;        // cells per axis for inverse-CDF sampling
};

struct MinorizationCertificate {
    double radius_r = 0.0;
    double lower_density_at_zero = 0.0;  // conservative m(0)
    double minorizing_mass = 0.0;        // integral of the min-envelope m
    int probe_count = 0;
};

struct RecurrenceCertificate {
    double delta = 0.0;
    int steps_l = 0;
    double kappa = 0.0;
};

namespace detail {
/// Flat CDF of a density evaluated at the cell centers of `layout`.
/// Throws DegenerateDensity below 1e-12 total.
std::vector<double> conditional_cdf(const GridDensity& layout,
                                    const std::function<double(const Vec&)>& density);
/// Single-uniform inverse-CDF draw: the fractional remainder inside the
/// selected cell positions the point, so the draw is continuous in the CDF.
Vec inverse_cdf_draw(const GridDensity& layout, const std::vector<double>& cdf,
                     RngStream& rng);
} // namespace detail

/// Draws z ~ Q(y; .) by inverse CDF on the sampler grid. Deterministic given
/// the stream state.
Vec sample(const MarkovKernel& kernel, const Vec& y, RngStream& rng);

/// Conditional-CDF rows cached per quantized y. Sampling from a quantized y
/// introduces an O(lipschitz * cell) law error; meant for bulk Monte Carlo
/// where the statistical slack covers it.
class CdfCache {
public:
    CdfCache(const MarkovKernel& kernel, int y_cells);
    Vec sample_quantized(const Vec& y, RngStream& rng) const;

private:
    const std::vector<double>& row(std::size_t y_flat) const;

    const MarkovKernel& kernel_;
    GridDensity y_grid_;   // quantization grid over the support (values unused)
    GridDensity z_grid_;   // sampling grid layout (values unused)
    std::unordered_map<std::size_t, std::vector<double>> rows_;
};

/// Quadrature error bound carried by grid propagation of the kernel.
double kernel_quadrature_bound(const MarkovKernel& kernel, int cells_per_axis, int k);

/// Density of Q_k(y; .) by iterated grid convolution, renormalized each step.
/// Throws ResolutionTooCoarse if the accumulated Lipschitz bound exceeds 0.1.
GridDensity k_step_kernel(const MarkovKernel& kernel, const Vec& y, int k,
                          int cells_per_axis);

/// Propagates an arbitrary grid law one kernel step (same quadrature rule as
/// k_step_kernel, no renormalization).
GridDensity propagate_density(const MarkovKernel& kernel, const GridDensity& d);

/// Minimum of density(y, .) over probed y in the r-ball, on a grid. Pass
/// requires a positive value at z = 0 after subtracting the probe-spacing
/// Lipschitz slack. The envelope grid is written to *envelope when given.
MinorizationCertificate check_minorization(const MarkovKernel& kernel, double radius_r,
                                           int probes = 65, int cells_per_axis = 256,
                                           GridDensity* envelope = nullptr);

/// First l <= budget_l such that inf over probed y of Q_l(y; B(0, delta))
/// is positive after subtracting the quadrature bound.
RecurrenceCertificate check_strong_recurrence(const MarkovKernel& kernel, double delta,
                                              int budget_l, int probes = 33,
                                              int cells_per_axis = 256);

/// Approximate invariant density of the kernel by power iteration from the
/// uniform density.
GridDensity kernel_invariant_density(const MarkovKernel& kernel, int cells_per_axis,
                                     int max_iter = 200, double tol = 1e-10);

/// Built-in kernels: "iid_uniform", "ar1_truncgauss", "drift_away".
/// Unknown parameter names are rejected.
MarkovKernel kernel_catalog(const std::string& name,
                            const std::map<std::string, double>& params = {});

} // namespace mixlab
