#pragma once

#include "mixlab/measures.hpp"

#include <functional>

namespace mixlab {

/// Parameter-dependent smooth map F(U, y) from E (dim_in) onto H (dim_out),
/// dim_out <= dim_in, with its y-derivative.
struct RegularMap {
    int dim_in = 0;
    int dim_out = 0;
    std::function<Vec(const Vec& U, const Vec& y)> eval;
    std::function<Mat(const Vec& U, const Vec& y)> d_y;
    double lipschitz_in_U = 0.0;
};

/// Parameter-dependent density lambda(U, dy) = density(U, y) dy supported in
/// a box.
struct ParamDensityKernel {
    std::function<double(const Vec& U, const Vec& y)> density;
    Box support;
    double lipschitz = 0.0;
};

struct PushforwardOptions {
    int newton_max_iter = 50;
    double newton_tol = 1e-10;
    int multistart = 8;              // Newton starts per output cell
    double dedup_radius = 1e-6;
    int fiber_panels = 32;           // composite Gauss-Legendre panels per E2 axis
    double skip_abort_fraction = 0.01;
    double sigma_threshold = 1e-10;
    bool normalize = true;
};

struct PushforwardResult {
    GridDensity density;
    double mass_defect = 0.0;  // |1 - mass| before any renormalization
    int newton_skips = 0;      // cells abandoned with a near-root residual
};

/// Density of F(U, .)_* lambda(U, .) on the output grid. Equal dimensions:
/// sum of rho/|det D_yF| over Newton-found preimages. dim_out < dim_in:
/// fiber integration over the SVD-selected complement subspace.
PushforwardResult pushforward_density_detailed(const RegularMap& F,
                                               const ParamDensityKernel& lam, const Vec& U,
                                               const Box& out_box,
                                               const std::vector<int>& out_cells,
                                               const PushforwardOptions& opts = {});

GridDensity pushforward_density(const RegularMap& F, const ParamDensityKernel& lam,
                                const Vec& U, const Box& out_box,
                                const std::vector<int>& out_cells,
                                const PushforwardOptions& opts = {});

/// Psi(nu) = sum_i w_i F(U_i, .)_* lambda(U_i, .), linear in nu.
GridDensity image_map_apply(const RegularMap& F, const ParamDensityKernel& lam,
                            const EmpiricalMeasure& nu, const Box& out_box,
                            const std::vector<int>& out_cells,
                            const PushforwardOptions& opts = {});

struct ImageLipschitzEstimate {
    double ratio_max = 0.0;
    int pair_index = -1;  // trial index attaining the max
};

/// Max over random empirical-measure pairs of
/// tv(Psi nu1, Psi nu2) / dual_lipschitz(nu1, nu2); pairs with a vanishing
/// denominator are excluded.
ImageLipschitzEstimate estimate_image_lipschitz(const RegularMap& F,
                                                const ParamDensityKernel& lam,
                                                const Box& param_box, const Box& out_box,
                                                const std::vector<int>& out_cells,
                                                int trials, std::uint64_t seed,
                                                int atoms = 24, int param_cells = 40,
                                                const PushforwardOptions& opts = {});

/// Global diffeomorphism extending a local one: equals the local map near the
/// base point, the affine linearization outside the cutoff ball, blended by a
/// quintic bump.
class GlobalDiffeo {
public:
    GlobalDiffeo(std::function<Vec(const Vec&)> local, Vec base_point, Mat linearization,
                 double cutoff_radius);

    Vec operator()(const Vec& z) const;

    const Vec& base_point() const { return base_; }
    double cutoff_radius() const { return epsilon_; }
    const Mat& linearization() const { return A_; }

private:
    std::function<Vec(const Vec&)> local_;
    Vec base_;
    Vec local_at_base_;
    Mat A_;
    double epsilon_ = 0.0;
};

/// Quintic bump: 1 for t <= 1/2, 0 for t >= 1, C^2 polynomial blend between.
double bump_cutoff(double t);

/// Lemma-style extension with probe-based injectivity checks; epsilon is
/// halved up to 6 times before EpsilonTooLarge.
GlobalDiffeo extend_local_diffeo(const std::function<Vec(const Vec&)>& local,
                                 const Vec& base_point, const Mat& derivative_at_base,
                                 double epsilon, int probe_pairs = 100000,
                                 std::uint64_t seed = 1618);

} // namespace mixlab
