#include "mixlab/pushforward.hpp"
#include "mixlab/parallel.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <cmath>

namespace mixlab {

namespace {

// 4-node Gauss-Legendre on [-1, 1]
constexpr double kGlNode[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
constexpr double kGlWeight[4] = {0.3478548451374538, 0.6521451548625461,
                                 0.6521451548625461, 0.3478548451374538};

double clamped_density(const ParamDensityKernel& lam, const Vec& U, const Vec& y) {
    if (!lam.support.contains(y, 1e-12)) return 0.0;
    double v = lam.density(U, y);
    return v > 0.0 ? v : 0.0;
}

struct NewtonOutcome {
    bool converged = false;
    Vec y;
    double best_residual = std::numeric_limits<double>::infinity();
};

// Damped Newton on residual(y) with square Jacobian jac(y).
NewtonOutcome damped_newton(const std::function<Vec(const Vec&)>& residual,
                            const std::function<Mat(const Vec&)>& jac, Vec y,
                            const PushforwardOptions& opts, double scale) {
    NewtonOutcome out;
    Vec r = residual(y);
    double rn = r.norm();
    out.best_residual = rn;
    for (int it = 0; it < opts.newton_max_iter; ++it) {
        if (rn <= opts.newton_tol * scale) {
            out.converged = true;
            out.y = y;
            return out;
        }
        Mat J = jac(y);
        Eigen::PartialPivLU<Mat> lu(J);
        Vec dy = lu.solve(r);
        if (!dy.allFinite()) break;
        double alpha = 1.0;
        bool improved = false;
        for (int h = 0; h < 8; ++h) {
            Vec cand = y - alpha * dy;
            Vec rc = residual(cand);
            double rcn = rc.norm();
            if (rcn < rn) {
                y = cand;
                r = rc;
                rn = rcn;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!improved) break;
        out.best_residual = std::min(out.best_residual, rn);
    }
    if (rn <= opts.newton_tol * scale) {
        out.converged = true;
        out.y = y;
    }
    return out;
}

std::vector<Vec> start_points(const Box& box, int count, std::uint64_t seed) {
    std::vector<Vec> pts;
    pts.push_back(box.center());
    RngStream rng(seed);
    while (static_cast<int>(pts.size()) < count) pts.push_back(box.sample(rng));
    return pts;
}

void dedup_push(std::vector<Vec>& roots, const Vec& y, double radius) {
    for (const Vec& r : roots)
        if ((r - y).norm() < radius) return;
    roots.push_back(y);
}

// Projection interval of the box onto direction v (orthonormal column).
void project_box(const Box& box, const Vec& v, double& lo, double& hi) {
    lo = hi = 0.0;
    for (int d = 0; d < box.dim(); ++d) {
        double a = v[d] * box.lo()[d], b = v[d] * box.hi()[d];
        lo += std::min(a, b);
        hi += std::max(a, b);
    }
}

} // namespace

PushforwardResult pushforward_density_detailed(const RegularMap& F,
                                               const ParamDensityKernel& lam, const Vec& U,
                                               const Box& out_box,
                                               const std::vector<int>& out_cells,
                                               const PushforwardOptions& opts) {
    if (F.dim_out > F.dim_in)
        throw ConfigError("pushforward_density: dim_out must be <= dim_in");
    GridDensity g(out_box, out_cells);
    const std::size_t n = g.cell_count();
    std::atomic<int> skips{0};
    std::atomic<bool> surjectivity_lost{false};

    if (F.dim_in == F.dim_out) {
        std::vector<Vec> starts = start_points(lam.support, opts.multistart, 20240 + 1);
        parallel_for(n, [&](std::size_t c) {
            Vec x = g.cell_center(c);
            auto residual = [&](const Vec& y) { return Vec(F.eval(U, y) - x); };
            auto jac = [&](const Vec& y) { return F.d_y(U, y); };
            double scale = std::max(1.0, x.norm());
            std::vector<Vec> roots;
            double best_res = std::numeric_limits<double>::infinity();
            for (const Vec& s0 : starts) {
                NewtonOutcome o = damped_newton(residual, jac, s0, opts, scale);
                best_res = std::min(best_res, o.best_residual);
                if (o.converged) dedup_push(roots, o.y, opts.dedup_radius);
            }
            double acc = 0.0;
            for (const Vec& y : roots) {
                double rho = clamped_density(lam, U, y);
                if (rho <= 0.0) continue;
                Mat J = F.d_y(U, y);
                Eigen::JacobiSVD<Mat> svd(J);
                double smin = svd.singularValues().minCoeff();
                if (smin < opts.sigma_threshold) {
                    surjectivity_lost = true;
                    continue;
                }
                acc += rho / std::abs(J.determinant());
            }
            double cell_diam = 0.0;
            for (int a = 0; a < out_box.dim(); ++a)
                cell_diam += g.cell_width(a) * g.cell_width(a);
            cell_diam = std::sqrt(cell_diam);
            if (roots.empty() && best_res < cell_diam) skips.fetch_add(1);
            g.value(c) = acc;
        });
    } else {
        const int dH = F.dim_out, dE = F.dim_in, dF = dE - dH;
        Vec y_ref = lam.support.center();
        Eigen::JacobiSVD<Mat> ref_svd(F.d_y(U, y_ref), Eigen::ComputeFullV);
        double sigma_ref = ref_svd.singularValues().minCoeff();
        Mat V1 = ref_svd.matrixV().leftCols(dH);
        Mat V2 = ref_svd.matrixV().rightCols(dF);

        // composite Gauss-Legendre nodes per fiber axis over the projected range
        std::vector<std::vector<std::pair<double, double>>> axis_nodes(
            static_cast<std::size_t>(dF));
        for (int a = 0; a < dF; ++a) {
            double lo, hi;
            project_box(lam.support, V2.col(a), lo, hi);
            double panel = (hi - lo) / opts.fiber_panels;
            for (int p = 0; p < opts.fiber_panels; ++p) {
                double mid = lo + (p + 0.5) * panel;
                for (int q = 0; q < 4; ++q)
                    axis_nodes[static_cast<std::size_t>(a)].push_back(
                        {mid + 0.5 * panel * kGlNode[q], 0.5 * panel * kGlWeight[q]});
            }
        }
        Box y1_box = [&] {
            Vec lo(dH), hi(dH);
            for (int a = 0; a < dH; ++a) {
                project_box(lam.support, V1.col(a), lo[a], hi[a]);
                if (hi[a] <= lo[a]) hi[a] = lo[a] + 1e-9;
            }
            return Box(lo, hi);
        }();
        std::vector<Vec> fixed_starts = start_points(y1_box, opts.multistart, 20240 + 2);

        parallel_for(n, [&](std::size_t c) {
            Vec x = g.cell_center(c);
            double scale = std::max(1.0, x.norm());
            double acc = 0.0;
            // tensor sweep over fiber nodes with warm starts along the sweep
            std::vector<std::size_t> idx(static_cast<std::size_t>(dF), 0);
            std::vector<Vec> warm;
            bool more = true;
            while (more) {
                Vec y2(dF);
                double w2 = 1.0;
                for (int a = 0; a < dF; ++a) {
                    auto [node, weight] = axis_nodes[static_cast<std::size_t>(a)]
                                                    [idx[static_cast<std::size_t>(a)]];
                    y2[a] = node;
                    w2 *= weight;
                }
                auto lift = [&](const Vec& y1) { return Vec(V1 * y1 + V2 * y2); };
                auto residual = [&](const Vec& y1) { return Vec(F.eval(U, lift(y1)) - x); };
                auto jac = [&](const Vec& y1) { return Mat(F.d_y(U, lift(y1)) * V1); };

                std::vector<Vec> roots;
                for (const Vec& s0 : warm) {
                    NewtonOutcome o = damped_newton(residual, jac, s0, opts, scale);
                    if (o.converged) dedup_push(roots, o.y, opts.dedup_radius);
                }
                for (const Vec& s0 : fixed_starts) {
                    NewtonOutcome o = damped_newton(residual, jac, s0, opts, scale);
                    if (o.converged) dedup_push(roots, o.y, opts.dedup_radius);
                }
                warm = roots;
                for (const Vec& y1 : roots) {
                    Vec y = lift(y1);
                    double rho = clamped_density(lam, U, y);
                    if (rho <= 0.0) continue;
                    Mat Jr = F.d_y(U, y) * V1;
                    Eigen::JacobiSVD<Mat> svd(Jr);
                    double smin = svd.singularValues().minCoeff();
                    if (smin < opts.sigma_threshold) {
                        surjectivity_lost = true;
                        continue;
                    }
                    if (smin < 0.5 * sigma_ref) {
                        // restricted block degenerated away from the reference;
                        // re-select the subspace locally and redo this branch
                        Eigen::JacobiSVD<Mat> loc(F.d_y(U, y), Eigen::ComputeFullV);
                        Mat W1 = loc.matrixV().leftCols(dH);
                        Mat Jl = F.d_y(U, y) * W1;
                        if (std::abs(Jl.determinant()) > std::abs(Jr.determinant()))
                            Jr = Jl;
                    }
                    acc += rho * w2 / std::abs(Jr.determinant());
                }
                // advance tensor index
                int a = 0;
                for (; a < dF; ++a) {
                    if (++idx[static_cast<std::size_t>(a)] <
                        axis_nodes[static_cast<std::size_t>(a)].size())
                        break;
                    idx[static_cast<std::size_t>(a)] = 0;
                }
                more = a < dF;
            }
            g.value(c) = acc;
        });
    }

    if (surjectivity_lost)
        throw SurjectivityLost("pushforward_density: singular value below threshold at a "
                               "visited preimage");
    if (skips > static_cast<int>(opts.skip_abort_fraction * static_cast<double>(n)) &&
        skips > 0)
        throw NewtonDivergence("pushforward_density: " + std::to_string(skips.load()) +
                               " of " + std::to_string(n) +
                               " cells abandoned with near-root residuals");

    PushforwardResult result;
    double mass = g.total_mass();
    if (mass < 1e-12) throw DegenerateDensity("pushforward_density: vanishing image mass");
    result.mass_defect = std::abs(1.0 - mass);
    result.newton_skips = skips.load();
    if (opts.normalize) g.normalize();
    result.density = std::move(g);
    return result;
}

GridDensity pushforward_density(const RegularMap& F, const ParamDensityKernel& lam,
                                const Vec& U, const Box& out_box,
                                const std::vector<int>& out_cells,
                                const PushforwardOptions& opts) {
    return pushforward_density_detailed(F, lam, U, out_box, out_cells, opts).density;
}

GridDensity image_map_apply(const RegularMap& F, const ParamDensityKernel& lam,
                            const EmpiricalMeasure& nu, const Box& out_box,
                            const std::vector<int>& out_cells,
                            const PushforwardOptions& opts) {
    nu.validate();
    GridDensity mix(out_box, out_cells);
    for (std::size_t i = 0; i < nu.points.size(); ++i) {
        if (nu.weights[i] <= 0.0) continue;
        GridDensity g = pushforward_density(F, lam, nu.points[i], out_box, out_cells, opts);
        for (std::size_t c = 0; c < mix.cell_count(); ++c)
            mix.value(c) += nu.weights[i] * g.value(c);
    }
    return mix;
}

ImageLipschitzEstimate estimate_image_lipschitz(const RegularMap& F,
                                                const ParamDensityKernel& lam,
                                                const Box& param_box, const Box& out_box,
                                                const std::vector<int>& out_cells,
                                                int trials, std::uint64_t seed, int atoms,
                                                int param_cells,
                                                const PushforwardOptions& opts) {
    if (param_box.dim() > 2)
        throw ConfigError("estimate_image_lipschitz: parameter dimension must be <= 2 "
                          "for the dual-Lipschitz denominator");
    std::vector<int> pcells(static_cast<std::size_t>(param_box.dim()), param_cells);
    ImageLipschitzEstimate est;
    for (int t = 0; t < trials; ++t) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(t));
        std::vector<Vec> p1, p2;
        for (int i = 0; i < atoms; ++i) p1.push_back(param_box.sample(rng));
        for (int i = 0; i < atoms; ++i) p2.push_back(param_box.sample(rng));
        auto nu1 = EmpiricalMeasure::equal_weights(std::move(p1), param_box, seed);
        auto nu2 = EmpiricalMeasure::equal_weights(std::move(p2), param_box, seed);
        double denom = dual_lipschitz_distance(nu1, nu2, param_box, pcells);
        if (denom < 1e-9) continue;
        GridDensity g1 = image_map_apply(F, lam, nu1, out_box, out_cells, opts);
        GridDensity g2 = image_map_apply(F, lam, nu2, out_box, out_cells, opts);
        double ratio = tv_distance(g1, g2) / denom;
        if (ratio > est.ratio_max) {
            est.ratio_max = ratio;
            est.pair_index = t;
        }
    }
    return est;
}

double bump_cutoff(double t) {
    t = std::abs(t);
    if (t <= 0.5) return 1.0;
    if (t >= 1.0) return 0.0;
    double u = (t - 0.5) * 2.0;
    return 1.0 - (10.0 * u * u * u - 15.0 * u * u * u * u + 6.0 * u * u * u * u * u);
}

GlobalDiffeo::GlobalDiffeo(std::function<Vec(const Vec&)> local, Vec base_point,
                           Mat linearization, double cutoff_radius)
    : local_(std::move(local)),
      base_(std::move(base_point)),
      A_(std::move(linearization)),
      epsilon_(cutoff_radius) {
    local_at_base_ = local_(base_);
}

Vec GlobalDiffeo::operator()(const Vec& z) const {
    Vec d = z - base_;
    double t = d.norm() / epsilon_;
    if (t >= 1.0) return local_at_base_ + A_ * d;
    double chi = bump_cutoff(t);
    if (chi >= 1.0) return local_(z);
    return local_at_base_ + (1.0 - chi) * (A_ * d) + chi * (local_(z) - local_at_base_);
}

GlobalDiffeo extend_local_diffeo(const std::function<Vec(const Vec&)>& local,
                                 const Vec& base_point, const Mat& derivative_at_base,
                                 double epsilon, int probe_pairs, std::uint64_t seed) {
    Eigen::JacobiSVD<Mat> svd(derivative_at_base);
    double sigma = svd.singularValues().minCoeff();
    if (sigma < 1e-10)
        throw NotLocallyInjective("extend_local_diffeo: derivative at base is singular");
    const int dim = static_cast<int>(base_point.size());
    const double margin = 1e-6 * sigma;

    auto sample_ball = [&](RngStream& rng, double radius) {
        Vec p(dim);
        for (;;) {
            for (int d = 0; d < dim; ++d) p[d] = rng.uniform(-1.0, 1.0);
            if (p.norm() <= 1.0) break;
        }
        return Vec(base_point + radius * p);
    };

    auto injective_on = [&](const std::function<Vec(const Vec&)>& f, double radius,
                            std::uint64_t probe_seed) {
        RngStream rng(probe_seed);
        for (int i = 0; i < probe_pairs; ++i) {
            Vec a = sample_ball(rng, radius);
            Vec b = sample_ball(rng, radius);
            double gap = (a - b).norm();
            if (gap < 1e-12) continue;
            if ((f(a) - f(b)).norm() < margin * gap) return false;
        }
        return true;
    };

    double eps = epsilon;
    for (int attempt = 0; attempt <= 6; ++attempt) {
        if (!injective_on(local, 2.0 * eps, seed))
            throw NotLocallyInjective(
                "extend_local_diffeo: local map fails pairwise injectivity on B(base, 2e)");
        GlobalDiffeo global(local, base_point, derivative_at_base, eps);
        if (injective_on([&](const Vec& z) { return global(z); }, 3.0 * eps, seed + 1))
            return global;
        eps *= 0.5;
    }
    throw EpsilonTooLarge("extend_local_diffeo: blend failed injectivity probes after 6 "
                          "halvings of epsilon");
}

} // namespace mixlab
