#include "mixlab/dynamics.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace mixlab {

Vec step(const RdsSystem& sys, const Vec& u, const Vec& eta) {
    Vec out = sys.map(u, eta);
    if (!sys.invariant_set.contains(out, 1e-9))
        throw LeftInvariantSet("step: S(u,eta) left the invariant set");
    return out;
}

std::vector<Vec> iterate(const RdsSystem& sys, const Vec& u0, const std::vector<Vec>& noise_seq) {
    std::vector<Vec> traj;
    traj.reserve(noise_seq.size());
    Vec u = u0;
    for (std::size_t k = 0; k < noise_seq.size(); ++k) {
        try {
            u = step(sys, u, noise_seq[k]);
        } catch (const LeftInvariantSet&) {
            throw LeftInvariantSet("iterate: left invariant set at step " + std::to_string(k + 1));
        }
        traj.push_back(u);
    }
    return traj;
}

Vec flow_map(const KickedOde& ode, const Vec& x0) {
    const double blowup_limit = 10.0 * ode.bounding_box.diameter();
    const int n = ode.rk4_steps;
    const double h = 1.0 / n;
    Vec x = x0;
    for (int i = 0; i < n; ++i) {
        Vec k1 = ode.vector_field(x);
        Vec k2 = ode.vector_field(x + 0.5 * h * k1);
        Vec k3 = ode.vector_field(x + 0.5 * h * k2);
        Vec k4 = ode.vector_field(x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (x.norm() > blowup_limit)
            throw Blowup("flow_map: trajectory exceeded 10x bounding box diameter");
    }
    return x;
}

namespace {

// Least-squares fit of |phi(x)| against beta |x| + C1 over sampled radii.
DissipationFit fit_dissipation(const KickedOde& ode, double kappa, int probes,
                               std::uint64_t seed) {
    RngStream rng(seed);
    double r_max = 0.45 * ode.bounding_box.diameter() / std::sqrt(double(ode.dim));
    double sxx = 0, sx = 0, sy = 0, sxy = 0;
    int n = 0;
    for (int i = 0; i < probes; ++i) {
        Vec dir(ode.dim);
        for (int d = 0; d < ode.dim; ++d) dir[d] = rng.uniform(-1.0, 1.0);
        if (dir.norm() < 1e-12) continue;
        dir.normalize();
        double r = rng.uniform(0.0, r_max);
        Vec x = r * dir;
        double y = flow_map(ode, x).norm();
        sx += r;
        sy += y;
        sxx += r * r;
        sxy += r * y;
        ++n;
    }
    double denom = n * sxx - sx * sx;
    DissipationFit fit;
    fit.beta = (n * sxy - sx * sy) / denom;
    fit.c1 = std::max(0.0, (sy - fit.beta * sx) / n);
    if (fit.beta >= 1.0 - 1e-3)
        throw NotDissipative("make_kicked_system: fitted contraction factor " +
                             std::to_string(fit.beta) + " is not < 1");
    if (fit.beta < 0.0) fit.beta = 0.0;
    fit.radius = 2.0 * (kappa + fit.c1) / (1.0 - fit.beta);
    return fit;
}

} // namespace

RdsSystem make_kicked_system(const KickedOde& ode, const Box& noise_support,
                             DissipationFit* fit_out, int probes, std::uint64_t seed) {
    double kappa = std::max(noise_support.lo().cwiseAbs().maxCoeff() * 0.0 +
                                noise_support.lo().norm(),
                            noise_support.hi().norm());
    DissipationFit fit = fit_dissipation(ode, kappa, probes, seed);
    if (fit_out) *fit_out = fit;

    RdsSystem sys;
    sys.dim_state = ode.dim;
    sys.dim_noise = noise_support.dim();
    KickedOde ode_copy = ode;
    sys.map = [ode_copy](const Vec& u, const Vec& eta) {
        return Vec(flow_map(ode_copy, u) + eta);
    };
    sys.d_state = [ode_copy](const Vec& u, const Vec&) {
        // variational RK4: integrate dJ/dt = DV(x(t)) J alongside the flow
        const int n = ode_copy.rk4_steps;
        const double h = 1.0 / n;
        Vec x = u;
        Mat J = Mat::Identity(ode_copy.dim, ode_copy.dim);
        for (int i = 0; i < n; ++i) {
            Vec k1 = ode_copy.vector_field(x);
            Mat K1 = ode_copy.d_vector_field(x) * J;
            Vec x2 = x + 0.5 * h * k1;
            Vec k2 = ode_copy.vector_field(x2);
            Mat K2 = ode_copy.d_vector_field(x2) * (J + 0.5 * h * K1);
            Vec x3 = x + 0.5 * h * k2;
            Vec k3 = ode_copy.vector_field(x3);
            Mat K3 = ode_copy.d_vector_field(x3) * (J + 0.5 * h * K2);
            Vec x4 = x + h * k3;
            Vec k4 = ode_copy.vector_field(x4);
            Mat K4 = ode_copy.d_vector_field(x4) * (J + h * K3);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            J += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        }
        return J;
    };
    int dn = sys.dim_noise;
    int ds = sys.dim_state;
    sys.d_noise = [ds, dn](const Vec&, const Vec&) { return Mat::Identity(ds, dn); };
    sys.invariant_set = Box::cube(fit.radius, ode.dim);
    sys.noise_support = noise_support;
    return sys;
}

int check_dissipativity(const RdsSystem& sys, double eps, const DissipativityOptions& opts) {
    if (eps <= 0.0) throw ConfigError("check_dissipativity: eps must be positive");
    // deterministic probes: corners and axis extremes, then seeded random fill
    std::vector<Vec> probes;
    const Box& X = sys.invariant_set;
    int d = X.dim();
    if (d <= 16) {
        for (std::uint64_t mask = 0; mask < (1ULL << d); ++mask) {
            Vec p(d);
            for (int i = 0; i < d; ++i) p[i] = (mask >> i) & 1 ? X.hi()[i] : X.lo()[i];
            probes.push_back(p);
        }
    }
    probes.push_back(X.center());
    RngStream rng(opts.seed);
    for (int i = 0; i < opts.random_probes; ++i) probes.push_back(X.sample(rng));

    Vec zero = Vec::Zero(sys.dim_noise);
    double worst = 0.0;
    for (const auto& p : probes) worst = std::max(worst, p.norm());
    if (worst <= eps) return 0;
    for (int n = 1; n <= opts.budget; ++n) {
        worst = 0.0;
        for (auto& p : probes) {
            p = sys.map(p, zero);
            worst = std::max(worst, p.norm());
        }
        if (worst <= eps) return n;
    }
    throw BudgetExceeded("check_dissipativity: no n within budget brings probes inside eps");
}

ControllabilityMargins check_controllability(const RdsSystem& sys) {
    Vec u0 = Vec::Zero(sys.dim_state), e0 = Vec::Zero(sys.dim_noise);
    Eigen::JacobiSVD<Mat> sn(sys.d_noise(u0, e0));
    Eigen::JacobiSVD<Mat> ss(sys.d_state(u0, e0));
    ControllabilityMargins m;
    m.sigma_min_noise = sn.singularValues().size() ? sn.singularValues().minCoeff() : 0.0;
    // surjectivity of an H x E map needs full row rank: use the dimH-th value
    if (sys.d_noise(u0, e0).rows() > sn.singularValues().size()) m.sigma_min_noise = 0.0;
    m.sigma_min_state = ss.singularValues().size() ? ss.singularValues().minCoeff() : 0.0;
    return m;
}

double validate_derivatives(const RdsSystem& sys, int probes, std::uint64_t seed, double h) {
    RngStream rng(seed);
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        Vec u = sys.invariant_set.sample(rng);
        Vec e = sys.noise_support.sample(rng);
        Mat Ju = sys.d_state(u, e);
        Mat Je = sys.d_noise(u, e);
        for (int j = 0; j < sys.dim_state; ++j) {
            Vec up = u, um = u;
            up[j] += h;
            um[j] -= h;
            Vec col = (sys.map(up, e) - sys.map(um, e)) / (2 * h);
            double scale = std::max(1.0, Ju.col(j).norm());
            worst = std::max(worst, (col - Ju.col(j)).norm() / scale);
        }
        for (int j = 0; j < sys.dim_noise; ++j) {
            Vec ep = e, em = e;
            ep[j] += h;
            em[j] -= h;
            Vec col = (sys.map(u, ep) - sys.map(u, em)) / (2 * h);
            double scale = std::max(1.0, Je.col(j).norm());
            worst = std::max(worst, (col - Je.col(j)).norm() / scale);
        }
    }
    return worst;
}

KickedOde make_linear_ode(int dim, double rate, double box_radius, int rk4_steps) {
    KickedOde ode;
    ode.dim = dim;
    ode.vector_field = [rate](const Vec& x) { return Vec(-rate * x); };
    ode.d_vector_field = [rate, dim](const Vec&) { return Mat(-rate * Mat::Identity(dim, dim)); };
    ode.dissipation_c = rate;
    ode.dissipation_C = 0.0;
    ode.rk4_steps = rk4_steps;
    ode.bounding_box = Box::cube(box_radius, dim);
    return ode;
}

KickedOde make_cubic_ode(double box_radius, int rk4_steps) {
    KickedOde ode;
    ode.dim = 1;
    ode.vector_field = [](const Vec& x) { return vec1(-x[0] * x[0] * x[0]); };
    ode.d_vector_field = [](const Vec& x) {
        Mat m(1, 1);
        m(0, 0) = -3.0 * x[0] * x[0];
        return m;
    };
    ode.dissipation_c = 0.0;  // <V(x),x> = -x^4 <= -c x^2 + C with c=1, C=1
    ode.dissipation_c = 1.0;
    ode.dissipation_C = 1.0;
    ode.rk4_steps = rk4_steps;
    ode.bounding_box = Box::cube(box_radius, 1);
    return ode;
}

namespace {

double take(std::map<std::string, double>& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    if (it == p.end()) return fallback;
    double v = it->second;
    p.erase(it);
    return v;
}

} // namespace

RdsSystem dynamics_catalog(const std::string& name, const std::map<std::string, double>& params) {
    std::map<std::string, double> p = params;
    RdsSystem sys;
    if (name == "kicked_linear_1d" || name == "kicked_linear_2d") {
        int dim = name == "kicked_linear_2d" ? 2 : 1;
        double rate = take(p, "rate", 1.0);
        double kappa = take(p, "kappa", 1.0);
        int rk4 = static_cast<int>(take(p, "rk4_steps", 100));
        KickedOde ode = make_linear_ode(dim, rate, 64.0, rk4);
        sys = make_kicked_system(ode, Box::cube(kappa, dim));
    } else if (name == "kicked_cubic_1d") {
        double kappa = take(p, "kappa", 1.0);
        int rk4 = static_cast<int>(take(p, "rk4_steps", 100));
        // tight bounding box: explicit RK4 on -x^3 is unstable for h x^2 >> 1,
        // so keep the dissipation probes within the stable region
        KickedOde ode = make_cubic_ode(6.0, rk4);
        sys = make_kicked_system(ode, Box::cube(kappa, 1));
    } else if (name == "pure_noise") {
        double kappa = take(p, "kappa", 1.0);
        sys.dim_state = 1;
        sys.dim_noise = 1;
        sys.map = [](const Vec&, const Vec& eta) { return eta; };
        sys.d_state = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
        sys.d_noise = [](const Vec&, const Vec&) { return Mat::Identity(1, 1); };
        sys.invariant_set = Box::cube(kappa, 1);
        sys.noise_support = Box::cube(kappa, 1);
    } else {
        throw ConfigError("dynamics_catalog: unknown system '" + name + "'");
    }
    if (!p.empty())
        throw ConfigError("dynamics_catalog: unknown parameter '" + p.begin()->first + "'");
    return sys;
}

} // namespace mixlab
