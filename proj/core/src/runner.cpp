#include "mixlab/runner.hpp"

#include "mixlab/parallel.hpp"
#include "mixlab/pushforward.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace mixlab {
namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

class StageClock {
public:
    StageClock(RunManifest& m, std::string name)
        : manifest_(m), name_(std::move(name)),
          start_(std::chrono::steady_clock::now()) {}
    ~StageClock() {
        auto elapsed = std::chrono::steady_clock::now() - start_;
        double ms = std::chrono::duration<double, std::milli>(elapsed).count();
        manifest_.timings.push_back({name_, ms});
        log_info(name_ + ": " + std::to_string(ms) + " ms");
    }

private:
    RunManifest& manifest_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

Vec initial_state(const RunConfig& cfg, const RdsSystem& sys) {
    if (cfg.u0.empty()) return sys.invariant_set.lo();  // boundary corner
    if (static_cast<int>(cfg.u0.size()) != sys.dim_state)
        throw ConfigError("[mixing] u0: expected " + std::to_string(sys.dim_state) +
                          " components, got " + std::to_string(cfg.u0.size()));
    Vec u0(sys.dim_state);
    for (int i = 0; i < sys.dim_state; ++i) u0[i] = cfg.u0[static_cast<std::size_t>(i)];
    if (!sys.invariant_set.contains(u0, 1e-12))
        throw ConfigError("[mixing] u0 lies outside the invariant set");
    return u0;
}

NoiseModel build_noise(const RunConfig& cfg, const MarkovKernel& kernel) {
    if (!cfg.stationary) return kernel;
    return stationary_from_kernel(kernel, cfg.memory_m, cfg.iota);
}

void run_simulate(const RunConfig& cfg, RunManifest& manifest) {
    StageClock clock(manifest, "simulate");
    RdsSystem sys = dynamics_catalog(cfg.system_name, cfg.system_params);
    MarkovKernel kernel = kernel_catalog(cfg.kernel_name, cfg.kernel_params);
    NoiseModel noise = build_noise(cfg, kernel);
    GridDensity eta0_law = kernel_invariant_density(kernel, cfg.cells);

    RngStream rng = RngStream::substream(cfg.seed, 0);
    ExtendedState U0 = initial_extended(sys, noise, initial_state(cfg, sys), eta0_law, rng);
    std::vector<ExtendedState> traj = simulate_extended(sys, noise, U0, cfg.horizon, rng);

    std::ostringstream csv;
    csv.precision(17);
    csv << "k";
    for (int i = 0; i < sys.dim_state; ++i) csv << ",u" << i;
    for (int i = 0; i < sys.dim_noise; ++i) csv << ",eta" << i;
    csv << "\n";
    auto emit_row = [&](int k, const ExtendedState& U) {
        csv << k;
        for (int i = 0; i < sys.dim_state; ++i) csv << "," << U.state_v[i];
        const Vec& eta = U.last_noise();
        for (int i = 0; i < sys.dim_noise; ++i) csv << "," << eta[i];
        csv << "\n";
    };
    emit_row(0, U0);
    for (std::size_t k = 0; k < traj.size(); ++k)
        emit_row(static_cast<int>(k) + 1, traj[k]);
    emit_file(manifest, cfg.out_dir, "trajectory.csv", csv.str());
    manifest.verdicts.emplace_back("simulate", "ok");
}

void run_reduce_check(const RunConfig& cfg, RunManifest& manifest) {
    RdsSystem sys = dynamics_catalog(cfg.system_name, cfg.system_params);
    MarkovKernel kernel = kernel_catalog(cfg.kernel_name, cfg.kernel_params);
    NoiseModel noise = build_noise(cfg, kernel);
    GridDensity eta0_law = kernel_invariant_density(kernel, cfg.cells);
    Vec u0 = initial_state(cfg, sys);

    LawEqualityReport report;
    {
        StageClock clock(manifest, "law_equality");
        report = law_equality_test(sys, noise, eta0_law, u0, cfg.law_horizon,
                                   cfg.law_ensemble, cfg.law_cells, cfg.seed, cfg.mutate);
    }
    std::ostringstream csv;
    write_law_equality_csv(csv, report);
    emit_file(manifest, cfg.out_dir, "law_equality.csv", csv.str());
    manifest.verdicts.emplace_back("law_equality", report.pass ? "pass" : "fail");
    if (!report.pass)
        throw CertificateContradicted("law equality: TV outside the bootstrap band");
}

void run_mixing(const RunConfig& cfg, RunManifest& manifest) {
    RdsSystem sys = dynamics_catalog(cfg.system_name, cfg.system_params);
    MarkovKernel kernel = kernel_catalog(cfg.kernel_name, cfg.kernel_params);
    NoiseModel noise = build_noise(cfg, kernel);
    GridDensity eta0_law = kernel_invariant_density(kernel, cfg.cells);
    Vec u0 = initial_state(cfg, sys);

    GridDensity mu_ref;
    {
        StageClock clock(manifest, "stationary_estimate");
        mu_ref = estimate_stationary(sys, noise, eta0_law, cfg.burn_in, cfg.ensemble,
                                     cfg.cells, cfg.product_cells, 0, cfg.seed)[0];
    }
    DecayCurve curve;
    {
        StageClock clock(manifest, "decay_curve");
        curve = decay_curve(sys, noise, eta0_law, u0, mu_ref, cfg.horizon, cfg.ensemble,
                            cfg.seed);
    }
    std::ostringstream csv;
    write_decay_csv(csv, curve);
    emit_file(manifest, cfg.out_dir, "decay.csv", csv.str());
    manifest.verdicts.emplace_back("noise_floor", fmt(curve.noise_floor));

    RateFit fit = fit_rate(curve);
    emit_plotdata(manifest, cfg.out_dir, curve, fit);

    manifest.verdicts.emplace_back("c_fit", fmt(fit.c_fit));
    manifest.verdicts.emplace_back("gamma_fit", fmt(fit.gamma_fit));
    manifest.verdicts.emplace_back("r_squared", fmt(fit.r_squared));
    manifest.verdicts.emplace_back("fit_window", std::to_string(fit.k_min) + ".." +
                                                     std::to_string(fit.k_max));
}

void run_certify(const RunConfig& cfg, RunManifest& manifest) {
    RdsSystem sys = dynamics_catalog(cfg.system_name, cfg.system_params);
    MarkovKernel kernel = kernel_catalog(cfg.kernel_name, cfg.kernel_params);

    ControllabilityMargins margins = check_controllability(sys);
    manifest.verdicts.emplace_back("sigma_min_noise", fmt(margins.sigma_min_noise));
    manifest.verdicts.emplace_back("sigma_min_state", fmt(margins.sigma_min_state));

    MinorizingMeasure lam;
    {
        StageClock clock(manifest, "minorizing_measure");
        lam = minorizing_measure(sys, kernel, cfg.delta, cfg.cells, cfg.noise_cells);
    }
    manifest.verdicts.emplace_back("lambda_mass", fmt(lam.mass));
    manifest.verdicts.emplace_back("lambda_gamma", fmt(lam.gamma));
    {
        std::ostringstream csv;
        lam.lambda.write_csv(csv);
        emit_file(manifest, cfg.out_dir, "lambda.csv", csv.str());
    }
    {
        StageClock clock(manifest, "minorization_mc");
        double margin = verify_minorization_mc(sys, kernel, lam, cfg.mc_probes,
                                               cfg.mc_samples, cfg.seed);
        manifest.verdicts.emplace_back("minorization_mc_margin", fmt(margin));
        if (margin < 0.0)
            throw CertificateContradicted("two-step law fails to dominate lambda");
    }
    CouplingCertificate coupling;
    {
        StageClock clock(manifest, "coupling");
        coupling = certify_coupling(sys, kernel, lam.mass, cfg.delta, cfg.pairs, cfg.seed,
                                    cfg.product_cells, cfg.product_cells);
    }
    manifest.verdicts.emplace_back("coupling_epsilon", fmt(coupling.epsilon));
    manifest.verdicts.emplace_back("coupling_worst_tv", fmt(coupling.worst_pair_tv));

    RecurrenceReport rec;
    {
        StageClock clock(manifest, "recurrence");
        rec = certify_recurrence(sys, kernel, cfg.radius, cfg.budget, cfg.mc_trials,
                                 cfg.seed);
    }
    manifest.verdicts.emplace_back("recurrence_m", std::to_string(rec.m_steps));
    manifest.verdicts.emplace_back("p_bound", fmt(rec.p_bound));
    manifest.verdicts.emplace_back("mc_frequency", fmt(rec.mc_frequency));
}

// The three built-in pushforward cases with closed-form references:
// identity, 2x scaling of uniform [0,1], and the sum map on [0,1]^2.
void run_pushforward_check(const RunConfig& cfg, RunManifest& manifest) {
    StageClock clock(manifest, "pushforward_check");
    PushforwardOptions opts;
    std::ostringstream csv;
    csv.precision(17);
    csv << "case,tv,mass_defect\n";
    double worst_tv = 0.0, worst_defect = 0.0;

    auto record = [&](const std::string& name, const PushforwardResult& res,
                      const GridDensity& ref) {
        double tv = tv_distance(res.density, ref);
        csv << name << "," << tv << "," << res.mass_defect << "\n";
        worst_tv = std::max(worst_tv, tv);
        worst_defect = std::max(worst_defect, res.mass_defect);
    };

    {
        RegularMap F{1, 1, [](const Vec&, const Vec& y) { return y; },
                     [](const Vec&, const Vec&) { return Mat::Identity(1, 1); }, 0.0};
        ParamDensityKernel lamk{[](const Vec&, const Vec& y) {
                                    return (y[0] >= 0.0 && y[0] <= 1.0) ? 1.0 : 0.0;
                                },
                                Box(vec1(0.0), vec1(1.0)), 0.0};
        std::vector<int> cells{cfg.cells};
        PushforwardResult res = pushforward_density_detailed(
            F, lamk, Vec::Zero(0), Box(vec1(0.0), vec1(1.0)), cells, opts);
        GridDensity ref(Box(vec1(0.0), vec1(1.0)), cells);
        for (std::size_t i = 0; i < ref.cell_count(); ++i) ref.value(i) = 1.0;
        record("identity", res, ref);
    }
    {
        RegularMap F{1, 1, [](const Vec&, const Vec& y) { return Vec(2.0 * y); },
                     [](const Vec&, const Vec&) { return Mat(2.0 * Mat::Identity(1, 1)); },
                     0.0};
        ParamDensityKernel lamk{[](const Vec&, const Vec& y) {
                                    return (y[0] >= 0.0 && y[0] <= 1.0) ? 1.0 : 0.0;
                                },
                                Box(vec1(0.0), vec1(1.0)), 0.0};
        std::vector<int> cells{cfg.cells};
        PushforwardResult res = pushforward_density_detailed(
            F, lamk, Vec::Zero(0), Box(vec1(0.0), vec1(2.0)), cells, opts);
        GridDensity ref(Box(vec1(0.0), vec1(2.0)), cells);
        for (std::size_t i = 0; i < ref.cell_count(); ++i) ref.value(i) = 0.5;
        record("scale2", res, ref);
    }
    {
        RegularMap F{2, 1,
                     [](const Vec&, const Vec& y) { return vec1(y[0] + y[1]); },
                     [](const Vec&, const Vec&) {
                         Mat J(1, 2);
                         J << 1.0, 1.0;
                         return J;
                     },
                     0.0};
        ParamDensityKernel lamk{
            [](const Vec&, const Vec& y) {
                return (y[0] >= 0.0 && y[0] <= 1.0 && y[1] >= 0.0 && y[1] <= 1.0) ? 1.0
                                                                                  : 0.0;
            },
            Box(vec2(0.0, 0.0), vec2(1.0, 1.0)), 0.0};
        std::vector<int> cells{cfg.cells};
        PushforwardResult res = pushforward_density_detailed(
            F, lamk, Vec::Zero(0), Box(vec1(0.0), vec1(2.0)), cells, opts);
        GridDensity ref(Box(vec1(0.0), vec1(2.0)), cells);
        for (std::size_t i = 0; i < ref.cell_count(); ++i) {
            double x = ref.cell_center(i)[0];
            ref.value(i) = x <= 1.0 ? x : 2.0 - x;  // triangular density
        }
        record("sum2to1", res, ref);
    }

    emit_file(manifest, cfg.out_dir, "pushforward_report.csv", csv.str());
    manifest.verdicts.emplace_back("pushforward_worst_tv", fmt(worst_tv));
    manifest.verdicts.emplace_back("pushforward_worst_mass_defect", fmt(worst_defect));
    if (worst_tv > 2e-2 || worst_defect > 1e-3)
        throw CertificateContradicted("pushforward cases exceed tolerance");
}

int classify(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 3;
    if (dynamic_cast<const NotDissipative*>(&e) || dynamic_cast<const BudgetExceeded*>(&e) ||
        dynamic_cast<const MinorizationFails*>(&e) ||
        dynamic_cast<const EmptyMinorization*>(&e) ||
        dynamic_cast<const CertificateContradicted*>(&e))
        return 2;
    return 1;
}

} // namespace

int run(const RunConfig& cfg, RunManifest& manifest) {
    manifest.config = cfg;
    set_thread_count(cfg.threads);
    int code = 0;
    try {
        if (cfg.command == "simulate") run_simulate(cfg, manifest);
        else if (cfg.command == "reduce-check") run_reduce_check(cfg, manifest);
        else if (cfg.command == "mixing") run_mixing(cfg, manifest);
        else if (cfg.command == "certify") run_certify(cfg, manifest);
        else if (cfg.command == "pushforward-check") run_pushforward_check(cfg, manifest);
        else throw ConfigError("unknown command: " + cfg.command);
    } catch (const std::exception& e) {
        code = classify(e);
        manifest.verdicts.emplace_back("error", e.what());
        log_info(std::string("error: ") + e.what());
    }
    manifest.exit_code = code;
    try {
        std::filesystem::create_directories(cfg.out_dir);
        write_text_file((std::filesystem::path(cfg.out_dir) / "manifest.json").string(),
                        manifest.to_json());
    } catch (const std::exception& e) {
        log_info(std::string("manifest write failed: ") + e.what());
        if (code == 0) code = 1;
    }
    return code;
}

int run(const RunConfig& cfg) {
    RunManifest manifest;
    return run(cfg, manifest);
}

} // namespace mixlab
