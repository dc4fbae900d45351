#include "rde/cli.hpp"

#include "rde/error.hpp"
#include "rde/experiments.hpp"
#include "rde/limits.hpp"
#include "rde/parallel.hpp"
#include "rde/transfer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace rde {

namespace {

std::vector<long long> clipped(const std::vector<long long>& ladder, long long n) {
    std::vector<long long> out;
    for (long long m : ladder) {
        if (m >= 1 && m <= n) out.push_back(m);
    }
    return out;
}

SimulationPlan make_plan(const ExperimentConfig& c, const RandomSystem& system,
                         const Observable& phi) {
    SimulationPlan plan;
    plan.system = &system;
    plan.phi = phi;
    plan.n = c.n;
    plan.replicas = c.replicas;
    plan.master_seed = c.master_seed;
    plan.threads = c.threads;
    plan.mode = c.mode == "quenched" ? QuenchMode::Quenched : QuenchMode::Annealed;
    plan.omega_seed = c.omega_seed;
    if (c.initial.kind == "lebesgue") {
        plan.initial = InitialLaw::lebesgue();
    } else if (c.initial.kind == "point") {
        plan.initial = InitialLaw::point(c.initial.x0);
    } else {
        plan.initial = InitialLaw::stationary();
        plan.density = stationary_cells(system, c.grid);
    }
    return plan;
}

std::string correlation_csv(const VarianceEstimate& v) {
    std::ostringstream os;
    write_correlation_csv(os, v);
    return os.str();
}

std::string rate_csv(const RateFunction& r) {
    std::ostringstream os;
    write_rate_csv(os, r);
    return os.str();
}

void record_variance(ExperimentReport& rep, const VarianceEstimate& v) {
    rep.prediction["sigma2"] = v.sigma2;
    rep.prediction["sigma2_raw"] = v.sigma2_raw;
    rep.prediction["grid"] = v.grid_size;
    if (!v.converged) rep.warnings.push_back("correlation sum truncated before decay");
}

ExperimentReport spectral_report(const ExperimentConfig& c, const RandomSystem& system,
                                 const Observable& phi, PipelineOutput& out) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.kind = "spectral";
    rep.system = system.label();
    rep.observable = phi.describe();
    rep.params["grid"] = c.grid;
    const DiscretizedOperator op = annealed_operator(system, c.grid);
    const StationaryDensity h = stationary_density(op);
    const SpectralReport gap = spectral_gap(op, h);
    const VarianceEstimate gk = green_kubo_variance(system, phi, c.grid);
    const EigenDerivatives ev = variance_via_eigenvalue(system, phi, c.grid);
    record_variance(rep, gk);
    rep.prediction["lambda_second0"] = ev.lambda_second0;
    rep.prediction["lambda_prime0"] = ev.lambda_prime0;
    rep.estimate["density_residual"] = h.residual;
    rep.estimate["second_modulus"] = gap.second_modulus;
    rep.estimate["expansion_in_mean"] = expansion_in_mean(system);
    rep.discrepancy = discrepancy(gk.sigma2, ev.lambda_second0);
    const double tol = c.band.value_or(std::max(1e-3, 0.01 * std::abs(gk.sigma2)));
    rep.add_check("predictor_agreement", std::abs(gk.sigma2 - ev.lambda_second0), 0.0, tol,
                  "Green-Kubo sigma^2 = lambda''(0)");
    rep.add_check("density_residual", h.residual, 0.0, 1e-10, "P h = h");
    rep.add_check("second_modulus", gap.second_modulus, 0.0, 1.0 - 1e-9, "spectral gap");
    if (c.write_csv) out.csv.emplace_back("correlation", correlation_csv(gk));
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace

PipelineOutput execute(const ExperimentConfig& c) {
    PipelineOutput out;
    const RandomSystem system = c.build_system();
    const Observable phi = c.build_observable();
    if (c.kind == "spectral") {
        out.report = spectral_report(c, system, phi, out);
        return out;
    }
    SimulationPlan plan = make_plan(c, system, phi);
    auto variance = [&]() {
        const VarianceEstimate v = green_kubo_variance(system, phi, c.grid);
        if (c.write_csv) out.csv.emplace_back("correlation", correlation_csv(v));
        return v;
    };
    auto rate = [&]() {
        RateFunction r = rate_function(system, phi, c.grid);
        if (c.write_csv) out.csv.emplace_back("rate", rate_csv(r));
        return r;
    };
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    if (c.kind == "clt") {
        const VarianceEstimate v = variance();
        CltOptions o;
        if (!c.ladder.empty()) o.ladder = c.ladder;
        o.ladder = clipped(o.ladder, c.n);
        o.ks_replicas = c.aux_replicas;
        if (c.band) o.ks_band = *c.band;
        std::vector<double> samples;
        if (c.write_samples) o.samples_out = &samples;
        rep = clt_experiment(plan, v.sigma2, o);
        record_variance(rep, v);
        if (c.write_samples) {
            std::ostringstream os;
            write_samples_csv(os, samples);
            out.csv.emplace_back("samples", os.str());
        }
    } else if (c.kind == "ldp") {
        const RateFunction r = rate();
        LdpOptions o;
        o.ladder = c.ladder;
        o.quenched_seeds = c.omega_seeds;
        o.quenched_replicas = c.aux_replicas;
        if (c.band) o.band = *c.band;
        rep = ldp_experiment(plan, c.eps_list, r, o);
    } else if (c.kind == "local_limit") {
        const VarianceEstimate v = variance();
        LltOptions o;
        o.lo = c.interval[0];
        o.hi = c.interval[1];
        o.ladder = c.ladder;
        o.t_grid = c.t_grid;
        if (c.band) o.band = *c.band;
        rep = local_limit_experiment(plan, v.sigma2, o);
        record_variance(rep, v);
    } else if (c.kind == "borel_cantelli" || c.kind == "shrinking_target_clt") {
        const std::vector<double> density =
            plan.density.empty() ? stationary_cells(system, c.grid) : plan.density;
        const TargetSequence targets =
            TargetSequence::nested_balls(c.p, c.gamma, c.ball_constant, c.n, density);
        if (c.kind == "borel_cantelli") {
            BorelCantelliOptions o;
            if (c.band) o.band = *c.band;
            rep = borel_cantelli_experiment(plan, targets, o);
        } else {
            ShrinkingTargetOptions o;
            o.variance_replicas = c.aux_replicas;
            if (c.band) o.ks_band = *c.band;
            rep = shrinking_target_clt(plan, targets, o);
        }
        rep.params["p"] = c.p;
        rep.params["gamma"] = c.gamma;
        rep.params["C"] = c.ball_constant;
    } else if (c.kind == "erdos_renyi") {
        const RateFunction r = rate();
        ErdosRenyiOptions o;
        if (c.band) o.band = *c.band;
        rep = erdos_renyi_experiment(plan, c.alpha, c.n_list, r, o);
    } else if (c.kind == "quenched_clt") {
        const VarianceEstimate v = variance();
        DoubledOptions d;
        d.require_lebesgue = !c.diagnostic;
        const VarianceEstimate vh = doubled_variance_estimate(system, phi, c.doubled_grid, d);
        QuenchedCltOptions o;
        o.omega_seeds = c.omega_seeds;
        o.doubled_replicas = c.aux_replicas;
        o.cf_ladder = c.ladder;
        o.diagnostic = c.diagnostic;
        if (c.band) o.ks_band = *c.band;
        rep = quenched_clt_experiment(plan, v.sigma2, vh.sigma2, o);
        record_variance(rep, v);
        rep.params["doubled_grid"] = c.doubled_grid;
    } else if (c.kind == "concentration") {
        ConcentrationOptions o;
        if (!c.ladder.empty()) o.ladder = c.ladder;
        o.ladder = clipped(o.ladder, c.n);
        o.t_grid = c.t_grid;
        if (c.band) o.ratio_band = *c.band;
        rep = concentration_experiment(plan, o);
    } else if (c.kind == "martingale") {
        const VarianceEstimate v = variance();
        const CoboundaryResult cob = martingale_coboundary(system, phi, c.grid);
        MartingaleOptions o;
        if (c.band) o.band = *c.band;
        rep = martingale_experiment(plan, cob, v.sigma2, o);
        record_variance(rep, v);
    } else {
        throw ConfigError("experiment.kind: unsupported kind '" + c.kind + "'");
    }
    rep.params["grid"] = c.grid;
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report = std::move(rep);
    return out;
}

int run_command(const std::string& config_path, const RunOverrides& overrides, std::ostream& out,
                std::ostream& err) {
    ExperimentConfig config;
    PipelineOutput result;
    try {
        config = load_config(config_path);
        if (overrides.seed) config.master_seed = *overrides.seed;
        if (overrides.out_dir) config.out_dir = *overrides.out_dir;
        if (overrides.threads) config.threads = *overrides.threads;
        if (config.threads > 0) set_default_threads(config.threads);
        result = execute(config);
    } catch (const Error& e) {
        err << "error: " << e.what();
        if (!config.kind.empty()) err << " [experiment " << config.kind << "]";
        err << '\n';
        return kExitError;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }

    namespace fs = std::filesystem;
    try {
        fs::create_directories(config.out_dir);
        const fs::path base = fs::path(config.out_dir) / config.name;
        {
            std::ofstream f(base.string() + ".json");
            if (!f) throw ConfigError("cannot write " + base.string() + ".json");
            f << result.report.to_json().dump(2) << '\n';
        }
        for (const auto& [suffix, content] : result.csv) {
            std::ofstream f(base.string() + "_" + suffix + ".csv");
            if (!f) throw ConfigError("cannot write " + base.string() + "_" + suffix + ".csv");
            f << content;
        }
        out << config.kind << ": " << (result.report.passed() ? "PASS" : "FAIL") << " ("
            << base.string() << ".json)\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    for (const Check& c : result.report.checks) {
        if (!c.pass) {
            err << "band failure: " << c.name << " = " << c.value << " not in [" << c.lower << ", "
                << c.upper << "]\n";
        }
    }
    return result.report.passed() ? kExitPass : kExitBandFailure;
}

std::string list_builtins() {
    std::ostringstream os;
    os << "map families (system[].family):\n"
       << "  beta          params: beta (integer >= 2); x -> beta x mod 1\n"
       << "  custom        params: label, pieces [{lo, hi, slope, intercept}]; piecewise affine\n"
       << "  linear_mod1   params: beta (> 1), offset in [0,1); x -> beta x + offset mod 1\n"
       << "observable terms (observable[].kind):\n"
       << "  constant      coefficient\n"
       << "  cos           k, coefficient; coefficient cos(2 pi k x)\n"
       << "  indicator     lo, hi, coefficient; coefficient 1_[lo,hi)(x)\n"
       << "  monomial      degree, coefficient; coefficient x^degree\n"
       << "  sin           k, coefficient; coefficient sin(2 pi k x)\n"
       << "experiment kinds (experiment.kind):\n"
       << "  borel_cantelli        p, gamma, C: nested balls mu(B_j) = C j^-gamma; mean hit ratio\n"
       << "  clt                   ladder, ks_replicas: KS vs N(0, sigma^2), KS sqrt(n) ladder\n"
       << "  concentration         ladder, t_grid: Kantorovich distance of the empirical measure\n"
       << "  erdos_renyi           alpha, n_list: maximal windowed averages over l_n = log n / I(alpha)\n"
       << "  ldp                   eps, ladder, omega_seeds, quenched_replicas: tail rates vs c(eps)\n"
       << "  local_limit           interval, ladder, t_grid: sigma sqrt(n) P(S_n in I) vs |I| / sqrt(2 pi)\n"
       << "  martingale            (none): E[chi^2] of the martingale part vs sigma^2\n"
       << "  quenched_clt          omega_seeds, doubled_replicas, doubled_grid, ladder, diagnostic\n"
       << "  shrinking_target_clt  p, gamma, C, variance_replicas: centered hit counts over a_n vs N(0,1)\n"
       << "  spectral              band: stationary density, spectral gap, sigma^2 predictors\n"
       << "common experiment fields: n, replicas, initial {kind: stationary|lebesgue|point, x0},\n"
       << "  mode (annealed|quenched), omega_seed, band\n";
    return os.str();
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Random dynamical systems lab: spectral predictors and Monte Carlo checks", "rde"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    unsigned threads = 0;
    CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "Path to an rde-config v1 JSON file")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed, "Override master_seed");
    CLI::Option* out_opt = run->add_option("--out-dir", out_dir, "Override output.dir");
    CLI::Option* threads_opt =
        run->add_option("--threads", threads, "Worker threads (fallback: RDE_THREADS)");
    CLI::App* list = app.add_subcommand("list", "List built-in families, terms and experiments");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitPass : kExitError;
    }
    if (list->parsed()) {
        std::cout << list_builtins();
        return kExitPass;
    }
    RunOverrides o;
    if (*seed_opt) o.seed = seed;
    if (*out_opt) o.out_dir = out_dir;
    if (*threads_opt) o.threads = threads;
    return run_command(config_path, o, std::cout, std::cerr);
}

}  // namespace rde
