// Acceptance suite: one line per criterion, "criterion N: PASS|FAIL <details>".

#include "rde/cli.hpp"
#include "rde/config.hpp"
#include "rde/experiments.hpp"
#include "rde/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

using namespace rde;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        detail << (ok ? "" : "[x] ") << what << "; ";
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

const RandomSystem& doubling() {
    static const RandomSystem s({beta_map(2)}, {1.0});
    return s;
}

const RandomSystem& b23() {
    static const RandomSystem s({beta_map(2), beta_map(3)}, {0.5, 0.5});
    return s;
}

const Observable& cos1() {
    static const Observable phi = Observable::cosine(1);
    return phi;
}

SimulationPlan plan_for(const RandomSystem& s, long long n, long long replicas, std::uint64_t seed) {
    SimulationPlan p;
    p.system = &s;
    p.phi = cos1();
    p.n = n;
    p.replicas = replicas;
    p.master_seed = seed;
    return p;
}

void report_checks(Outcome& o, const ExperimentReport& r) {
    for (const Check& c : r.checks) {
        o.require(c.pass, c.name + " = " + fmt(c.value) + " in [" + fmt(c.lower) + ", " + fmt(c.upper) + "]");
    }
}

void criterion_1(Outcome& o) {
    for (int n : {64, 256, 1024}) {
        const auto t0 = std::chrono::steady_clock::now();
        const StationaryDensity h = stationary_density(annealed_operator(b23(), n));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double dev = 0.0;
        for (double v : h.values) dev = std::max(dev, std::abs(v - 1.0));
        o.require(h.residual < 1e-10 && dev < 1e-10 && secs < 1.0,
                  "N=" + std::to_string(n) + " max|h-1|=" + fmt(dev) + " residual=" + fmt(h.residual) +
                      " time=" + fmt(secs) + "s");
    }
}

void criterion_2(Outcome& o) {
    const double gk = green_kubo_variance(doubling(), cos1(), 1024).sigma2;
    const double ev = variance_via_eigenvalue(doubling(), cos1(), 1024).lambda_second0;
    o.require(std::abs(gk - 0.5) <= 1e-4, "green_kubo sigma2=" + fmt(gk));
    o.require(std::abs(ev - 0.5) <= 1e-3, "lambda''(0)=" + fmt(ev));
}

void criterion_3(Outcome& o) {
    const Observable cob = Observable::cosine(1) - Observable::cosine(2);
    const double gk = green_kubo_variance(doubling(), cob, 1024).sigma2;
    const double ev = variance_via_eigenvalue(doubling(), cob, 1024).lambda_second0;
    o.require(std::abs(gk) < 1e-6, "green_kubo sigma2=" + fmt(gk));
    o.require(std::abs(ev) < 1e-6, "lambda''(0)=" + fmt(ev));
}

void criterion_4(Outcome& o) {
    CltOptions c;
    c.ladder = {100, 1000, 10000};
    c.ks_replicas = 100000;
    const double s2 = green_kubo_variance(b23(), cos1()).sigma2;
    report_checks(o, clt_experiment(plan_for(b23(), 10000, 1000000, 4), s2, c));
}

void criterion_5(Outcome& o) {
    const RateFunction rate = rate_function(doubling(), cos1());
    const ExperimentReport r = ldp_experiment(plan_for(doubling(), 400, 1000000, 5), {0.05, 0.1}, rate);
    report_checks(o, r);
    const double c = rate.eval(0.05), quad = 0.05 * 0.05 / (2.0 * 0.5);
    o.require(std::abs(c - quad) <= 0.10 * quad, "c(0.05)=" + fmt(c) + " vs eps^2/(2 sigma^2)=" + fmt(quad));
}

void criterion_6(Outcome& o) {
    const RateFunction rate = rate_function(b23(), cos1());
    LdpOptions l;
    l.annealed = false;
    for (std::uint64_t s = 1; s <= 10; ++s) l.quenched_seeds.push_back(s);
    l.ladder = {100, 200, 400};
    l.quenched_replicas = 100000;
    const ExperimentReport r = ldp_experiment(plan_for(b23(), 400, 100000, 6), {0.05, 0.1}, rate, l);
    double worst = std::numeric_limits<double>::infinity();
    bool all = true;
    for (const Check& c : r.checks) {
        worst = std::min(worst, c.value);
        all = all && c.pass;
    }
    o.require(all && !r.checks.empty(),
              std::to_string(r.checks.size()) + " seed/eps pairs, min rate/c(eps)=" + fmt(worst) + " (>= 0.85)");
}

void criterion_7(Outcome& o) {
    const double s2 = green_kubo_variance(b23(), cos1()).sigma2;
    const double s2_hat = doubled_variance_estimate(b23(), cos1(), 128).sigma2;
    QuenchedCltOptions q;
    for (std::uint64_t s = 1; s <= 10; ++s) q.omega_seeds.push_back(s);
    const ExperimentReport r = quenched_clt_experiment(plan_for(b23(), 10000, 100000, 7), s2, s2_hat, q);
    for (const Check& c : r.checks) {
        if (c.name == "sigma2_hat_rel_error" || c.name == "quenched_ks_pass_fraction") {
            o.require(c.pass, c.name + " = " + fmt(c.value) + " in [" + fmt(c.lower) + ", " + fmt(c.upper) + "]");
        }
    }
}

void criterion_8(Outcome& o) {
    const TargetSequence t = TargetSequence::nested_balls(0.3, 0.5, 0.25, 100000, stationary_cells(b23()));
    SimulationPlan p = plan_for(b23(), 1, 1000, 8);
    const ExperimentReport a = borel_cantelli_experiment(p, t);
    o.require(a.passed(), "annealed mean ratio=" + fmt(a.estimate["mean_ratio"].get<double>()));
    p.mode = QuenchMode::Quenched;
    p.omega_seed = 8;
    const ExperimentReport q = borel_cantelli_experiment(p, t);
    o.require(q.passed(), "quenched mean ratio=" + fmt(q.estimate["mean_ratio"].get<double>()));
}

void criterion_9(Outcome& o) {
    const TargetSequence t = TargetSequence::nested_balls(0.3, 0.5, 0.25, 100000, stationary_cells(b23()));
    ShrinkingTargetOptions s;
    s.variance_replicas = 100000;
    report_checks(o, shrinking_target_clt(plan_for(b23(), 1, 10000, 9), t, s));
}

void criterion_10(Outcome& o) {
    const RateFunction rate = rate_function(doubling(), cos1());
    const ExperimentReport r =
        erdos_renyi_experiment(plan_for(doubling(), 1000000, 100, 10), 0.2, {10000, 100000, 1000000}, rate);
    std::string trend;
    for (const auto& row : r.estimate["ladder"]) trend += fmt(row["mean_over_alpha"].get<double>()) + " ";
    o.detail << "mean/alpha along n: " << trend << "; ";
    report_checks(o, r);
}

void criterion_11(Outcome& o) {
    const double s2 = green_kubo_variance(doubling(), cos1()).sigma2;
    const ExperimentReport r = local_limit_experiment(plan_for(doubling(), 10000, 10000000, 11), s2);
    o.detail << "scan max modulus=" << fmt(r.estimate["scan_max_modulus"].get<double>()) << "; ";
    report_checks(o, r);
}

void criterion_12(Outcome& o) {
    ConcentrationOptions c;
    c.ladder = {1000, 10000, 100000};
    report_checks(o, concentration_experiment(plan_for(b23(), 100000, 10000, 12), c));
}

void criterion_13(Outcome& o) {
    const double s2 = green_kubo_variance(doubling(), cos1(), 1024).sigma2;
    const CoboundaryResult cob = martingale_coboundary(doubling(), cos1(), 1024);
    report_checks(o, martingale_experiment(plan_for(doubling(), 1, 1000000, 13), cob, s2));
}

void criterion_14(Outcome& o) {
    const char* text = R"({
      "schema": "rde-config v1",
      "system": [{"family": "beta", "prob": 0.5, "params": {"beta": 2}},
                 {"family": "beta", "prob": 0.5, "params": {"beta": 3}}],
      "observable": [{"kind": "cos", "k": 1}, {"kind": "monomial", "degree": 2, "coefficient": 0.5}],
      "grid": 256,
      "master_seed": 14,
      "experiment": {"kind": "ldp", "n": 200, "replicas": 20000, "eps": [0.05], "omega_seeds": [3]}
    })";
    const ExperimentConfig cfg = parse_config_text(text, "determinism");
    auto run = [&](unsigned threads) {
        ExperimentConfig c = cfg;
        c.threads = threads;
        set_default_threads(threads);
        nlohmann::json j = execute(c).report.to_json();
        j.erase("wall_time");
        return j.dump(2);
    };
    const std::string a = run(1), b = run(1), c = run(3);
    o.require(a == b, "identical reports on re-run (" + std::to_string(a.size()) + " bytes)");
    o.require(a == c, "identical reports across thread counts");
    set_default_threads(0);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-14); default all")->check(CLI::Range(0, 14));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<void(Outcome&)>> criteria = {
        criterion_1, criterion_2,  criterion_3,  criterion_4,  criterion_5,  criterion_6,  criterion_7,
        criterion_8, criterion_9, criterion_10, criterion_11, criterion_12, criterion_13, criterion_14};
    bool all = true;
    for (int i = 1; i <= 14; ++i) {
        if (only != 0 && i != only) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[static_cast<std::size_t>(i - 1)](o);
        } catch (const std::exception& e) {
            o.require(false, std::string("error: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "criterion " << i << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail.str() << "("
                  << fmt(secs) << " s)" << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
