#include <catch_amalgamated.hpp>

#include "rde/error.hpp"
#include "rde/experiments.hpp"

#include <cmath>
#include <numbers>

using namespace rde;
using Catch::Approx;

namespace {

const RandomSystem& doubling() {
    static const RandomSystem s({beta_map(2)}, {1.0});
    return s;
}

const RandomSystem& b23() {
    static const RandomSystem s({beta_map(2), beta_map(3)}, {0.5, 0.5});
    return s;
}

SimulationPlan plan_for(const RandomSystem& s, long long n, long long replicas,
                        Observable phi = Observable::cosine(1)) {
    SimulationPlan p;
    p.system = &s;
    p.phi = std::move(phi);
    p.n = n;
    p.replicas = replicas;
    p.master_seed = 2024;
    return p;
}

nlohmann::json without_wall_time(const ExperimentReport& r) {
    nlohmann::json j = r.to_json();
    j.erase("wall_time");
    return j;
}

const Check& check_named(const ExperimentReport& r, const std::string& name) {
    for (const Check& c : r.checks) {
        if (c.name == name) return c;
    }
    FAIL("missing check " << name);
    return r.checks.front();
}

}  // namespace

TEST_CASE("report serialization", "[experiments]") {
    ExperimentReport r;
    r.kind = "clt";
    r.add_check("ks", 0.005, 0.0, 0.01, "KS -> 0");
    r.add_check("inf", std::numeric_limits<double>::infinity(), 0.0, 1.0);
    CHECK_FALSE(r.passed());
    const nlohmann::json j = r.to_json();
    CHECK(j["schema"] == kReportSchema);
    CHECK(j["passed"] == false);
    CHECK(j["checks"][0]["pass"] == true);
    CHECK(j["checks"][1]["value"] == "inf");
    CHECK(discrepancy(2.0, 1.0) == Approx(0.5));
    CHECK(discrepancy(0.0, 0.25) == Approx(0.25));
}

TEST_CASE("CLT experiment", "[experiments]") {
    const ExperimentReport r = clt_experiment(plan_for(b23(), 2000, 20000), 0.5, {{100, 1000}});
    CHECK(check_named(r, "ks").value < 0.02);
    CHECK(check_named(r, "variance_rel_error").pass);
    CHECK(r.estimate["ladder"].size() == 3);

    const Observable cob = Observable::cosine(1) - Observable::cosine(2);
    CHECK_THROWS_AS(clt_experiment(plan_for(doubling(), 100, 100, cob), 1e-9), DegenerateVarianceError);
    // with a wrong positive variance the bounded sums are far from Gaussian
    const ExperimentReport bad = clt_experiment(plan_for(doubling(), 1000, 2000, cob), 0.5, {{}});
    CHECK(check_named(bad, "ks").value > 0.2);
    CHECK_FALSE(bad.passed());
}

TEST_CASE("determinism of reports", "[experiments][property]") {
    const SimulationPlan p = plan_for(b23(), 300, 2000);
    const ExperimentReport a = clt_experiment(p, 0.5, {{30}});
    const ExperimentReport b = clt_experiment(p, 0.5, {{30}});
    CHECK(without_wall_time(a).dump() == without_wall_time(b).dump());
}

TEST_CASE("LDP experiment edge cases", "[experiments]") {
    const RateFunction rate = rate_function(doubling(), Observable::cosine(1), 256);
    const ExperimentReport r = ldp_experiment(plan_for(doubling(), 40, 20000), {0.0, 1.5}, rate);
    const nlohmann::json& rows = r.estimate["annealed"];
    bool saw_zero = false, saw_starved = false;
    for (const auto& row : rows) {
        if (row["eps"] == 0.0 && row["n"] == 40) {
            saw_zero = true;
            const double frac = row["exceedances"].get<double>() / 20000.0;
            CHECK(frac == Approx(0.5).margin(0.03));
            CHECK(row["rate_naive"].get<double>() < 0.02);
        }
        if (row["eps"] == 1.5) {
            saw_starved = true;
            CHECK(row["exceedances"] == 0);
            CHECK(row["one_sided"] == true);
        }
    }
    CHECK(saw_zero);
    CHECK(saw_starved);
    CHECK_FALSE(r.warnings.empty());
    // no checks are gated on eps = 0 (c = 0) or outside the domain
    CHECK(r.checks.empty());
}

TEST_CASE("local limit experiment", "[experiments]") {
    const SimulationPlan p = plan_for(doubling(), 400, 40000);
    LltOptions o;
    o.t_grid = {0.5, 1.0, 2.0};
    o.scan_grid = 128;
    o.ladder = {400};
    const ExperimentReport wide = local_limit_experiment(p, 0.5, o);
    CHECK(wide.prediction["limit"].get<double>() == Approx(0.2 / std::sqrt(2 * std::numbers::pi)));
    CHECK(check_named(wide, "llt_rel_error").value < 0.2);

    // shrinking the interval at fixed n drives the raw probability to zero
    double prev = 1.0;
    for (double half : {0.2, 0.05, 0.01, 0.0}) {
        LltOptions s = o;
        s.lo = -half;
        s.hi = half + 1e-9;
        const ExperimentReport r = local_limit_experiment(p, 0.5, s);
        const double hits = r.estimate["ladder"].back()["hits"].get<double>();
        CHECK(hits <= prev * 40000);
        prev = hits / 40000;
    }
    CHECK(prev < 0.01);

    const SimulationPlan lattice = plan_for(doubling(), 100, 100, Observable::indicator(0.0, 0.5));
    LltOptions lo = o;
    lo.t_grid = {2.0 * std::numbers::pi};
    lo.ladder = {100};
    CHECK_THROWS_AS(local_limit_experiment(lattice, 0.25, lo), PreconditionError);
}

TEST_CASE("target sequences", "[experiments]") {
    const std::vector<double> lebesgue(64, 1.0);
    const TargetSequence t = TargetSequence::nested_balls(0.3, 0.5, 0.5, 100, lebesgue);
    REQUIRE(t.size() == 100);
    for (std::size_t j = 0; j < t.size(); ++j) {
        CHECK(t.measure[j] == Approx(0.5 / std::sqrt(j + 1.0)).epsilon(1e-9));
        CHECK(t.hi[j] - t.lo[j] == Approx(t.measure[j]).epsilon(1e-9));
        if (j > 0) {
            CHECK(t.lo[j] >= t.lo[j - 1]);
            CHECK(t.hi[j] <= t.hi[j - 1]);
        }
    }
    // ball clipped at the boundary keeps its measure
    const TargetSequence edge = TargetSequence::nested_balls(0.05, 0.0, 0.5, 3, lebesgue);
    CHECK(edge.lo[0] == 0.0);
    CHECK(edge.measure[0] == Approx(0.5).epsilon(1e-9));
    CHECK_THROWS_AS(TargetSequence::nested_balls(0.3, 1.0, 0.5, 10, lebesgue), DomainError);
    CHECK_THROWS_AS(TargetSequence::nested_balls(0.3, 0.5, 1.5, 10, lebesgue), DomainError);
    CHECK(TargetSequence::whole_space(7).expected_hits() == 7.0);
}

TEST_CASE("Borel-Cantelli experiment", "[experiments]") {
    const ExperimentReport whole =
        borel_cantelli_experiment(plan_for(b23(), 1, 50), TargetSequence::whole_space(500));
    CHECK(whole.estimate["mean_ratio"] == 1.0);
    CHECK(whole.estimate["sd_ratio"].get<double>() < 1e-12);

    const std::vector<double> lebesgue(64, 1.0);
    const TargetSequence tiny = TargetSequence::nested_balls(0.3, 0.5, 0.01, 100, lebesgue);
    CHECK_THROWS_AS(borel_cantelli_experiment(plan_for(b23(), 1, 10), tiny), PreconditionError);

    const TargetSequence balls = TargetSequence::nested_balls(0.3, 0.5, 0.25, 20000, lebesgue);
    const ExperimentReport r = borel_cantelli_experiment(plan_for(b23(), 1, 400), balls);
    CHECK(r.estimate["mean_ratio"].get<double>() == Approx(1.0).margin(0.05));
}

TEST_CASE("shrinking-target CLT", "[experiments]") {
    const std::vector<double> lebesgue(64, 1.0);
    // a fixed target reduces to the CLT of the indicator: a_n^2 ~ n sigma^2
    const TargetSequence fixed = TargetSequence::nested_balls(0.3, 0.0, 0.25, 2000, lebesgue);
    const Observable ind = Observable::indicator(fixed.lo[0], fixed.hi[0]);
    const double s2 = green_kubo_variance(b23(), ind).sigma2;
    const ExperimentReport r = shrinking_target_clt(plan_for(b23(), 1, 4000), fixed);
    CHECK(r.estimate["a_n2"].get<double>() / 2000.0 == Approx(s2).epsilon(0.08));
    CHECK(check_named(r, "ks").value < 0.05);

    const TargetSequence tiny = TargetSequence::nested_balls(0.3, 0.5, 0.01, 50, lebesgue);
    CHECK_THROWS_AS(shrinking_target_clt(plan_for(b23(), 1, 200), tiny), StarvationError);
}

TEST_CASE("Erdos-Renyi window and guards", "[experiments]") {
    // e^10 = 22026.47: the floor switches between these two n
    CHECK(erdos_renyi_window(22026, 0.5) == 19);
    CHECK(erdos_renyi_window(22027, 0.5) == 20);
    CHECK_THROWS_AS(erdos_renyi_window(100, 0.0), DomainError);
    const RateFunction rate = rate_function(doubling(), Observable::cosine(1), 256);
    const SimulationPlan p = plan_for(doubling(), 1000, 10);
    CHECK_THROWS_AS(erdos_renyi_experiment(p, rate.eps_max() + 0.01, {1000}, rate), DomainError);
    CHECK_THROWS_AS(erdos_renyi_experiment(p, 0.01, {1000}, rate), PreconditionError);
    const ExperimentReport r = erdos_renyi_experiment(p, 0.3, {2000, 20000}, rate);
    CHECK(r.estimate["ladder"].size() == 2);
    for (const auto& row : r.estimate["ladder"]) CHECK(row["mean_max"].get<double>() <= 1.0);
}

TEST_CASE("quenched CLT", "[experiments]") {
    const SimulationPlan p = plan_for(doubling(), 500, 3000);
    QuenchedCltOptions o;
    o.omega_seeds = {1, 2, 3};
    o.cf_ladder = {50, 500};
    o.ks_band = 0.05;
    const ExperimentReport r = quenched_clt_experiment(p, 0.5, 1.0, o);
    // a single map leaves nothing to quench: identical KS for every seed
    const auto& rows = r.estimate["per_seed"];
    REQUIRE(rows.size() == 3);
    CHECK(rows[0]["ks"] == rows[1]["ks"]);
    CHECK(rows[1]["ks"] == rows[2]["ks"]);
    CHECK(check_named(r, "sigma2_hat_rel_error").value < 1e-12);

    const RandomSystem lin({linear_mod1(2.5, 0.3)}, {1.0});
    CHECK_THROWS_AS(quenched_clt_experiment(plan_for(lin, 100, 100), 0.5, 1.0, o), PreconditionError);
}

TEST_CASE("concentration experiment", "[experiments]") {
    SimulationPlan p = plan_for(b23(), 1, 5);
    p.initial = InitialLaw::point(0.2);
    ConcentrationOptions o;
    o.ladder = {1};
    o.t_grid = {0.1};
    const ExperimentReport single = concentration_experiment(p, o);
    // one atom: kappa(delta_x0, Lebesgue) = (x0^2 + (1 - x0)^2) / 2
    const double k = (0.04 + 0.64) / 2.0;
    CHECK(single.estimate["ladder"][0]["mean_kappa"].get<double>() == Approx(k).epsilon(1e-9));

    ConcentrationOptions c;
    c.ladder = {200, 2000};
    const ExperimentReport r = concentration_experiment(plan_for(b23(), 2000, 2000), c);
    double prev = 1.0;
    for (const auto& row : r.estimate["tail"]) {
        const double pr = row["probability"].get<double>();
        CHECK(pr <= prev);
        prev = pr;
    }
    CHECK(check_named(r, "mean_kappa_sqrt_n_ratio").value < 2.0);
}

TEST_CASE("martingale experiment", "[experiments]") {
    const CoboundaryResult cob = martingale_coboundary(doubling(), Observable::monomial(1), 512);
    const ExperimentReport r =
        martingale_experiment(plan_for(doubling(), 1, 200000, Observable::monomial(1)), cob, 0.25);
    CHECK(check_named(r, "coboundary_residual").pass);
    CHECK(r.estimate["chi2_mean"].get<double>() == Approx(0.25).epsilon(0.02));
}
