#include "rde/experiments.hpp"

#include "rde/error.hpp"
#include "rde/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <sstream>

namespace rde {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kBlock = 1024;

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

const char* initial_name(InitialKind k) {
    switch (k) {
        case InitialKind::Stationary:
            return "stationary";
        case InitialKind::Lebesgue:
            return "lebesgue";
        case InitialKind::Point:
            return "point";
    }
    return "?";
}

ExperimentReport base_report(const char* kind, const SimulationPlan& plan) {
    plan.validate();
    ExperimentReport r;
    r.kind = kind;
    r.system = plan.system->label();
    r.observable = plan.phi.describe();
    r.n = plan.n;
    r.replicas = plan.replicas;
    r.params["initial"] = initial_name(plan.initial.kind);
    if (plan.initial.kind == InitialKind::Point) r.params["x0"] = plan.initial.x0;
    r.params["mode"] = plan.mode == QuenchMode::Quenched ? "quenched" : "annealed";
    r.seeds["master_seed"] = plan.master_seed;
    if (plan.mode == QuenchMode::Quenched) r.seeds["omega_seed"] = plan.omega_seed;
    return r;
}

std::vector<long long> with_top(std::vector<long long> ladder, long long n) {
    ladder.push_back(n);
    std::sort(ladder.begin(), ladder.end());
    ladder.erase(std::unique(ladder.begin(), ladder.end()), ladder.end());
    for (long long m : ladder) {
        if (m < 1 || m > n) throw InvalidArgument("ladder entries must lie in [1, n]");
    }
    return ladder;
}

std::vector<long long> default_ladder(long long n, long long d1, long long d2) {
    std::vector<long long> l;
    for (long long m : {n / d1, n / d2, n}) {
        if (m >= 1) l.push_back(m);
    }
    return with_top(l, n);
}

double max_over_min(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

/// Counts of replicas with S_m > m eps for each (ladder m, eps).
std::vector<std::vector<long long>> exceedance_counts(const SimulationPlan& plan,
                                                      const std::vector<long long>& ladder,
                                                      const std::vector<double>& eps) {
    const OrbitEngine engine(plan);
    const auto replicas = static_cast<std::size_t>(plan.replicas);
    const std::size_t blocks = (replicas + kBlock - 1) / kBlock;
    const std::size_t cells = ladder.size() * eps.size();
    std::vector<long long> per_block(blocks * cells, 0);
    const FastObservable& phi = engine.phi();
    parallel_blocks(
        replicas, kBlock,
        [&](std::size_t b, std::size_t lo, std::size_t hi) {
            long long* out = per_block.data() + b * cells;
            for (std::size_t r = lo; r < hi; ++r) {
                double s = 0.0;
                std::size_t c = 0;
                engine.run(r, ladder.back(), [&](long long j, std::uint64_t u) {
                    s += phi(u);
                    if (ladder[c] == j + 1) {
                        const double m = static_cast<double>(j + 1);
                        for (std::size_t e = 0; e < eps.size(); ++e) {
                            if (s > m * eps[e]) ++out[c * eps.size() + e];
                        }
                        ++c;
                    }
                });
            }
        },
        engine.threads());
    std::vector<std::vector<long long>> counts(ladder.size(), std::vector<long long>(eps.size()));
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t c = 0; c < ladder.size(); ++c) {
            for (std::size_t e = 0; e < eps.size(); ++e) {
                counts[c][e] += per_block[b * cells + c * eps.size() + e];
            }
        }
    }
    return counts;
}

struct TailRate {
    double naive = 0.0;
    double corrected = 0.0;
    bool starved = false;  // naive and corrected are lower bounds
};

TailRate tail_rate(long long count, long long replicas, long long m, double prefactor_log) {
    TailRate t;
    const double md = static_cast<double>(m);
    double p = static_cast<double>(count) / static_cast<double>(replicas);
    if (count == 0) {
        t.starved = true;
        p = 3.0 / static_cast<double>(replicas);  // 95% upper bound on the probability
    }
    t.naive = -std::log(p) / md;
    t.corrected = -(std::log(p) - prefactor_log) / md;
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentReport clt_experiment(const SimulationPlan& plan, double sigma2_pred,
                                const CltOptions& options) {
    const auto t0 = Clock::now();
    if (!(sigma2_pred > kDegenerateSigma2)) {
        std::ostringstream os;
        os << "degenerate variance: sigma^2 = " << sigma2_pred
           << " (coboundary observable, S_n stays bounded)";
        throw DegenerateVarianceError(os.str());
    }
    ExperimentReport rep = base_report("clt", plan);
    const std::vector<long long> ladder = with_top(options.ladder, plan.n);
    rep.params["ladder"] = ladder;
    rep.params["ks_replicas"] = options.ks_replicas;
    rep.prediction["sigma2"] = sigma2_pred;

    const auto samples = birkhoff_checkpoints(plan, ladder);
    nlohmann::json per_n = nlohmann::json::array();
    std::vector<double> scaled;
    for (std::size_t c = 0; c < ladder.size(); ++c) {
        const EmpiricalLaw law(samples[c]);
        const double ks = law.ks_vs_normal(sigma2_pred);
        const double ks_scaled = ks * std::sqrt(static_cast<double>(ladder[c]));
        scaled.push_back(ks_scaled);
        per_n.push_back({{"n", ladder[c]},
                         {"ks", ks},
                         {"ks_sqrt_n", ks_scaled},
                         {"mean", law.mean()},
                         {"variance", law.variance()}});
    }
    const EmpiricalLaw top(samples.back());
    double ks_top = top.ks_vs_normal(sigma2_pred);
    if (options.ks_replicas > 0 && options.ks_replicas < plan.replicas) {
        std::vector<double> head(samples.back().begin(),
                                 samples.back().begin() + options.ks_replicas);
        ks_top = EmpiricalLaw(std::move(head)).ks_vs_normal(sigma2_pred);
    }
    if (options.samples_out) *options.samples_out = samples.back();
    rep.estimate["ladder"] = per_n;
    rep.estimate["ks"] = ks_top;
    rep.estimate["variance"] = top.variance();
    rep.estimate["mean"] = top.mean();
    rep.discrepancy = discrepancy(sigma2_pred, top.variance());

    rep.add_check("ks", ks_top, 0.0, options.ks_band, "KS -> 0 (CLT)");
    rep.add_check("variance_rel_error", discrepancy(sigma2_pred, top.variance()), 0.0,
                  options.variance_band, "Var(S_n/sqrt n) -> sigma^2");
    if (ladder.size() > 1) {
        const double ratio = max_over_min(scaled);
        rep.estimate["be_ratio"] = json_number(ratio);
        rep.add_check("berry_esseen_ratio", ratio, 1.0, options.be_ratio_band,
                      "KS sqrt(n) bounded (Berry-Esseen)");
    }
    if (top.variance() < 0.1 * sigma2_pred) {
        rep.warnings.push_back("sample variance far below prediction: degenerate observable?");
    }
    rep.wall_time = elapsed(t0);
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport ldp_experiment(const SimulationPlan& plan, const std::vector<double>& eps_list,
                                const RateFunction& rate, const LdpOptions& options) {
    const auto t0 = Clock::now();
    if (eps_list.empty()) throw InvalidArgument("ldp experiment needs eps values");
    ExperimentReport rep = base_report("ldp", plan);
    const std::vector<long long> ladder =
        options.ladder.empty() ? default_ladder(plan.n, 4, 2) : with_top(options.ladder, plan.n);
    rep.params["ladder"] = ladder;
    rep.params["eps"] = eps_list;

    struct Pred {
        bool known = false;
        double c = 0.0;
        double theta = 0.0;
        double curvature = 0.0;
    };
    std::vector<Pred> preds(eps_list.size());
    nlohmann::json pj = nlohmann::json::array();
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        try {
            preds[e].c = rate.eval(eps_list[e]);
            preds[e].theta = rate.argmax(eps_list[e]);
            preds[e].curvature = rate.second_derivative(preds[e].theta);
            preds[e].known = true;
            pj.push_back({{"eps", eps_list[e]}, {"rate", preds[e].c}, {"theta", preds[e].theta}});
        } catch (const DomainError&) {
            pj.push_back({{"eps", eps_list[e]}, {"rate", nullptr}});
            std::ostringstream os;
            os << "eps=" << eps_list[e] << " outside the rate-function domain; no prediction";
            rep.warnings.push_back(os.str());
        }
    }
    rep.prediction["rates"] = pj;

    auto prefactor = [&](std::size_t e, long long m) {
        if (!preds[e].known) return 0.0;
        const double l = preds[e].theta *
                         std::sqrt(std::max(0.0, preds[e].curvature) * static_cast<double>(m));
        return log_mills_scaled(l);
    };

    double worst = 0.0;
    if (options.annealed) {
        const auto counts = exceedance_counts(plan, ladder, eps_list);
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t c = 0; c < ladder.size(); ++c) {
            for (std::size_t e = 0; e < eps_list.size(); ++e) {
                const TailRate t =
                    tail_rate(counts[c][e], plan.replicas, ladder[c], prefactor(e, ladder[c]));
                rows.push_back({{"n", ladder[c]},
                                {"eps", eps_list[e]},
                                {"exceedances", counts[c][e]},
                                {"rate_naive", t.naive},
                                {"rate", t.corrected},
                                {"one_sided", t.starved}});
                if (c + 1 != ladder.size()) continue;
                if (t.starved) {
                    std::ostringstream os;
                    os << "eps=" << eps_list[e] << ": zero exceedances at n=" << ladder[c]
                       << "; rate >= " << t.naive;
                    rep.warnings.push_back(os.str());
                }
                if (!preds[e].known || !(preds[e].c > 1e-9)) continue;
                const double rel = t.starved ? std::numeric_limits<double>::infinity()
                                             : discrepancy(preds[e].c, t.corrected);
                worst = std::max(worst, rel);
                std::ostringstream name;
                name << "rate_rel_error[eps=" << eps_list[e] << "]";
                rep.add_check(name.str(), rel, 0.0, options.band, "-(1/n) log P(S_n > n eps) -> c(eps)");
            }
        }
        rep.estimate["annealed"] = rows;
    }

    if (!options.quenched_seeds.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        SimulationPlan qp = plan;
        qp.mode = QuenchMode::Quenched;
        if (options.quenched_replicas > 0) qp.replicas = options.quenched_replicas;
        const std::vector<long long> top{ladder.back()};
        for (std::uint64_t seed : options.quenched_seeds) {
            qp.omega_seed = seed;
            const auto counts = exceedance_counts(qp, top, eps_list);
            for (std::size_t e = 0; e < eps_list.size(); ++e) {
                const TailRate t = tail_rate(counts[0][e], qp.replicas, top[0], 0.0);
                rows.push_back({{"omega_seed", seed},
                                {"eps", eps_list[e]},
                                {"exceedances", counts[0][e]},
                                {"rate_naive", t.naive},
                                {"one_sided", t.starved}});
                if (!preds[e].known || !(preds[e].c > 1e-9)) continue;
                std::ostringstream name;
                name << "quenched_rate_over_c[seed=" << seed << ",eps=" << eps_list[e] << "]";
                rep.add_check(name.str(), t.naive / preds[e].c, 1.0 - options.quenched_slack,
                              std::numeric_limits<double>::infinity(),
                              "limsup (1/n) log nu(S_n > n eps) <= -c(eps)");
            }
        }
        rep.estimate["quenched"] = rows;
        rep.seeds["omega_seeds"] = options.quenched_seeds;
        rep.params["quenched_replicas"] = qp.replicas;
    }
    rep.discrepancy = worst;
    rep.wall_time = elapsed(t0);
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport local_limit_experiment(const SimulationPlan& plan, double sigma2_pred,
                                        const LltOptions& options) {
    const auto t0 = Clock::now();
    if (!(sigma2_pred > kDegenerateSigma2)) throw DegenerateVarianceError("sigma^2 is degenerate");
    if (!(options.hi > options.lo)) throw InvalidArgument("interval must have hi > lo");
    ExperimentReport rep = base_report("local_limit", plan);
    const std::vector<long long> ladder = options.ladder.empty()
                                              ? default_ladder(plan.n, 100, 10)
                                              : with_top(options.ladder, plan.n);
    rep.params["interval"] = {options.lo, options.hi};
    rep.params["ladder"] = ladder;

    const std::vector<double> grid = options.t_grid.empty() ? default_t_grid() : options.t_grid;
    const auto scan = aperiodicity_scan(*plan.system, plan.phi, grid, options.scan_grid);
    double worst_modulus = 0.0;
    double worst_t = 0.0;
    for (const AperiodicityPoint& p : scan) {
        if (p.modulus > worst_modulus) {
            worst_modulus = p.modulus;
            worst_t = p.t;
        }
    }
    rep.estimate["scan_max_modulus"] = worst_modulus;
    rep.estimate["scan_argmax_t"] = worst_t;
    if (!scan_is_clean(scan)) {
        std::ostringstream os;
        os << "aperiodicity scan flagged t=" << worst_t << " (modulus " << worst_modulus
           << "): lattice observable, local limit experiment refused";
        if (options.require_clean_scan) throw PreconditionError(os.str());
        rep.warnings.push_back(os.str());
    }

    const double width = options.hi - options.lo;
    const double target = width / std::sqrt(2.0 * std::numbers::pi);
    rep.prediction["limit"] = target;

    const OrbitEngine engine(plan);
    const auto replicas = static_cast<std::size_t>(plan.replicas);
    const std::size_t blocks = (replicas + kBlock - 1) / kBlock;
    std::vector<long long> per_block(blocks * ladder.size(), 0);
    const FastObservable& phi = engine.phi();
    parallel_blocks(
        replicas, kBlock,
        [&](std::size_t b, std::size_t lo, std::size_t hi) {
            long long* out = per_block.data() + b * ladder.size();
            for (std::size_t r = lo; r < hi; ++r) {
                double s = 0.0;
                std::size_t c = 0;
                engine.run(r, ladder.back(), [&](long long j, std::uint64_t u) {
                    s += phi(u);
                    if (ladder[c] == j + 1) {
                        if (s >= options.lo && s <= options.hi) ++out[c];
                        ++c;
                    }
                });
            }
        },
        engine.threads());
    nlohmann::json rows = nlohmann::json::array();
    double est_top = 0.0;
    for (std::size_t c = 0; c < ladder.size(); ++c) {
        long long hits = 0;
        for (std::size_t b = 0; b < blocks; ++b) hits += per_block[b * ladder.size() + c];
        const double est = std::sqrt(sigma2_pred * static_cast<double>(ladder[c])) *
                           static_cast<double>(hits) / static_cast<double>(plan.replicas);
        rows.push_back({{"n", ladder[c]}, {"hits", hits}, {"estimate", est}});
        if (c + 1 == ladder.size()) {
            est_top = est;
            if (hits == 0) rep.warnings.push_back("zero hits at the top n: starved estimate");
        }
    }
    rep.estimate["ladder"] = rows;
    rep.estimate["value"] = est_top;
    rep.discrepancy = discrepancy(target, est_top);
    rep.add_check("llt_rel_error", rep.discrepancy, 0.0, options.band,
                  "sigma sqrt(n) P(S_n in I) -> |I| / sqrt(2 pi)");
    rep.wall_time = elapsed(t0);
    return rep;
}

// ---------------------------------------------------------------------------

double TargetSequence::expected_hits() const {
    return std::accumulate(measure.begin(), measure.end(), 0.0);
}

TargetSequence TargetSequence::nested_balls(double p, double gamma, double c, long long n,
                                            std::span<const double> density) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("ball center must lie in [0,1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0,1)");
    if (!(c > 0.0 && c <= 1.0)) throw DomainError("ball constant must lie in (0,1]");
    if (n < 1) throw InvalidArgument("need at least one target");
    if (density.empty()) throw InvalidArgument("nested balls need a density");
    const std::size_t cells = density.size();
    std::vector<double> cum(cells + 1, 0.0);
    for (std::size_t i = 0; i < cells; ++i) cum[i + 1] = cum[i] + density[i];
    for (double& v : cum) v /= cum[cells];
    auto cdf = [&](double x) {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        const double s = x * static_cast<double>(cells);
        const auto i = std::min(static_cast<std::size_t>(s), cells - 1);
        return cum[i] + (cum[i + 1] - cum[i]) * (s - static_cast<double>(i));
    };
    auto mass = [&](double r) { return cdf(p + r) - cdf(p - r); };

    TargetSequence t;
    t.lo.resize(static_cast<std::size_t>(n));
    t.hi.resize(static_cast<std::size_t>(n));
    t.measure.resize(static_cast<std::size_t>(n));
    const double r_max = std::max(p, 1.0 - p);
    double r_prev = r_max;
    for (long long j = 1; j <= n; ++j) {
        const double goal = c * std::pow(static_cast<double>(j), -gamma);
        // nested: radius is nonincreasing in j
        double a = 0.0, b = r_prev;
        for (int it = 0; it < 100 && b - a > 1e-16; ++it) {
            const double mid = 0.5 * (a + b);
            (mass(mid) < goal ? a : b) = mid;
        }
        const double r = b;
        r_prev = r;
        const auto k = static_cast<std::size_t>(j - 1);
        t.lo[k] = std::max(0.0, p - r);
        t.hi[k] = std::min(1.0, p + r);
        t.measure[k] = mass(r);
    }
    return t;
}

TargetSequence TargetSequence::whole_space(long long n) {
    if (n < 1) throw InvalidArgument("need at least one target");
    TargetSequence t;
    t.lo.assign(static_cast<std::size_t>(n), 0.0);
    t.hi.assign(static_cast<std::size_t>(n), 1.0);
    t.measure.assign(static_cast<std::size_t>(n), 1.0);
    return t;
}

namespace {

struct FixedTargets {
    std::vector<std::uint64_t> lo;
    std::vector<std::uint64_t> hi;
    std::vector<std::uint8_t> to_end;
    std::vector<std::uint8_t> empty;

    explicit FixedTargets(const TargetSequence& t) {
        const std::size_t n = t.size();
        lo.resize(n);
        hi.resize(n);
        to_end.assign(n, 0);
        empty.assign(n, 0);
        for (std::size_t j = 0; j < n; ++j) {
            if (!fixed_lower_bound(t.lo[j], lo[j])) empty[j] = 1;
            if (t.hi[j] >= 1.0) {
                to_end[j] = 1;
            } else if (!fixed_lower_bound(t.hi[j], hi[j]) || hi[j] <= lo[j]) {
                empty[j] = 1;
            }
        }
    }

    bool hit(std::size_t j, std::uint64_t u) const {
        return !empty[j] && u >= lo[j] && (to_end[j] || u < hi[j]);
    }
};

void validate_targets(const TargetSequence& t) {
    if (t.size() == 0 || t.hi.size() != t.size() || t.measure.size() != t.size()) {
        throw InvalidArgument("malformed target sequence");
    }
}

/// Hit counts sum_{j=1..n} 1_{B_j}(x_j) per replica.
std::vector<double> hit_counts(const SimulationPlan& plan, const TargetSequence& targets) {
    SimulationPlan p = plan;
    p.n = static_cast<long long>(targets.size());
    const OrbitEngine engine(p);
    const FixedTargets fixed(targets);
    std::vector<double> out(static_cast<std::size_t>(p.replicas));
    parallel_for(
        out.size(),
        [&](std::size_t r) {
            long long hits = 0;
            engine.run(r, p.n + 1, [&](long long j, std::uint64_t u) {
                if (j >= 1 && fixed.hit(static_cast<std::size_t>(j - 1), u)) ++hits;
            });
            out[r] = static_cast<double>(hits);
        },
        engine.threads());
    return out;
}

}  // namespace

ExperimentReport borel_cantelli_experiment(const SimulationPlan& plan,
                                           const TargetSequence& targets,
                                           const BorelCantelliOptions& options) {
    const auto t0 = Clock::now();
    validate_targets(targets);
    SimulationPlan p = plan;
    p.n = static_cast<long long>(targets.size());
    ExperimentReport rep = base_report("borel_cantelli", p);
    const double e_n = targets.expected_hits();
    rep.prediction["expected_hits"] = e_n;
    rep.prediction["ratio"] = 1.0;
    if (e_n < options.min_expected) {
        std::ostringstream os;
        os << "E_n = " << e_n << " < " << options.min_expected << ": targets too small for n";
        throw PreconditionError(os.str());
    }
    const std::vector<double> hits = hit_counts(p, targets);
    std::vector<double> ratio(hits.size());
    std::transform(hits.begin(), hits.end(), ratio.begin(), [&](double h) { return h / e_n; });
    const EmpiricalLaw law(ratio);
    rep.estimate["mean_ratio"] = law.mean();
    rep.estimate["sd_ratio"] = std::sqrt(law.variance());
    rep.estimate["min_ratio"] = law.sorted().front();
    rep.estimate["max_ratio"] = law.sorted().back();
    rep.discrepancy = discrepancy(1.0, law.mean());
    rep.add_check("mean_ratio", law.mean(), 1.0 - options.band, 1.0 + options.band,
                  "sum_j 1_{B_j}(x_j) / E_n -> 1");
    rep.wall_time = elapsed(t0);
    return rep;
}

ExperimentReport shrinking_target_clt(const SimulationPlan& plan, const TargetSequence& targets,
                                      const ShrinkingTargetOptions& options) {
    const auto t0 = Clock::now();
    validate_targets(targets);
    SimulationPlan p = plan;
    p.n = static_cast<long long>(targets.size());
    ExperimentReport rep = base_report("shrinking_target_clt", p);
    const double e_n = targets.expected_hits();
    rep.prediction["expected_hits"] = e_n;
    rep.prediction["limit"] = "N(0,1)";

    SimulationPlan batch_a = p;
    batch_a.master_seed = derived_seed(p.master_seed, Purpose::Aux);
    if (options.variance_replicas > 0) batch_a.replicas = options.variance_replicas;
    rep.seeds["variance_batch_seed"] = batch_a.master_seed;
    rep.params["variance_replicas"] = batch_a.replicas;
    const std::vector<double> a_hits = hit_counts(batch_a, targets);
    double a2 = 0.0;
    for (double h : a_hits) a2 += (h - e_n) * (h - e_n);
    a2 /= static_cast<double>(a_hits.size());
    rep.estimate["a_n2"] = a2;
    rep.estimate["a_n2_over_E_n"] = a2 / e_n;
    if (a2 < options.min_variance) {
        std::ostringstream os;
        os << "a_n^2 = " << a2 << " < " << options.min_variance << ": statistic not yet Gaussian";
        throw StarvationError(os.str());
    }
    const std::vector<double> hits = hit_counts(p, targets);
    std::vector<double> z(hits.size());
    const double a = std::sqrt(a2);
    std::transform(hits.begin(), hits.end(), z.begin(), [&](double h) { return (h - e_n) / a; });
    const EmpiricalLaw law(z);
    const double ks = law.ks_vs_normal(1.0);
    rep.estimate["ks"] = ks;
    rep.estimate["mean"] = law.mean();
    rep.estimate["variance"] = law.variance();
    rep.discrepancy = discrepancy(1.0, law.variance());
    rep.add_check("ks", ks, 0.0, options.ks_band, "sum (1_{B_j} - mu(B_j)) / a_n -> N(0,1)");
    rep.add_check("a_n2_over_E_n", a2 / e_n, options.ratio_lower, options.ratio_upper,
                  "liminf a_n^2 / E_n >= 1");
    rep.wall_time = elapsed(t0);
    return rep;
}

// ---------------------------------------------------------------------------

long long erdos_renyi_window(long long n, double rate_at_alpha) {
    if (n < 2) throw InvalidArgument("Erdos-Renyi needs n >= 2");
    if (!(rate_at_alpha > 0.0)) throw DomainError("I(alpha) must be positive");
    return static_cast<long long>(std::floor(std::log(static_cast<double>(n)) / rate_at_alpha));
}

ExperimentReport erdos_renyi_experiment(const SimulationPlan& plan, double alpha,
                                        const std::vector<long long>& n_list,
                                        const RateFunction& rate,
                                        const ErdosRenyiOptions& options) {
    const auto t0 = Clock::now();
    if (n_list.empty()) throw InvalidArgument("Erdos-Renyi needs an n list");
    if (alpha >= rate.eps_max()) {
        std::ostringstream os;
        os << "alpha=" << alpha << " is outside the rate-function domain (eps_max "
           << rate.eps_max() << ")";
        throw DomainError(os.str());
    }
    const double i_alpha = rate.eval(alpha);
    std::vector<long long> ns = n_list;
    std::sort(ns.begin(), ns.end());
    std::vector<long long> windows;
    for (long long m : ns) {
        const long long l = erdos_renyi_window(m, i_alpha);
        if (l < 1) throw DomainError("window length l_n < 1");
        if (l > m / 2) {
            std::ostringstream os;
            os << "l_n = " << l << " > n/2 for n=" << m << ": alpha too close to the mean";
            throw PreconditionError(os.str());
        }
        windows.push_back(l);
    }
    SimulationPlan p = plan;
    p.n = ns.back();
    ExperimentReport rep = base_report("erdos_renyi", p);
    rep.params["alpha"] = alpha;
    rep.params["n_list"] = ns;
    rep.prediction["alpha"] = alpha;
    rep.prediction["I_alpha"] = i_alpha;
    rep.prediction["windows"] = windows;

    const OrbitEngine engine(p);
    const FastObservable& phi = engine.phi();
    const auto replicas = static_cast<std::size_t>(p.replicas);
    std::vector<double> maxima(replicas * ns.size());
    parallel_for(
        replicas,
        [&](std::size_t r) {
            std::vector<double> prefix(static_cast<std::size_t>(p.n) + 1, 0.0);
            engine.run(r, p.n, [&](long long j, std::uint64_t u) {
                prefix[static_cast<std::size_t>(j) + 1] =
                    prefix[static_cast<std::size_t>(j)] + phi(u);
            });
            for (std::size_t k = 0; k < ns.size(); ++k) {
                const auto l = static_cast<std::size_t>(windows[k]);
                const auto last = static_cast<std::size_t>(ns[k]) - l;
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t m = 0; m <= last; ++m) {
                    best = std::max(best, prefix[m + l] - prefix[m]);
                }
                maxima[r * ns.size() + k] = best / static_cast<double>(l);
            }
        },
        engine.threads());

    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> means;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        std::vector<double> v(replicas);
        for (std::size_t r = 0; r < replicas; ++r) v[r] = maxima[r * ns.size() + k];
        const EmpiricalLaw law(v);
        means.push_back(law.mean());
        rows.push_back({{"n", ns[k]},
                        {"l_n", windows[k]},
                        {"mean_max", law.mean()},
                        {"sd_max", std::sqrt(law.variance())},
                        {"mean_over_alpha", law.mean() / alpha}});
    }
    rep.estimate["ladder"] = rows;
    int violations = 0;
    for (std::size_t k = 1; k < means.size(); ++k) {
        if (std::abs(means[k] - alpha) >= std::abs(means[k - 1] - alpha)) ++violations;
    }
    rep.discrepancy = discrepancy(alpha, means.back());
    rep.add_check("monotone_approach_violations", violations, 0.0, 0.0,
                  "|mean max - alpha| decreases along n_list");
    rep.add_check("mean_over_alpha", means.back() / alpha, 1.0 - options.band,
                  1.0 + options.band, "max windowed average -> alpha");
    rep.wall_time = elapsed(t0);
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport quenched_clt_experiment(const SimulationPlan& plan, double sigma2_pred,
                                         double sigma2_hat_pred,
                                         const QuenchedCltOptions& options) {
    const auto t0 = Clock::now();
    if (!(sigma2_pred > kDegenerateSigma2)) throw DegenerateVarianceError("sigma^2 is degenerate");
    if (options.omega_seeds.empty()) throw InvalidArgument("quenched CLT needs omega seeds");
    if (!options.diagnostic && !plan.system->preserves_lebesgue()) {
        throw PreconditionError(
            "quenched CLT needs every map to preserve Lebesgue measure (use diagnostic mode)");
    }
    ExperimentReport rep = base_report("quenched_clt", plan);
    rep.params["mode"] = "quenched";
    rep.params["diagnostic"] = options.diagnostic;
    rep.seeds["omega_seeds"] = options.omega_seeds;
    rep.prediction["sigma2"] = sigma2_pred;
    rep.prediction["sigma2_hat"] = sigma2_hat_pred;
    const double ratio = sigma2_hat_pred / sigma2_pred;
    rep.estimate["sigma2_hat_over_sigma2"] = ratio;
    if (!options.diagnostic) {
        rep.add_check("sigma2_hat_rel_error", discrepancy(2.0 * sigma2_pred, sigma2_hat_pred), 0.0,
                      options.sigma_hat_band, "sigma_hat^2 = 2 sigma^2");
    }

    const std::vector<long long> ladder = options.cf_ladder.empty()
                                              ? default_ladder(plan.n, 100, 10)
                                              : with_top(options.cf_ladder, plan.n);
    rep.params["cf_ladder"] = ladder;
    rep.params["cf_t"] = options.cf_t;
    SimulationPlan qp = plan;
    qp.mode = QuenchMode::Quenched;
    int passes = 0;
    double c_fit = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (std::uint64_t seed : options.omega_seeds) {
        qp.omega_seed = seed;
        const auto samples = birkhoff_checkpoints(qp, ladder);
        const EmpiricalLaw top(samples.back());
        const double ks = top.ks_vs_normal(sigma2_pred);
        if (ks < options.ks_band) ++passes;
        nlohmann::json cf = nlohmann::json::array();
        for (std::size_t c = 0; c < ladder.size(); ++c) {
            for (double t : options.cf_t) {
                std::complex<double> acc = 0.0;
                for (double s : samples[c]) acc += std::polar(1.0, t * s);
                acc /= static_cast<double>(samples[c].size());
                const double err = std::abs(acc - std::exp(-0.5 * sigma2_pred * t * t));
                const double scaled = err * std::sqrt(static_cast<double>(ladder[c])) /
                                      (1.0 + std::abs(t) * t * t);
                c_fit = std::max(c_fit, scaled);
                cf.push_back({{"n", ladder[c]}, {"t", t}, {"error", err}});
            }
        }
        rows.push_back({{"omega_seed", seed},
                        {"ks", ks},
                        {"variance", top.variance()},
                        {"pass", ks < options.ks_band},
                        {"cf", cf}});
        if (ks >= options.ks_band) {
            std::ostringstream os;
            os << "omega_seed " << seed << ": KS " << ks << " >= " << options.ks_band;
            rep.warnings.push_back(os.str());
        }
    }
    rep.estimate["per_seed"] = rows;
    rep.estimate["cf_constant"] = c_fit;
    const double frac =
        static_cast<double>(passes) / static_cast<double>(options.omega_seeds.size());
    rep.add_check("quenched_ks_pass_fraction", frac, options.min_pass_fraction, 1.0,
                  "quenched S_n / sqrt n -> N(0, sigma^2) for a.e. omega");

    // doubled orbit: same maps on both coordinates, independent initial points
    SimulationPlan dp = plan;
    dp.mode = QuenchMode::Annealed;
    if (options.doubled_replicas > 0) dp.replicas = options.doubled_replicas;
    const OrbitEngine engine(dp);
    const FastObservable& phi = engine.phi();
    std::vector<double> hat(static_cast<std::size_t>(dp.replicas));
    const double root_n = std::sqrt(static_cast<double>(dp.n));
    parallel_for(
        hat.size(),
        [&](std::size_t r) {
            double s = 0.0;
            engine.run_pair(r, dp.n, false, [&](long long, std::uint64_t u, std::uint64_t v) {
                s += phi(u) - phi(v);
            });
            hat[r] = s / root_n;
        },
        engine.threads());
    const EmpiricalLaw hat_law(hat);
    rep.estimate["doubled_variance"] = hat_law.variance();
    rep.params["doubled_replicas"] = dp.replicas;
    rep.discrepancy = discrepancy(sigma2_hat_pred, hat_law.variance());
    if (sigma2_hat_pred > kDegenerateSigma2) {
        const double ks_hat = hat_law.ks_vs_normal(sigma2_hat_pred);
        rep.estimate["doubled_ks"] = ks_hat;
        rep.add_check("doubled_variance_rel_error", rep.discrepancy, 0.0,
                      options.doubled_variance_band, "Var(S_hat_n / sqrt n) -> sigma_hat^2");
        rep.add_check("doubled_ks", ks_hat, 0.0, options.doubled_ks_band,
                      "S_hat_n / sqrt n -> N(0, sigma_hat^2)");
    }
    rep.wall_time = elapsed(t0);
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport concentration_experiment(const SimulationPlan& plan,
                                          const ConcentrationOptions& options) {
    const auto t0 = Clock::now();
    const std::vector<long long> ladder = with_top(options.ladder, plan.n);
    ExperimentReport rep = base_report("concentration", plan);
    rep.params["ladder"] = ladder;
    rep.observable = "empirical measure";

    const OrbitEngine engine(plan);
    const std::vector<double> density =
        engine.density().empty() ? stationary_cells(*plan.system) : engine.density();
    const auto replicas = static_cast<std::size_t>(plan.replicas);
    std::vector<double> kappa(replicas * ladder.size());
    parallel_for(
        replicas,
        [&](std::size_t r) {
            std::vector<double> xs(static_cast<std::size_t>(plan.n));
            std::vector<double> sorted;
            std::size_t c = 0;
            engine.run(r, plan.n, [&](long long j, std::uint64_t u) {
                xs[static_cast<std::size_t>(j)] = fixed_to_real(u);
                if (ladder[c] == j + 1) {
                    const auto m = static_cast<std::size_t>(j + 1);
                    // extend the sorted prefix by merging the new chunk
                    const std::size_t old = sorted.size();
                    sorted.insert(sorted.end(), xs.begin() + static_cast<std::ptrdiff_t>(old),
                                  xs.begin() + static_cast<std::ptrdiff_t>(m));
                    std::sort(sorted.begin() + static_cast<std::ptrdiff_t>(old), sorted.end());
                    std::inplace_merge(sorted.begin(),
                                       sorted.begin() + static_cast<std::ptrdiff_t>(old),
                                       sorted.end());
                    kappa[r * ladder.size() + c] = kantorovich(sorted, density);
                    ++c;
                }
            });
        },
        engine.threads());

    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> scaled_means;
    std::vector<std::vector<double>> scaled(ladder.size(), std::vector<double>(replicas));
    for (std::size_t c = 0; c < ladder.size(); ++c) {
        const double root = std::sqrt(static_cast<double>(ladder[c]));
        for (std::size_t r = 0; r < replicas; ++r) {
            scaled[c][r] = kappa[r * ladder.size() + c] * root;
        }
        const EmpiricalLaw law(scaled[c]);
        scaled_means.push_back(law.mean());
        rows.push_back({{"n", ladder[c]},
                        {"mean_kappa", law.mean() / root},
                        {"mean_kappa_sqrt_n", law.mean()},
                        {"median_kappa_sqrt_n", law.sorted()[replicas / 2]}});
    }
    rep.estimate["ladder"] = rows;
    const double ratio = max_over_min(scaled_means);
    rep.estimate["mean_ratio"] = json_number(ratio);
    rep.add_check("mean_kappa_sqrt_n_ratio", ratio, 1.0, options.ratio_band,
                  "E kappa(E_n, mu) = O(1/sqrt n)");

    // tail fit at the top n
    const EmpiricalLaw top_law(scaled.back());
    const std::vector<double>& top = top_law.sorted();
    std::vector<double> t_grid = options.t_grid;
    if (t_grid.empty()) {
        const double lo = top[replicas / 2];
        const auto q_index = static_cast<std::size_t>(
            std::max(0.0, static_cast<double>(replicas) - 20.0));
        const double hi = top[std::min(q_index, replicas - 1)];
        for (int k = 0; k < 12; ++k) t_grid.push_back(lo + (hi - lo) * k / 11.0);
    }
    std::vector<double> xs, ys;
    nlohmann::json tail = nlohmann::json::array();
    for (double t : t_grid) {
        const auto above = static_cast<long long>(
            top.end() - std::upper_bound(top.begin(), top.end(), t));
        const bool starved = above == 0;
        const double prob =
            (starved ? 3.0 : static_cast<double>(above)) / static_cast<double>(replicas);
        tail.push_back({{"t", t}, {"probability", prob}, {"one_sided", starved}});
        if (!starved) {
            xs.push_back(t * t);
            ys.push_back(std::log(prob));
        }
    }
    rep.estimate["tail"] = tail;
    rep.params["t_grid"] = t_grid;
    if (xs.size() >= 3) {
        const LinearFit fit = least_squares(xs, ys);
        rep.estimate["tail_C"] = -fit.slope;
        rep.estimate["tail_intercept"] = fit.intercept;
        rep.estimate["tail_r2"] = fit.r2;
        rep.add_check("tail_fit_r2", fit.r2, options.r2_min, 1.0,
                      "log P(kappa > t / sqrt n) <= -C t^2");
        rep.add_check("tail_C", -fit.slope, 0.0, std::numeric_limits<double>::infinity(),
                      "C > 0");
    } else {
        rep.warnings.push_back("fewer than 3 populated tail points: no quadratic fit");
    }
    rep.wall_time = elapsed(t0);
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport martingale_experiment(const SimulationPlan& plan, const CoboundaryResult& cob,
                                       double sigma2_pred, const MartingaleOptions& options) {
    const auto t0 = Clock::now();
    if (cob.w.empty()) throw InvalidArgument("empty coboundary");
    SimulationPlan p = plan;
    p.n = 2;
    p.initial = InitialLaw::stationary();
    if (p.density.empty()) p.density = cob.density;
    ExperimentReport rep = base_report("martingale", p);
    rep.n = 1;
    rep.prediction["sigma2"] = sigma2_pred;
    rep.estimate["residual"] = cob.residual;
    rep.estimate["terms"] = cob.terms;

    const OrbitEngine engine(p);
    const FastObservable& phi = engine.phi();
    const double mean = plan.phi.mean_against(p.density);
    const auto cells = static_cast<double>(cob.w.size());
    auto w_at = [&](std::uint64_t u) {
        const auto i = static_cast<std::size_t>(fixed_to_real(u) * cells);
        return cob.w[std::min(i, cob.w.size() - 1)];
    };
    const auto replicas = static_cast<std::size_t>(p.replicas);
    std::vector<double> chi2(replicas);
    parallel_for(
        replicas,
        [&](std::size_t r) {
            double chi = 0.0;
            engine.run(r, 2, [&](long long j, std::uint64_t u) {
                chi += j == 0 ? phi(u) - mean + w_at(u) : -w_at(u);
            });
            chi2[r] = chi * chi;
        },
        engine.threads());
    const EmpiricalLaw law(chi2);
    rep.estimate["chi2_mean"] = law.mean();
    rep.estimate["chi2_se"] = std::sqrt(law.variance() / static_cast<double>(replicas));
    rep.discrepancy = discrepancy(sigma2_pred, law.mean());
    rep.add_check("coboundary_residual", cob.residual, 0.0, options.residual_band,
                  "|L(phi + w) - w|_1 = 0");
    rep.add_check("chi2_rel_error", rep.discrepancy, 0.0, options.band, "E[chi^2] = sigma^2");
    if (!cob.decayed) rep.warnings.push_back("coboundary series had not decayed below 1e-12");
    rep.wall_time = elapsed(t0);
    return rep;
}

}  // namespace rde
