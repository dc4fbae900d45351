#pragma once

#include "rde/limits.hpp"
#include "rde/montecarlo.hpp"
#include "rde/report.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace rde {

struct CltOptions {
    /// Berry-Esseen ladder; plan.n is added when missing.
    std::vector<long long> ladder = {100, 1000, 10000};
    double ks_band = 0.01;
    double variance_band = 0.03;
    double be_ratio_band = 3.0;
    /// Replicas used for the KS band at plan.n (0: all). The ladder always
    /// uses all replicas.
    long long ks_replicas = 0;
    /// Receives the samples at plan.n when set.
    std::vector<double>* samples_out = nullptr;
};

/// KS of S_n / sqrt(n) against N(0, sigma2_pred) plus the KS sqrt(n) ladder.
ExperimentReport clt_experiment(const SimulationPlan& plan, double sigma2_pred,
                                const CltOptions& options = {});

struct LdpOptions {
    /// Empty: {n/4, n/2, n}.
    std::vector<long long> ladder;
    double band = 0.15;
    bool annealed = true;
    /// One quenched run per seed; checks rate >= (1 - quenched_slack) c(eps).
    std::vector<std::uint64_t> quenched_seeds;
    double quenched_slack = 0.15;
    long long quenched_replicas = 0;  // 0: plan.replicas
};

/// Tail rates -(1/n) log P(S_n > n eps). The gated estimate divides out the
/// Gaussian prefactor exp(l^2/2) Q(l), l = theta* sqrt(n Lambda''(theta*));
/// the naive rate is reported alongside. Zero exceedances give the one-sided
/// bound -(1/n) log(3 / replicas).
ExperimentReport ldp_experiment(const SimulationPlan& plan, const std::vector<double>& eps_list,
                                const RateFunction& rate, const LdpOptions& options = {});

struct LltOptions {
    double lo = -0.1;
    double hi = 0.1;
    /// Empty: {n/100, n/10, n} restricted to >= 1.
    std::vector<long long> ladder;
    double band = 0.10;
    /// Empty: default_t_grid().
    std::vector<double> t_grid;
    int scan_grid = 512;
    bool require_clean_scan = true;
};

/// sigma sqrt(n) P(S_n in [lo, hi]) against (hi - lo) / sqrt(2 pi). Refused
/// with PreconditionError when the aperiodicity scan flags a t.
ExperimentReport local_limit_experiment(const SimulationPlan& plan, double sigma2_pred,
                                        const LltOptions& options = {});

/// Interval targets B_j = [lo_j, hi_j) hit at orbit time j = 1..n.
struct TargetSequence {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<double> measure;  // mu(B_j)

    std::size_t size() const { return lo.size(); }
    double expected_hits() const;

    /// Balls around p with mu(B_j) = c j^-gamma, clipped to [0,1], radii by
    /// bisection against the density cells.
    static TargetSequence nested_balls(double p, double gamma, double c, long long n,
                                       std::span<const double> density);
    /// B_j = [0,1) for every j.
    static TargetSequence whole_space(long long n);
};

struct BorelCantelliOptions {
    double band = 0.05;
    double min_expected = 10.0;
};

/// Per replica sum_j 1_{B_j}(x_j) / E_n with E_n = sum_j mu(B_j); plan.n is
/// replaced by the number of targets.
ExperimentReport borel_cantelli_experiment(const SimulationPlan& plan,
                                           const TargetSequence& targets,
                                           const BorelCantelliOptions& options = {});

struct ShrinkingTargetOptions {
    double ks_band = 0.03;
    double ratio_lower = 0.95;
    double ratio_upper = 3.0;
    double min_variance = 5.0;
    long long variance_replicas = 0;  // a_n^2 batch size; 0: plan.replicas
};

/// a_n^2 from an independent batch, then KS of the centered hit counts over
/// a_n against N(0,1).
ExperimentReport shrinking_target_clt(const SimulationPlan& plan, const TargetSequence& targets,
                                      const ShrinkingTargetOptions& options = {});

/// l_n = floor(log n / I(alpha)).
long long erdos_renyi_window(long long n, double rate_at_alpha);

struct ErdosRenyiOptions {
    double band = 0.20;
};

/// Mean over replicas of max_{m <= n - l_n} S_{l_n}(T^m x) / l_n for each n
/// in n_list (prefixes of one orbit of length max n_list).
ExperimentReport erdos_renyi_experiment(const SimulationPlan& plan, double alpha,
                                        const std::vector<long long>& n_list,
                                        const RateFunction& rate,
                                        const ErdosRenyiOptions& options = {});

struct QuenchedCltOptions {
    std::vector<std::uint64_t> omega_seeds;
    double ks_band = 0.02;
    double min_pass_fraction = 0.9;
    double sigma_hat_band = 0.02;
    double doubled_variance_band = 0.03;
    double doubled_ks_band = 0.02;
    long long doubled_replicas = 0;  // 0: plan.replicas
    /// Empty: {n/100, n/10, n}.
    std::vector<long long> cf_ladder;
    std::vector<double> cf_t = {1.0, 2.0};
    /// Skip the Lebesgue precondition and report sigma_hat^2 / sigma^2 only.
    bool diagnostic = false;
};

ExperimentReport quenched_clt_experiment(const SimulationPlan& plan, double sigma2_pred,
                                         double sigma2_hat_pred,
                                         const QuenchedCltOptions& options);

struct ConcentrationOptions {
    std::vector<long long> ladder = {1000, 10000, 100000};
    /// Empty: 12 points from the median of sqrt(n) kappa at the top n to
    /// its (1 - 20 / replicas) quantile.
    std::vector<double> t_grid;
    double ratio_band = 2.0;
    double r2_min = 0.9;
};

/// Kantorovich distance between the empirical measure of x_0..x_{n-1} and mu.
ExperimentReport concentration_experiment(const SimulationPlan& plan,
                                          const ConcentrationOptions& options = {});

struct MartingaleOptions {
    double band = 0.02;
    double residual_band = 1e-8;
};

/// Monte Carlo E[chi^2] for chi = phi + w - w o T_omega (x ~ mu, one step)
/// against sigma2_pred; plan.replicas samples.
ExperimentReport martingale_experiment(const SimulationPlan& plan, const CoboundaryResult& cob,
                                       double sigma2_pred, const MartingaleOptions& options = {});

}  // namespace rde
