#pragma once

#include "rde/maps.hpp"
#include "rde/observable.hpp"
#include "rde/transfer.hpp"

#include <iosfwd>
#include <utility>
#include <vector>

namespace rde {

/// Predictors computed at grid N are combined with grid N/2 as
/// (4 x_N - x_{N/2}) / 3, which cancels the O(1/N^2) Ulam bias on smooth
/// observables. Requires N even and N >= 8; otherwise the raw value is used.
struct VarianceEstimate {
    double sigma2 = 0.0;
    double sigma2_raw = 0.0;     // value at grid N alone
    double sigma2_coarse = 0.0;  // value at grid N/2
    bool extrapolated = false;
    /// c_n = int phi U^n phi dmu at grid N, starting with n = 0.
    std::vector<double> correlation_tail;
    int truncation_n = 0;
    double tail_bound = 0.0;
    /// False when the correlations had not decayed below 1e-14 by n_max.
    bool converged = true;
    int grid_size = 0;
};

VarianceEstimate green_kubo_variance(const RandomSystem& system, const Observable& phi,
                                     int n = 1024, int n_max = 200, bool extrapolate = true);

struct EigenDerivatives {
    double lambda_prime0 = 0.0;
    double lambda_second0 = 0.0;
    double lambda_second0_raw = 0.0;
};

/// Five-point stencil on theta -> lambda(theta) at {0, +-delta, +-2 delta}.
EigenDerivatives variance_via_eigenvalue(const RandomSystem& system, const Observable& phi,
                                         int n = 1024, double delta = 1e-3,
                                         bool extrapolate = true);

/// Lambda(theta) = log lambda(theta) tabulated on a symmetric grid and its
/// Legendre transform c(eps).
class RateFunction {
public:
    RateFunction() = default;
    RateFunction(std::vector<double> theta_grid, std::vector<double> logmgf);

    const std::vector<double>& theta_grid() const { return theta_; }
    const std::vector<double>& logmgf() const { return logmgf_; }
    double theta_max() const { return theta_.empty() ? 0.0 : theta_.back(); }

    /// Largest / smallest eps whose supremum is attained inside the grid.
    double eps_max() const { return eps_max_; }
    double eps_min() const { return eps_min_; }
    /// Second difference of Lambda at 0 over the grid step squared.
    double sigma2_estimate() const { return sigma2_; }

    /// c(eps) = sup_theta [theta eps - Lambda(theta)]. Throws DomainError
    /// outside [eps_min, eps_max].
    double eval(double eps) const;
    /// Maximizing theta for eps.
    double argmax(double eps) const;
    /// Lambda''(theta) from the second difference at the nearest grid point.
    double second_derivative(double theta) const;

    double max_imag_part = 0.0;

private:
    double lambda_local(double theta, std::size_t k) const;
    std::pair<double, double> refine(double eps) const;

    std::vector<double> theta_;
    std::vector<double> logmgf_;
    double eps_max_ = 0.0;
    double eps_min_ = 0.0;
    double sigma2_ = 0.0;
};

inline constexpr double kDegenerateSigma2 = 1e-6;

/// theta_max <= 0 selects 0.5 / sup|phi|.
RateFunction rate_function(const RandomSystem& system, const Observable& phi, int n = 1024,
                           double theta_max = 0.0, int grid = 201, bool extrapolate = true);

struct AperiodicityPoint {
    double t = 0.0;
    double modulus = 0.0;
    bool flagged = false;  // modulus >= 1 - 1e-6
    bool converged = true;
};

std::vector<AperiodicityPoint> aperiodicity_scan(const RandomSystem& system,
                                                 const Observable& phi,
                                                 const std::vector<double>& t_grid,
                                                 int n = 1024);
bool scan_is_clean(const std::vector<AperiodicityPoint>& scan);

/// Default t grid for the scan: 0.25, 0.5, ..., 8 pi merged with the
/// multiples k pi / 2 (k = 1..16) where lattice observables resonate.
std::vector<double> default_t_grid();

struct CoboundaryResult {
    /// Cell averages of w = sum_{n>=1} L^n phi with L f = P(f h) / h.
    std::vector<double> w;
    /// Centered cell averages of phi.
    std::vector<double> phi_cells;
    std::vector<double> density;
    double residual = 0.0;  // |L(phi + w) - w|_1
    int terms = 0;
    bool decayed = true;  // last term below 1e-12
};

CoboundaryResult martingale_coboundary(const RandomSystem& system, const Observable& phi,
                                       int n = 1024, int n_max = 200);

struct DoubledOptions {
    int n_max = 200;
    bool extrapolate = true;
    /// When false the stationary density of the doubled operator is computed
    /// instead of assuming Lebesgue x Lebesgue (diagnostic mode).
    bool require_lebesgue = true;
};

/// Green-Kubo variance of phi(x) - phi(y) on the doubled operator.
VarianceEstimate doubled_variance_estimate(const RandomSystem& system, const Observable& phi,
                                           int n = 128, DoubledOptions options = {});
double doubled_variance(const RandomSystem& system, const Observable& phi, int n = 128,
                        int n_max = 200);

/// CSV with header "theta,logmgf".
void write_rate_csv(std::ostream& os, const RateFunction& rate);
/// CSV with header "n,correlation".
void write_correlation_csv(std::ostream& os, const VarianceEstimate& estimate);

}  // namespace rde
