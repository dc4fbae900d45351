#include "rde/limits.hpp"

#include "rde/error.hpp"
#include "rde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace rde {

namespace {

constexpr double kDecayTol = 1e-14;
constexpr int kDecayRun = 5;

bool can_extrapolate(int n) { return n >= 8 && n % 2 == 0; }

double richardson(double fine, double coarse) { return (4.0 * fine - coarse) / 3.0; }

bool can_extrapolate3(int n) { return n >= 16 && n % 4 == 0; }

// Extrapolation from grids n, n/2, n/4 with the observed convergence ratio
// (Ulam errors are O(1/n) or O(1/n^2) depending on the system); falls back
// to second order when the ratio is not geometric.
double richardson3(double fine, double mid, double coarse) {
    const double d1 = mid - fine, d2 = coarse - mid;
    if (std::abs(d1) <= 1e-15 * std::max(1.0, std::abs(fine))) return fine;
    const double r = d2 / d1;
    if (r >= 1.5 && r <= 8.0) return fine - d1 / (r - 1.0);
    return richardson(fine, mid);
}

// Green-Kubo sum for cell values c against density h on operator op:
// c_0 = <c, c h>, c_n = <c, P^n (c h)>, inner products weighted by 1/dim.
VarianceEstimate green_kubo_sum(const DiscretizedOperator& op, const std::vector<double>& c,
                                const std::vector<double>& h, int n_max) {
    const std::size_t d = c.size();
    const double inv = 1.0 / static_cast<double>(d);
    std::vector<double> v(d), w(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = c[i] * h[i];
    auto inner = [&](const std::vector<double>& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += c[i] * x[i];
        return s * inv;
    };
    VarianceEstimate est;
    est.grid_size = op.grid_size();
    const double c0 = inner(v);
    est.correlation_tail.push_back(c0);
    double sum = c0;
    int run = 0;
    int n = 1;
    for (; n <= n_max; ++n) {
        op.apply(v, w);
        v.swap(w);
        const double cn = inner(v);
        est.correlation_tail.push_back(cn);
        sum += 2.0 * cn;
        run = std::abs(cn) < kDecayTol ? run + 1 : 0;
        if (run >= kDecayRun) break;
    }
    est.truncation_n = std::min(n, n_max);
    est.converged = run >= kDecayRun;
    est.sigma2 = sum;
    est.sigma2_raw = sum;

    // Geometric tail from the last two correlations above the noise floor.
    const auto& ct = est.correlation_tail;
    std::size_t k = ct.size() - 1;
    while (k > 1 && std::abs(ct[k]) < kDecayTol) --k;
    if (k >= 2 && ct[k - 1] != 0.0) {
        const double r = std::min(std::abs(ct[k] / ct[k - 1]), 0.999);
        const double last = std::abs(ct.back());
        est.tail_bound = 2.0 * std::max(last, kDecayTol) * r / (1.0 - r);
    }
    return est;
}

struct Resolution {
    DiscretizedOperator op;
    StationaryDensity h;
    Observable centered;
};

Resolution resolve(const RandomSystem& system, const Observable& phi, int n) {
    DiscretizedOperator op = annealed_operator(system, n);
    StationaryDensity h = stationary_density(op);
    Observable centered = phi.centered_against(h.values);
    return {std::move(op), std::move(h), std::move(centered)};
}

VarianceEstimate green_kubo_at(const RandomSystem& system, const Observable& phi, int n,
                               int n_max) {
    const Resolution r = resolve(system, phi, n);
    return green_kubo_sum(r.op, r.centered.cell_averages(n), r.h.values, n_max);
}

double real_lambda(const DiscretizedOperator& base, const Observable& phi, double theta) {
    return leading_eigenvalue(twist_operator(base, phi, theta)).real();
}

}  // namespace

VarianceEstimate green_kubo_variance(const RandomSystem& system, const Observable& phi, int n,
                                     int n_max, bool extrapolate) {
    if (n_max < 1) throw InvalidArgument("n_max must be >= 1");
    VarianceEstimate fine = green_kubo_at(system, phi, n, n_max);
    if (extrapolate && can_extrapolate(n)) {
        const VarianceEstimate coarse = green_kubo_at(system, phi, n / 2, n_max);
        fine.sigma2_coarse = coarse.sigma2_raw;
        if (can_extrapolate3(n)) {
            const VarianceEstimate coarser = green_kubo_at(system, phi, n / 4, n_max);
            fine.sigma2 = richardson3(fine.sigma2_raw, coarse.sigma2_raw, coarser.sigma2_raw);
        } else {
            fine.sigma2 = richardson(fine.sigma2_raw, coarse.sigma2_raw);
        }
        fine.sigma2 = std::max(0.0, fine.sigma2);
        fine.extrapolated = true;
        fine.converged = fine.converged && coarse.converged;
    }
    fine.sigma2 = std::max(0.0, fine.sigma2);
    return fine;
}

EigenDerivatives variance_via_eigenvalue(const RandomSystem& system, const Observable& phi,
                                         int n, double delta, bool extrapolate) {
    if (!(delta > 0.0)) throw InvalidArgument("stencil step must be positive");
    auto at_grid = [&](int grid) {
        const Resolution r = resolve(system, phi, grid);
        if (r.centered.is_zero()) return EigenDerivatives{};
        const double offsets[5] = {-2.0, -1.0, 0.0, 1.0, 2.0};
        double lam[5];
        parallel_for(5, [&](std::size_t k) {
            lam[k] = real_lambda(r.op, r.centered, offsets[k] * delta);
        });
        EigenDerivatives d;
        d.lambda_prime0 = (lam[0] - 8.0 * lam[1] + 8.0 * lam[3] - lam[4]) / (12.0 * delta);
        d.lambda_second0 = (-lam[4] + 16.0 * lam[3] - 30.0 * lam[2] + 16.0 * lam[1] - lam[0]) /
                           (12.0 * delta * delta);
        return d;
    };
    EigenDerivatives fine = at_grid(n);
    fine.lambda_second0_raw = fine.lambda_second0;
    if (extrapolate && can_extrapolate(n)) {
        const EigenDerivatives coarse = at_grid(n / 2);
        if (can_extrapolate3(n)) {
            const EigenDerivatives coarser = at_grid(n / 4);
            fine.lambda_prime0 =
                richardson3(fine.lambda_prime0, coarse.lambda_prime0, coarser.lambda_prime0);
            fine.lambda_second0 =
                richardson3(fine.lambda_second0, coarse.lambda_second0, coarser.lambda_second0);
        } else {
            fine.lambda_prime0 = richardson(fine.lambda_prime0, coarse.lambda_prime0);
            fine.lambda_second0 = richardson(fine.lambda_second0, coarse.lambda_second0);
        }
    }
    return fine;
}

RateFunction::RateFunction(std::vector<double> theta_grid, std::vector<double> logmgf)
    : theta_(std::move(theta_grid)), logmgf_(std::move(logmgf)) {
    if (theta_.size() != logmgf_.size() || theta_.size() < 5) {
        throw InvalidArgument("rate function needs >= 5 matching grid points");
    }
    const std::size_t k = theta_.size();
    const double step = theta_[1] - theta_[0];
    eps_max_ = (logmgf_[k - 1] - logmgf_[k - 2]) / step;
    eps_min_ = (logmgf_[1] - logmgf_[0]) / step;
    std::size_t mid = 0;
    for (std::size_t i = 1; i < k; ++i) {
        if (std::abs(theta_[i]) < std::abs(theta_[mid])) mid = i;
    }
    mid = std::clamp<std::size_t>(mid, 1, k - 2);
    sigma2_ = (logmgf_[mid + 1] - 2.0 * logmgf_[mid] + logmgf_[mid - 1]) / (step * step);
}

double RateFunction::lambda_local(double theta, std::size_t k) const {
    // quadratic through grid points k-1, k, k+1
    const double t0 = theta_[k - 1], t1 = theta_[k], t2 = theta_[k + 1];
    const double y0 = logmgf_[k - 1], y1 = logmgf_[k], y2 = logmgf_[k + 1];
    const double l0 = (theta - t1) * (theta - t2) / ((t0 - t1) * (t0 - t2));
    const double l1 = (theta - t0) * (theta - t2) / ((t1 - t0) * (t1 - t2));
    const double l2 = (theta - t0) * (theta - t1) / ((t2 - t0) * (t2 - t1));
    return y0 * l0 + y1 * l1 + y2 * l2;
}

std::pair<double, double> RateFunction::refine(double eps) const {
    if (theta_.empty()) throw InvalidArgument("empty rate function");
    if (!(eps >= eps_min_ && eps <= eps_max_)) {
        std::ostringstream os;
        os << "eps=" << eps << " outside the rate-function domain [" << eps_min_ << ", "
           << eps_max_ << "]";
        throw DomainError(os.str());
    }
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < theta_.size(); ++i) {
        const double v = theta_[i] * eps - logmgf_[i];
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    // golden-section search on the local quadratic interpolant
    const std::size_t k = std::clamp<std::size_t>(best, 1, theta_.size() - 2);
    auto g = [&](double t) { return t * eps - lambda_local(t, k); };
    constexpr double kInvPhi = 0.6180339887498948482;
    double a = theta_[k - 1], b = theta_[k + 1];
    double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
    double g1 = g(x1), g2 = g(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-15; ++it) {
        if (g1 < g2) {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + kInvPhi * (b - a);
            g2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - kInvPhi * (b - a);
            g1 = g(x1);
        }
    }
    const double t = 0.5 * (a + b);
    const double gt = g(t);
    if (gt >= best_val) return {t, gt};
    return {theta_[best], best_val};
}

double RateFunction::argmax(double eps) const { return refine(eps).first; }

double RateFunction::eval(double eps) const { return std::max(0.0, refine(eps).second); }

double RateFunction::second_derivative(double theta) const {
    if (theta_.size() < 3) throw InvalidArgument("empty rate function");
    const double step = theta_[1] - theta_[0];
    const auto k = static_cast<std::size_t>(std::clamp<long long>(
        std::llround((theta - theta_[0]) / step), 1, static_cast<long long>(theta_.size()) - 2));
    return (logmgf_[k + 1] - 2.0 * logmgf_[k] + logmgf_[k - 1]) / (step * step);
}

RateFunction rate_function(const RandomSystem& system, const Observable& phi, int n,
                           double theta_max, int grid, bool extrapolate) {
    if (grid < 5) throw InvalidArgument("rate-function grid needs >= 5 points");
    if (grid % 2 == 0) ++grid;
    if (!(theta_max > 0.0)) {
        const double sup = phi.sup_norm();
        if (!(sup > 0.0)) throw DegenerateVarianceError("observable is identically zero");
        theta_max = 0.5 / sup;
    }
    std::vector<double> theta(static_cast<std::size_t>(grid));
    const int half = grid / 2;
    for (int i = 0; i < grid; ++i) theta[i] = theta_max * (i - half) / half;

    double max_imag = 0.0;
    auto tabulate = [&](int g) {
        const Resolution r = resolve(system, phi, g);
        std::vector<double> lam(theta.size());
        std::vector<double> imag(theta.size());
        parallel_for(theta.size(), [&](std::size_t i) {
            const std::complex<double> l =
                leading_eigenvalue(twist_operator(r.op, r.centered, theta[i]));
            if (!(l.real() > 0.0)) {
                std::ostringstream os;
                os << "lambda(theta=" << theta[i] << ") is not positive";
                throw ConvergenceError(os.str());
            }
            lam[i] = std::log(l.real());
            imag[i] = std::abs(l.imag());
        });
        for (double v : imag) max_imag = std::max(max_imag, v);
        lam[static_cast<std::size_t>(half)] = 0.0;
        return lam;
    };
    std::vector<double> logmgf = tabulate(n);
    if (extrapolate && can_extrapolate3(n)) {
        // one convergence ratio for the whole table keeps Lambda convex
        const std::vector<double> coarse = tabulate(n / 2);
        const std::vector<double> coarser = tabulate(n / 4);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < logmgf.size(); ++i) {
            s1 += std::abs(coarse[i] - logmgf[i]);
            s2 += std::abs(coarser[i] - coarse[i]);
        }
        const double r = s1 > 0.0 ? s2 / s1 : 0.0;
        const double factor = (r >= 1.5 && r <= 8.0) ? 1.0 / (r - 1.0) : 1.0 / 3.0;
        for (std::size_t i = 0; i < logmgf.size(); ++i) {
            logmgf[i] -= factor * (coarse[i] - logmgf[i]);
        }
    } else if (extrapolate && can_extrapolate(n)) {
        const std::vector<double> coarse = tabulate(n / 2);
        for (std::size_t i = 0; i < logmgf.size(); ++i) {
            logmgf[i] = richardson(logmgf[i], coarse[i]);
        }
    }
    RateFunction rf(theta, std::move(logmgf));
    rf.max_imag_part = max_imag;
    if (!(rf.sigma2_estimate() > kDegenerateSigma2)) {
        std::ostringstream os;
        os << "degenerate variance: Lambda''(0) ~ " << rf.sigma2_estimate();
        throw DegenerateVarianceError(os.str());
    }
    return rf;
}

std::vector<AperiodicityPoint> aperiodicity_scan(const RandomSystem& system,
                                                 const Observable& phi,
                                                 const std::vector<double>& t_grid, int n) {
    for (double t : t_grid) {
        if (t == 0.0) throw InvalidArgument("aperiodicity scan grid must exclude t = 0");
    }
    const DiscretizedOperator base = annealed_operator(system, n);
    std::vector<AperiodicityPoint> out(t_grid.size());
    parallel_for(t_grid.size(), [&](std::size_t i) {
        const ModulusEstimate m =
            dominant_modulus(twist_operator(base, phi, {0.0, t_grid[i]}), 1e-12, 20000);
        out[i].t = t_grid[i];
        out[i].modulus = m.modulus;
        out[i].converged = m.converged;
        out[i].flagged = m.modulus >= 1.0 - 1e-6;
    });
    return out;
}

bool scan_is_clean(const std::vector<AperiodicityPoint>& scan) {
    return std::none_of(scan.begin(), scan.end(),
                        [](const AperiodicityPoint& p) { return p.flagged; });
}

std::vector<double> default_t_grid() {
    std::vector<double> t;
    const double top = 8.0 * std::numbers::pi;
    for (int i = 1; 0.25 * i <= top + 1e-12; ++i) t.push_back(0.25 * i);
    for (int k = 1; k <= 16; ++k) t.push_back(0.5 * std::numbers::pi * k);
    std::sort(t.begin(), t.end());
    return t;
}

CoboundaryResult martingale_coboundary(const RandomSystem& system, const Observable& phi,
                                       int n, int n_max) {
    const Resolution r = resolve(system, phi, n);
    const std::size_t d = static_cast<std::size_t>(n);
    const std::vector<double>& h = r.h.values;
    CoboundaryResult out;
    out.phi_cells = r.centered.cell_averages(n);
    out.density = h;
    out.w.assign(d, 0.0);

    auto divide = [&](const std::vector<double>& num, std::vector<double>& dst) {
        for (std::size_t i = 0; i < d; ++i) dst[i] = h[i] > 1e-300 ? num[i] / h[i] : 0.0;
    };
    std::vector<double> u(d), pu(d), term(d);
    for (std::size_t i = 0; i < d; ++i) u[i] = out.phi_cells[i] * h[i];
    double last = 0.0;
    int k = 0;
    for (; k < n_max; ++k) {
        r.op.apply(u, pu);
        u.swap(pu);
        divide(u, term);
        last = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            out.w[i] += term[i];
            last += std::abs(term[i]);
        }
        last /= static_cast<double>(d);
        if (last < 1e-17) {
            ++k;
            break;
        }
    }
    out.terms = k;
    out.decayed = last < 1e-12;

    // residual = |L(phi + w) - w|_1
    std::vector<double> s(d), ls(d);
    for (std::size_t i = 0; i < d; ++i) s[i] = (out.phi_cells[i] + out.w[i]) * h[i];
    r.op.apply(s, ls);
    divide(ls, term);
    double res = 0.0;
    for (std::size_t i = 0; i < d; ++i) res += std::abs(term[i] - out.w[i]);
    out.residual = res / static_cast<double>(d);
    return out;
}

VarianceEstimate doubled_variance_estimate(const RandomSystem& system, const Observable& phi,
                                           int n, DoubledOptions options) {
    if (options.require_lebesgue && !system.preserves_lebesgue()) {
        throw PreconditionError(
            "doubled variance needs every map to preserve Lebesgue measure (sum 1/|T'| = 1)");
    }
    auto at_grid = [&](int g) {
        const DiscretizedOperator op = doubled_operator(system, g);
        const std::vector<double> cells = phi.cell_averages(g);
        const std::size_t gg = static_cast<std::size_t>(g);
        std::vector<double> c(gg * gg);
        for (std::size_t i = 0; i < gg; ++i) {
            for (std::size_t j = 0; j < gg; ++j) c[i * gg + j] = cells[i] - cells[j];
        }
        std::vector<double> h(gg * gg, 1.0);
        if (!options.require_lebesgue) {
            h = stationary_density(op).values;
            double m = 0.0;
            for (std::size_t q = 0; q < c.size(); ++q) m += c[q] * h[q];
            m /= static_cast<double>(c.size());
            for (double& v : c) v -= m;
        }
        return green_kubo_sum(op, c, h, options.n_max);
    };
    VarianceEstimate fine = at_grid(n);
    if (options.extrapolate && can_extrapolate(n)) {
        const VarianceEstimate coarse = at_grid(n / 2);
        fine.sigma2_coarse = coarse.sigma2_raw;
        fine.sigma2 = can_extrapolate3(n)
                          ? richardson3(fine.sigma2_raw, coarse.sigma2_raw, at_grid(n / 4).sigma2_raw)
                          : richardson(fine.sigma2_raw, coarse.sigma2_raw);
        fine.extrapolated = true;
        fine.converged = fine.converged && coarse.converged;
    }
    fine.sigma2 = std::max(0.0, fine.sigma2);
    return fine;
}

double doubled_variance(const RandomSystem& system, const Observable& phi, int n, int n_max) {
    DoubledOptions o;
    o.n_max = n_max;
    return doubled_variance_estimate(system, phi, n, o).sigma2;
}

void write_rate_csv(std::ostream& os, const RateFunction& rate) {
    os << "theta,logmgf\n" << std::setprecision(17);
    for (std::size_t i = 0; i < rate.theta_grid().size(); ++i) {
        os << rate.theta_grid()[i] << ',' << rate.logmgf()[i] << '\n';
    }
}

void write_correlation_csv(std::ostream& os, const VarianceEstimate& estimate) {
    os << "n,correlation\n" << std::setprecision(17);
    for (std::size_t i = 0; i < estimate.correlation_tail.size(); ++i) {
        os << i << ',' << estimate.correlation_tail[i] << '\n';
    }
}

}  // namespace rde
