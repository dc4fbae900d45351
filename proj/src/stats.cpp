#include "rde/stats.hpp"

#include "rde/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace rde {

double normal_cdf(double x, double variance) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double log_mills_scaled(double x) {
    if (x < 8.0) return 0.5 * x * x + std::log(normal_upper_tail(x));
    // asymptotic series of the Mills ratio
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return std::log(series / (x * std::sqrt(2.0 * std::numbers::pi)));
}

EmpiricalLaw::EmpiricalLaw(std::vector<double> samples) : samples_(std::move(samples)) {
    sorted_ = samples_;
    std::sort(sorted_.begin(), sorted_.end());
    const double n = static_cast<double>(samples_.size());
    if (samples_.empty()) return;
    mean_ = std::accumulate(samples_.begin(), samples_.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : samples_) ss += (v - mean_) * (v - mean_);
    variance_ = samples_.size() > 1 ? ss / (n - 1.0) : 0.0;
}

double EmpiricalLaw::ks(const std::function<double(double)>& cdf) const {
    const double n = static_cast<double>(sorted_.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted_.size();) {
        // ties: F_n jumps once over the whole block
        std::size_t j = i;
        while (j < sorted_.size() && sorted_[j] == sorted_[i]) ++j;
        const double f = cdf(sorted_[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(j) / n - f});
        i = j;
    }
    return std::clamp(d, 0.0, 1.0);
}

double EmpiricalLaw::ks_vs_normal(double sigma2) const {
    if (!(sigma2 > 0.0)) throw InvalidArgument("ks_vs_normal needs sigma^2 > 0");
    return ks([sigma2](double x) { return normal_cdf(x, sigma2); });
}

double EmpiricalLaw::ks_two_sample(const EmpiricalLaw& other) const {
    const auto& a = sorted_;
    const auto& b = other.sorted_;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
            x = a[i];
        } else {
            x = b[j];
        }
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

namespace {

// int_a^b |c - (f0 + (f1 - f0)(t - a)/(b - a))| dt
double abs_linear_integral(double c, double a, double b, double f0, double f1) {
    const double g0 = c - f0, g1 = c - f1;
    const double w = b - a;
    if (w <= 0.0) return 0.0;
    if ((g0 >= 0.0 && g1 >= 0.0) || (g0 <= 0.0 && g1 <= 0.0)) {
        return 0.5 * std::abs(g0 + g1) * w;
    }
    const double s = g0 / (g0 - g1);  // root as a fraction of w
    return 0.5 * (std::abs(g0) * s + std::abs(g1) * (1.0 - s)) * w;
}

}  // namespace

double kantorovich(std::span<const double> sorted_samples, std::span<const double> density) {
    const std::size_t cells = density.size();
    if (cells == 0) throw InvalidArgument("kantorovich needs a density");
    const double n = static_cast<double>(sorted_samples.size());
    if (sorted_samples.empty()) throw InvalidArgument("kantorovich needs samples");
    const double w = 1.0 / static_cast<double>(cells);
    std::vector<double> cum(cells + 1, 0.0);
    for (std::size_t i = 0; i < cells; ++i) cum[i + 1] = cum[i] + density[i] * w;
    const double total = cum[cells];
    for (double& c : cum) c /= total;

    auto f_mu = [&](double t, std::size_t cell) {
        const double lo = static_cast<double>(cell) * w;
        return cum[cell] + (cum[cell + 1] - cum[cell]) * (t - lo) / w;
    };

    double acc = 0.0;
    std::size_t k = 0;  // samples <= current left point
    double left = 0.0;
    while (k < sorted_samples.size() && sorted_samples[k] <= 0.0) ++k;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        const double cell_hi = cell + 1 == cells ? 1.0 : static_cast<double>(cell + 1) * w;
        while (left < cell_hi) {
            double right = cell_hi;
            if (k < sorted_samples.size() && sorted_samples[k] < right) right = sorted_samples[k];
            const double fe = static_cast<double>(k) / n;
            acc += abs_linear_integral(fe, left, right, f_mu(left, cell), f_mu(right, cell));
            left = right;
            while (k < sorted_samples.size() && sorted_samples[k] <= left) ++k;
        }
    }
    return acc;
}

double kantorovich_empirical(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InvalidArgument("kantorovich needs samples");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double left = 0.0, acc = 0.0;
    while (i < a.size() && a[i] <= 0.0) ++i;
    while (j < b.size() && b[j] <= 0.0) ++j;
    while (left < 1.0) {
        double right = 1.0;
        if (i < a.size()) right = std::min(right, a[i]);
        if (j < b.size()) right = std::min(right, b[j]);
        acc += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) *
               (right - left);
        left = right;
        while (i < a.size() && a[i] <= left) ++i;
        while (j < b.size() && b[j] <= left) ++j;
        if (right >= 1.0) break;
    }
    return acc;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit needs >= 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

}  // namespace rde
