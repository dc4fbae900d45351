#pragma once

#include <functional>
#include <span>
#include <vector>

namespace rde {

double normal_cdf(double x, double variance = 1.0);
/// Upper tail Q(x) = 1 - Phi(x).
double normal_upper_tail(double x);
/// log(e^{x^2/2} Q(x)), stable for large x.
double log_mills_scaled(double x);

/// Sample set of normalized Birkhoff sums (or any real statistic).
class EmpiricalLaw {
public:
    EmpiricalLaw() = default;
    explicit EmpiricalLaw(std::vector<double> samples);

    const std::vector<double>& samples() const { return samples_; }
    const std::vector<double>& sorted() const { return sorted_; }
    std::size_t size() const { return samples_.size(); }
    double mean() const { return mean_; }
    /// Unbiased sample variance.
    double variance() const { return variance_; }

    /// sup_x |F_n(x) - F(x)|.
    double ks(const std::function<double(double)>& cdf) const;
    double ks_vs_normal(double sigma2) const;
    double ks_two_sample(const EmpiricalLaw& other) const;

private:
    std::vector<double> samples_;
    std::vector<double> sorted_;
    double mean_ = 0.0;
    double variance_ = 0.0;
};

/// Kantorovich distance int_0^1 |F_emp - F_mu| dt between the empirical law of
/// sorted samples in [0,1] and the piecewise-constant density given by cell
/// values (mean 1). Exact on the merged breakpoint partition.
double kantorovich(std::span<const double> sorted_samples, std::span<const double> density);

/// Same distance between two empirical laws on [0,1].
double kantorovich_empirical(std::span<const double> sorted_a, std::span<const double> sorted_b);

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
};
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace rde
