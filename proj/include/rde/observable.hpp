#pragma once

#include "rde/detail/quadrature.hpp"

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace rde {

enum class TermKind { Cosine, Sine, Monomial, Indicator };

/// coefficient * {cos(2 pi k x) | sin(2 pi k x) | x^degree | 1_[a,b)(x)}
struct Term {
    TermKind kind = TermKind::Cosine;
    int order = 1;  // frequency k for trig terms, degree for monomials
    double lo = 0.0;
    double hi = 1.0;
    double coefficient = 1.0;

    double eval(double x) const;
    /// Exact integral over [a, b].
    double integral(double a, double b) const;
};

/// Real observable on [0,1] built from trig, monomial and indicator terms.
/// Every term has a closed-form antiderivative, so cell averages are exact.
class Observable {
public:
    Observable() = default;
    explicit Observable(std::vector<Term> terms, bool centered = false);

    static Observable cosine(int k, double coefficient = 1.0);
    static Observable sine(int k, double coefficient = 1.0);
    static Observable monomial(int degree, double coefficient = 1.0);
    static Observable indicator(double lo, double hi, double coefficient = 1.0);
    static Observable constant(double value);

    Observable operator+(const Observable& other) const;
    Observable operator-(const Observable& other) const;
    Observable operator*(double scale) const;

    const std::vector<Term>& terms() const { return terms_; }
    bool centered() const { return centered_; }
    bool is_zero() const;

    double eval(double x) const;
    double integral(double a, double b) const;
    double cell_average(double a, double b) const;

    /// Averages over the N uniform cells [i/N, (i+1)/N).
    std::vector<double> cell_averages(int cells) const;

    /// Cell averages of exp(z * phi) by 8-point Gauss-Legendre on each cell,
    /// with cells split at indicator discontinuities.
    std::vector<std::complex<double>> exp_cell_averages(int cells, std::complex<double> z) const;

    /// Cell averages of phi^2, same quadrature.
    std::vector<double> square_cell_averages(int cells) const;

    /// Discontinuities of the observable inside (0,1), sorted.
    std::vector<double> breakpoints() const;

    double sup_norm() const;

    /// Integral of phi against the piecewise-constant density given by cell
    /// values (mean 1).
    double mean_against(std::span<const double> density) const;

    /// Adds the constant that makes the integral against the density vanish.
    Observable centered_against(std::span<const double> density) const;

    std::string describe() const;

private:
    void merge_constants();

    std::vector<Term> terms_;
    bool centered_ = false;
};

}  // namespace rde
