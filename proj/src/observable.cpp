#include "rde/observable.hpp"

#include "rde/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rde {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double Term::eval(double x) const {
    switch (kind) {
        case TermKind::Cosine: return coefficient * std::cos(kTwoPi * order * x);
        case TermKind::Sine: return coefficient * std::sin(kTwoPi * order * x);
        case TermKind::Monomial: return coefficient * std::pow(x, order);
        case TermKind::Indicator: return (x >= lo && x < hi) ? coefficient : 0.0;
    }
    return 0.0;
}

double Term::integral(double a, double b) const {
    const double pk = std::numbers::pi * order;
    switch (kind) {
        case TermKind::Cosine:
            if (order == 0) return coefficient * (b - a);
            return coefficient * std::cos(pk * (a + b)) * std::sin(pk * (b - a)) / pk;
        case TermKind::Sine:
            if (order == 0) return 0.0;
            return coefficient * std::sin(pk * (a + b)) * std::sin(pk * (b - a)) / pk;
        case TermKind::Monomial: {
            const int d = order + 1;
            return coefficient * (std::pow(b, d) - std::pow(a, d)) / d;
        }
        case TermKind::Indicator:
            return coefficient * std::max(0.0, std::min(b, hi) - std::max(a, lo));
    }
    return 0.0;
}

Observable::Observable(std::vector<Term> terms, bool centered)
    : terms_(std::move(terms)), centered_(centered) {
    for (const Term& t : terms_) {
        if (!std::isfinite(t.coefficient)) throw InvalidArgument("non-finite coefficient");
        if (t.kind == TermKind::Monomial && t.order < 0) {
            throw InvalidArgument("monomial degree must be >= 0");
        }
        if ((t.kind == TermKind::Cosine || t.kind == TermKind::Sine) && t.order < 0) {
            throw InvalidArgument("trig frequency must be >= 0");
        }
        if (t.kind == TermKind::Indicator && !(t.lo < t.hi)) {
            throw InvalidArgument("indicator needs lo < hi");
        }
    }
    merge_constants();
}

Observable Observable::cosine(int k, double c) {
    return Observable({Term{TermKind::Cosine, k, 0.0, 1.0, c}});
}
Observable Observable::sine(int k, double c) {
    return Observable({Term{TermKind::Sine, k, 0.0, 1.0, c}});
}
Observable Observable::monomial(int degree, double c) {
    return Observable({Term{TermKind::Monomial, degree, 0.0, 1.0, c}});
}
Observable Observable::indicator(double lo, double hi, double c) {
    return Observable({Term{TermKind::Indicator, 0, lo, hi, c}});
}
Observable Observable::constant(double value) { return monomial(0, value); }

Observable Observable::operator+(const Observable& other) const {
    std::vector<Term> t = terms_;
    t.insert(t.end(), other.terms_.begin(), other.terms_.end());
    return Observable(std::move(t));
}

Observable Observable::operator-(const Observable& other) const { return *this + other * -1.0; }

Observable Observable::operator*(double scale) const {
    std::vector<Term> t = terms_;
    for (Term& term : t) term.coefficient *= scale;
    return Observable(std::move(t));
}

void Observable::merge_constants() {
    double constant = 0.0;
    bool any = false;
    std::vector<Term> kept;
    kept.reserve(terms_.size());
    for (const Term& t : terms_) {
        const bool is_const = (t.kind == TermKind::Monomial && t.order == 0) ||
                              (t.kind == TermKind::Cosine && t.order == 0);
        if (is_const) {
            constant += t.coefficient;
            any = true;
        } else {
            kept.push_back(t);
        }
    }
    if (any) kept.push_back(Term{TermKind::Monomial, 0, 0.0, 1.0, constant});
    terms_ = std::move(kept);
}

bool Observable::is_zero() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) {
        return t.coefficient == 0.0 || (t.kind == TermKind::Sine && t.order == 0);
    });
}

double Observable::eval(double x) const {
    double s = 0.0;
    for (const Term& t : terms_) s += t.eval(x);
    return s;
}

double Observable::integral(double a, double b) const {
    double s = 0.0;
    for (const Term& t : terms_) s += t.integral(a, b);
    return s;
}

double Observable::cell_average(double a, double b) const { return integral(a, b) / (b - a); }

std::vector<double> Observable::cell_averages(int cells) const {
    std::vector<double> out(static_cast<std::size_t>(cells));
    const double w = 1.0 / cells;
    for (int i = 0; i < cells; ++i) out[i] = cell_average(i * w, (i + 1) * w);
    return out;
}

std::vector<std::complex<double>> Observable::exp_cell_averages(int cells,
                                                                std::complex<double> z) const {
    std::vector<std::complex<double>> out(static_cast<std::size_t>(cells));
    const std::vector<double> splits = breakpoints();
    const double w = 1.0 / cells;
    if (z == std::complex<double>(0.0, 0.0)) {
        std::fill(out.begin(), out.end(), std::complex<double>(1.0, 0.0));
        return out;
    }
    auto f = [this, z](double x) { return std::exp(z * eval(x)); };
    for (int i = 0; i < cells; ++i) {
        out[i] = gauss_legendre_average(f, i * w, (i + 1) * w, splits);
    }
    return out;
}

std::vector<double> Observable::square_cell_averages(int cells) const {
    std::vector<double> out(static_cast<std::size_t>(cells));
    const std::vector<double> splits = breakpoints();
    const double w = 1.0 / cells;
    auto f = [this](double x) {
        const double v = eval(x);
        return v * v;
    };
    for (int i = 0; i < cells; ++i) out[i] = gauss_legendre_average(f, i * w, (i + 1) * w, splits);
    return out;
}

std::vector<double> Observable::breakpoints() const {
    std::vector<double> pts;
    for (const Term& t : terms_) {
        if (t.kind != TermKind::Indicator) continue;
        if (t.lo > 0.0 && t.lo < 1.0) pts.push_back(t.lo);
        if (t.hi > 0.0 && t.hi < 1.0) pts.push_back(t.hi);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

double Observable::sup_norm() const {
    constexpr int kSamples = 1 << 13;
    double best = 0.0;
    for (int i = 0; i <= kSamples; ++i) {
        best = std::max(best, std::abs(eval(static_cast<double>(i) / kSamples)));
    }
    for (double b : breakpoints()) {
        best = std::max(best, std::abs(eval(b)));
        best = std::max(best, std::abs(eval(std::nextafter(b, 0.0))));
    }
    return best;
}

double Observable::mean_against(std::span<const double> density) const {
    const int cells = static_cast<int>(density.size());
    const double w = 1.0 / cells;
    double s = 0.0;
    for (int i = 0; i < cells; ++i) s += density[i] * integral(i * w, (i + 1) * w);
    return s;
}

Observable Observable::centered_against(std::span<const double> density) const {
    const double mean = mean_against(density);
    std::vector<Term> t = terms_;
    t.push_back(Term{TermKind::Monomial, 0, 0.0, 1.0, -mean});
    return Observable(std::move(t), true);
}

std::string Observable::describe() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        const Term& t = terms_[i];
        if (i) os << " + ";
        os << t.coefficient << "*";
        switch (t.kind) {
            case TermKind::Cosine: os << "cos(2pi*" << t.order << "x)"; break;
            case TermKind::Sine: os << "sin(2pi*" << t.order << "x)"; break;
            case TermKind::Monomial: os << "x^" << t.order; break;
            case TermKind::Indicator: os << "1[" << t.lo << "," << t.hi << ")"; break;
        }
    }
    return os.str();
}

}  // namespace rde
