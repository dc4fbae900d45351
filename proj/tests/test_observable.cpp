#include <catch_amalgamated.hpp>

#include "rde/error.hpp"
#include "rde/observable.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace rde;
using Catch::Approx;

namespace {

// composite midpoint rule, fine enough to act as an independent oracle
template <class F>
double midpoint(F f, double a, double b, int steps = 20000) {
    const double h = (b - a) / steps;
    double s = 0.0;
    for (int i = 0; i < steps; ++i) s += f(a + (i + 0.5) * h);
    return s * h;
}

Observable mixed() {
    return Observable::cosine(1) + Observable::sine(3, 0.5) + Observable::monomial(2, -1.5) +
           Observable::indicator(0.2, 0.45, 2.0) + Observable::constant(0.25);
}

}  // namespace

TEST_CASE("term integrals match quadrature", "[observable]") {
    const Observable phi = mixed();
    const double pts[][2] = {{0.0, 1.0}, {0.1, 0.3}, {0.44, 0.46}, {0.7, 0.7001}};
    for (const auto& ab : pts) {
        const double oracle = midpoint([&](double x) { return phi.eval(x); }, ab[0], ab[1]);
        CHECK(phi.integral(ab[0], ab[1]) == Approx(oracle).margin(1e-7));
    }
    CHECK(Observable::cosine(1).integral(0.0, 1.0) == Approx(0.0).margin(1e-15));
    CHECK(Observable::monomial(3).integral(0.0, 1.0) == Approx(0.25));
}

TEST_CASE("cell averages", "[observable]") {
    const Observable phi = mixed();
    const auto cells = phi.cell_averages(16);
    REQUIRE(cells.size() == 16);
    double total = 0.0;
    for (double c : cells) total += c / 16.0;
    CHECK(total == Approx(phi.integral(0.0, 1.0)).margin(1e-13));
    CHECK(cells[3] == Approx(16.0 * phi.integral(3.0 / 16, 4.0 / 16)).margin(1e-13));
}

TEST_CASE("exp cell averages split at indicator jumps", "[observable]") {
    const Observable phi = mixed();
    const std::complex<double> z(0.3, 1.7);
    const auto e = phi.exp_cell_averages(8, z);
    for (int i = 0; i < 8; ++i) {
        const double a = i / 8.0, b = (i + 1) / 8.0;
        const double re = midpoint([&](double x) { return std::exp(z * phi.eval(x)).real(); }, a, b);
        const double im = midpoint([&](double x) { return std::exp(z * phi.eval(x)).imag(); }, a, b);
        CHECK(e[i].real() == Approx(re * 8.0).margin(1e-6));
        CHECK(e[i].imag() == Approx(im * 8.0).margin(1e-6));
    }
    const auto sq = phi.square_cell_averages(8);
    const double oracle = midpoint([&](double x) { return phi.eval(x) * phi.eval(x); }, 0.25, 0.375);
    CHECK(sq[2] == Approx(oracle * 8.0).margin(1e-6));
}

TEST_CASE("algebra and constants", "[observable]") {
    const Observable phi = Observable::cosine(1) - Observable::cosine(2);
    CHECK(phi.eval(0.25) == Approx(std::cos(std::numbers::pi / 2) - std::cos(std::numbers::pi)));
    const Observable c = Observable::constant(2.0) + Observable::cosine(0, 3.0);
    REQUIRE(c.terms().size() == 1);
    CHECK(c.eval(0.77) == Approx(5.0));
    CHECK((phi * 0.0).is_zero());
    CHECK(Observable().is_zero());
    CHECK(Observable::sine(0).is_zero());
    CHECK_FALSE(phi.is_zero());
    CHECK_THROWS_AS(Observable::indicator(0.5, 0.5), InvalidArgument);
    CHECK_THROWS_AS(Observable::monomial(-1), InvalidArgument);
}

TEST_CASE("sup norm and breakpoints", "[observable]") {
    CHECK(Observable::cosine(1, -2.0).sup_norm() == Approx(2.0));
    CHECK(Observable::indicator(0.25, 0.5, 3.0).sup_norm() == Approx(3.0));
    const auto bp = mixed().breakpoints();
    REQUIRE(bp.size() == 2);
    CHECK(bp[0] == 0.2);
    CHECK(bp[1] == 0.45);
}

TEST_CASE("centering against a density", "[observable][property]") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    std::vector<double> h(64);
    double s = 0.0;
    for (double& v : h) s += v = unif(gen);
    for (double& v : h) v *= 64.0 / s;
    const Observable c = mixed().centered_against(h);
    CHECK(c.centered());
    CHECK(c.mean_against(h) == Approx(0.0).margin(1e-10));
    // idempotence: the second shift is zero
    const Observable cc = c.centered_against(h);
    REQUIRE(cc.terms().size() == c.terms().size());
    for (std::size_t i = 0; i < c.terms().size(); ++i) {
        CHECK(cc.terms()[i].coefficient == Approx(c.terms()[i].coefficient).margin(1e-12));
    }
}

TEST_CASE("bounded evaluation", "[observable][property]") {
    const Observable phi = mixed();
    const double bound = 1.0 + 0.5 + 1.5 + 2.0 + 0.25;
    for (int i = 0; i <= 1000; ++i) CHECK(std::abs(phi.eval(i / 1000.0)) <= bound);
}
