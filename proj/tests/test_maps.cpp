#include <catch_amalgamated.hpp>

#include "rde/error.hpp"
#include "rde/maps.hpp"

#include <cmath>
#include <random>

using namespace rde;
using Catch::Approx;

namespace {

PiecewiseMap partial_two_branch() {
    return piecewise_affine("partial", {{0.0, 0.5, 2.0, 0.0}, {0.5, 0.75, 4.0, -2.0}, {0.75, 1.0, 2.0, -1.5}});
}

}  // namespace

TEST_CASE("eval on integer beta maps", "[maps]") {
    const PiecewiseMap d = beta_map(2);
    CHECK(eval(d, 0.3) == Approx(0.6).margin(1e-15));
    CHECK(eval(d, 0.75) == Approx(0.5).margin(1e-15));
    CHECK(eval(beta_map(3), 0.5) == Approx(0.5).margin(1e-15));
    // x = 1 by continuous extension of the last branch
    CHECK(eval(d, 1.0) == Approx(1.0).margin(1e-15));
    CHECK_THROWS_AS(eval(d, 1.5), DomainError);
    CHECK_THROWS_AS(eval(d, -0.1), DomainError);
}

TEST_CASE("preimages", "[maps]") {
    auto pre = preimages(beta_map(2), 0.5);
    REQUIRE(pre.size() == 2);
    CHECK(pre[0].y == Approx(0.25));
    CHECK(pre[1].y == Approx(0.75));
    CHECK(pre[0].deriv_abs == 2.0);

    pre = preimages(beta_map(3), 0.0);
    REQUIRE(pre.size() == 3);
    CHECK(pre[0].y == Approx(0.0).margin(1e-15));
    CHECK(pre[1].y == Approx(1.0 / 3.0));
    CHECK(pre[2].y == Approx(2.0 / 3.0));
    CHECK(pre[2].deriv_abs == 3.0);
}

TEST_CASE("preimages of a map with a partial branch", "[maps]") {
    // 2x on [0,1/2) and 4x - 2 on [1/2,3/4), plus a branch onto [0,1/2)
    const PiecewiseMap m = partial_two_branch();
    const auto pre = preimages(m, 0.9);
    REQUIRE(pre.size() == 2);
    CHECK(pre[0].y == Approx(0.45));
    CHECK(pre[0].deriv_abs == 2.0);
    CHECK(pre[1].y == Approx(0.725));
    CHECK(pre[1].deriv_abs == 4.0);
}

TEST_CASE("expansion in mean", "[maps]") {
    CHECK(expansion_in_mean(RandomSystem({beta_map(2), beta_map(3)}, {0.5, 0.5})) ==
          Approx(5.0 / 12.0));
    CHECK(expansion_in_mean(RandomSystem({beta_map(2)}, {1.0})) == Approx(0.5));
    CHECK(expansion_in_mean(RandomSystem({linear_mod1(1.25), beta_map(4)}, {0.9, 0.1})) ==
          Approx(0.745));
}

TEST_CASE("random orbit step", "[maps]") {
    const RandomSystem s({beta_map(2), beta_map(3)}, {0.5, 0.5});
    CHECK(random_orbit_step(s, 0.4, 1) == Approx(0.2));
    CHECK(random_orbit_step(s, 0.4, 0) == Approx(0.8));
    CHECK(random_orbit_step(s, 0.0, 0) == 0.0);
    CHECK(random_orbit_step(s, 0.0, 1) == 0.0);
    CHECK_THROWS_AS(random_orbit_step(s, 0.4, 2), IndexError);
}

TEST_CASE("random system validation", "[maps]") {
    CHECK_THROWS_AS(RandomSystem({beta_map(2), beta_map(3)}, {1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(RandomSystem({beta_map(2), beta_map(3)}, {0.6, 0.6}), InvalidArgument);
    CHECK_THROWS_AS(RandomSystem({beta_map(2)}, {0.5, 0.5}), InvalidArgument);
    CHECK_THROWS_AS(RandomSystem({}, {}), InvalidArgument);
    try {
        RandomSystem({beta_map(2), beta_map(3)}, {0.6, 0.6});
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("1.2") != std::string::npos);
    }
    const RandomSystem ok({beta_map(2), beta_map(3)}, {0.25, 0.75});
    CHECK(ok.mean_expansion_coeff() == Approx(0.25 / 2 + 0.75 / 3));
    CHECK(ok.preserves_lebesgue());
}

TEST_CASE("construction guards", "[maps]") {
    CHECK_THROWS_AS(beta_map(1), InvalidArgument);
    CHECK_THROWS_AS(linear_mod1(1.0), InvalidArgument);
    CHECK_THROWS_AS(linear_mod1(2.5, 1.0), InvalidArgument);
    // gap in the partition
    CHECK_THROWS_AS(piecewise_affine("gap", {{0.0, 0.4, 2.0, 0.0}, {0.5, 1.0, 2.0, -1.0}}),
                    InvalidArgument);
    // slope 1 is not expanding unless the check is disabled
    CHECK_THROWS_AS(piecewise_affine("id", {{0.0, 1.0, 1.0, 0.0}}), InvalidArgument);
    CHECK_NOTHROW(piecewise_affine("id", {{0.0, 1.0, 1.0, 0.0}}, MapOptions{false}));
    // image leaves [0,1]
    CHECK_THROWS_AS(piecewise_affine("out", {{0.0, 1.0, 2.0, 0.0}}), InvalidArgument);
}

TEST_CASE("custom branches and declared expansion", "[maps]") {
    // left branch 2x + x(a - x) is onto [0,1) with inf T' = 1.5 at x = a
    constexpr double a = 0.5;
    auto left = CustomBranch{0.0, a, [](double x) { return 2.0 * x + x * (a - x); },
                             [](double x) { return 2.0 + a - 2.0 * x; },
                             [](double y) {
                                 // solve -x^2 + (2 + a) x - y = 0, smaller root
                                 const double b = 2.0 + a;
                                 return (b - std::sqrt(b * b - 4.0 * y)) / 2.0;
                             }};
    auto right = CustomBranch{a, 1.0, [](double x) { return 2.0 * x - 1.0; },
                              [](double) { return 2.0; }, [](double y) { return (y + 1.0) / 2.0; }};
    const PiecewiseMap m = custom_map("nonlinear", {left, right}, 1.5);
    CHECK(m.min_expansion() == Approx(1.5).epsilon(0.05));
    CHECK(m.preimages(0.3).size() == 2);
    CHECK(m.eval(0.25) == Approx(0.5 + 0.0625));
    CHECK_THROWS_AS(custom_map("nonlinear", {left, right}, 3.0), InvalidArgument);
}

TEST_CASE("partition, inverse and preimage completeness", "[maps][property]") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::vector<PiecewiseMap> maps = {beta_map(2), beta_map(3), beta_map(5),
                                            linear_mod1(2.5, 0.3), partial_two_branch()};
    for (const PiecewiseMap& m : maps) {
        for (int i = 0; i < 10000; ++i) {
            const double x = unif(gen);
            int containing = 0;
            for (const Branch& b : m.branches()) containing += (x >= b.domain_lo && x < b.domain_hi);
            REQUIRE(containing == 1);
        }
        for (const Branch& b : m.branches()) {
            for (int i = 0; i < 1000; ++i) {
                const double y = b.image_lo + (b.image_hi - b.image_lo) * unif(gen);
                REQUIRE(b.forward(b.inverse(y)) == Approx(y).margin(1e-10));
            }
        }
        for (int i = 0; i < 1000; ++i) {
            const double x = unif(gen);
            const auto pre = m.preimages(x);
            std::size_t covering = 0;
            for (const Branch& b : m.branches()) covering += (x >= b.image_lo && x < b.image_hi);
            REQUIRE(pre.size() == covering);
            for (const Preimage& p : pre) REQUIRE(m.eval(p.y) == Approx(x).margin(1e-10));
        }
    }
}

TEST_CASE("integer beta maps preserve Lebesgue", "[maps][property]") {
    for (int beta = 2; beta <= 7; ++beta) {
        const PiecewiseMap m = beta_map(beta);
        CHECK(m.preserves_lebesgue());
        REQUIRE(m.integer_form().has_value());
        CHECK(m.integer_form()->beta == static_cast<std::uint32_t>(beta));
    }
    CHECK_FALSE(partial_two_branch().preserves_lebesgue());
    CHECK(linear_mod1(3.0, 0.25).integer_form().has_value());
    CHECK_FALSE(linear_mod1(2.5, 0.0).integer_form().has_value());
}
