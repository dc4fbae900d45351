#include <catch_amalgamated.hpp>

#include "rde/error.hpp"
#include "rde/montecarlo.hpp"

#include <cmath>
#include <numbers>

using namespace rde;
using Catch::Approx;

namespace {

const RandomSystem& doubling() {
    static const RandomSystem s({beta_map(2)}, {1.0});
    return s;
}

const RandomSystem& b23() {
    static const RandomSystem s({beta_map(2), beta_map(3)}, {0.5, 0.5});
    return s;
}

SimulationPlan plan_for(const RandomSystem& s, long long n, long long replicas, std::uint64_t seed = 1) {
    SimulationPlan p;
    p.system = &s;
    p.phi = Observable::cosine(1);
    p.n = n;
    p.replicas = replicas;
    p.master_seed = seed;
    return p;
}

}  // namespace

TEST_CASE("fixed-point conversions", "[montecarlo]") {
    CHECK(real_to_fixed(0.5) == (std::uint64_t{1} << 63));
    CHECK(real_to_fixed(1.0) == ~std::uint64_t{0});
    CHECK(real_to_fixed(0.0) == 0);
    CHECK(fixed_to_real(std::uint64_t{1} << 62) == 0.25);
    std::uint64_t u = 0;
    CHECK(fixed_lower_bound(0.25, u));
    CHECK(u == (std::uint64_t{1} << 62));
    CHECK_FALSE(fixed_lower_bound(1.0, u));
    double c, s;
    for (double x : {0.0, 0.1, 0.37, 0.5, 0.9999}) {
        fixed_cos_sin(real_to_fixed(x), c, s);
        CHECK(c == Approx(std::cos(2 * std::numbers::pi * x)).margin(1e-14));
        CHECK(s == Approx(std::sin(2 * std::numbers::pi * x)).margin(1e-14));
    }
}

TEST_CASE("integer kernel steps are exact", "[montecarlo]") {
    const RandomSystem s({beta_map(2), beta_map(3), linear_mod1(5.0, 0.25)}, {0.2, 0.3, 0.5});
    const OrbitKernel k(s);
    Stream tail(1, Purpose::Tail, 0);
    const std::uint64_t offset = real_to_fixed(0.25);
    for (int i = 0; i < 10000; ++i) {
        const std::uint64_t u = tail.next_u64();
        for (std::uint32_t w = 0; w < 3; ++w) {
            const std::uint32_t beta = w == 0 ? 2 : (w == 1 ? 3 : 5);
            const std::uint64_t v = k.step(u, w, tail) - u * beta - (w == 2 ? offset : 0);
            REQUIRE(v < beta);  // carry digit
        }
    }
}

TEST_CASE("map selection frequencies", "[montecarlo]") {
    const RandomSystem s({beta_map(2), beta_map(3), beta_map(4)}, {0.2, 0.3, 0.5});
    const OrbitKernel k(s);
    Stream st(3, Purpose::Omega, 0);
    std::array<long long, 3> counts{};
    const int m = 200000;
    for (int i = 0; i < m; ++i) ++counts[k.draw_omega(st)];
    CHECK(counts[0] / double(m) == Approx(0.2).margin(0.004));
    CHECK(counts[1] / double(m) == Approx(0.3).margin(0.004));
    CHECK(counts[2] / double(m) == Approx(0.5).margin(0.004));
    CHECK_THROWS_AS(OrbitKernel(RandomSystem({beta_map(70000)}, {1.0})), InvalidArgument);
}

TEST_CASE("generic maps follow the double-precision map", "[montecarlo]") {
    const RandomSystem s({linear_mod1(2.5, 0.3)}, {1.0});
    const OrbitKernel k(s);
    Stream tail(2, Purpose::Tail, 0);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t u = tail.next_u64();
        const double expected = s.maps()[0].eval(fixed_to_real(u));
        REQUIRE(fixed_to_real(k.step(u, 0, tail)) == Approx(expected).margin(1e-12));
    }
}

TEST_CASE("fast observable matches the observable", "[montecarlo]") {
    const Observable phi = Observable::cosine(3, 0.5) + Observable::sine(1) + Observable::monomial(2, -1.0) +
                           Observable::indicator(0.25, 0.75, 2.0) + Observable::indicator(0.5, 1.0) +
                           Observable::constant(0.1);
    const FastObservable f(phi);
    Stream s(4, Purpose::Aux, 0);
    for (int i = 0; i < 10000; ++i) {
        const std::uint64_t u = s.next_u64();
        REQUIRE(f(u) == Approx(phi.eval(fixed_to_real(u))).margin(1e-12));
    }
    CHECK(f(real_to_fixed(0.25)) == Approx(phi.eval(0.25)).margin(1e-12));
    CHECK(FastObservable(Observable::constant(2.0)).trivial());
}

TEST_CASE("initial laws", "[montecarlo]") {
    Stream s(5, Purpose::Init, 0);
    std::vector<double> x(100000);
    for (double& v : x) v = sample_initial(b23(), InitialLaw::lebesgue(), s);
    CHECK(EmpiricalLaw(x).ks([](double t) { return std::clamp(t, 0.0, 1.0); }) < 0.01);
    for (double& v : x) v = sample_initial(b23(), InitialLaw::stationary(), s);
    CHECK(EmpiricalLaw(x).ks([](double t) { return std::clamp(t, 0.0, 1.0); }) < 0.01);
    for (int i = 0; i < 10; ++i) CHECK(sample_initial(b23(), InitialLaw::point(0.3), s) == Approx(0.3).margin(1e-15));
    CHECK_THROWS_AS(sample_initial(b23(), InitialLaw::point(1.3), s), DomainError);

    // non-uniform density: inverse CDF against the cell histogram
    std::vector<double> h(4);
    h = {0.4, 0.4, 1.6, 1.6};
    const InitialSampler sampler(InitialLaw::stationary(), h);
    for (double& v : x) v = sampler.draw(s);
    auto cdf = [](double t) {
        t = std::clamp(t, 0.0, 1.0);
        return t < 0.5 ? 0.4 * t : 0.2 + 1.6 * (t - 0.5);
    };
    CHECK(EmpiricalLaw(x).ks(cdf) < 0.01);
}

TEST_CASE("birkhoff samples: trivial and oracle cases", "[montecarlo]") {
    SimulationPlan p = plan_for(doubling(), 1, 10);
    p.initial = InitialLaw::point(0.25);
    const EmpiricalLaw trivial = birkhoff_samples(p);
    for (double v : trivial.samples()) CHECK(v == Approx(0.0).margin(1e-15));

    SimulationPlan a = plan_for(b23(), 10000, 20000);
    const EmpiricalLaw law = birkhoff_samples(a);
    CHECK(law.variance() == Approx(0.5).epsilon(0.03));
}

TEST_CASE("reproducibility and scheduling independence", "[montecarlo][property]") {
    SimulationPlan p = plan_for(b23(), 500, 300, 77);
    p.threads = 1;
    const auto one = birkhoff_samples(p).samples();
    p.threads = 3;
    const auto three = birkhoff_samples(p).samples();
    CHECK(one == three);
    p.master_seed = 78;
    CHECK(birkhoff_samples(p).samples() != one);

    const auto cps = birkhoff_checkpoints(p, {10, 500});
    REQUIRE(cps.size() == 2);
    CHECK(cps[1] == birkhoff_samples(p).samples());
}

TEST_CASE("quenched omega sequences", "[montecarlo][property]") {
    const OrbitKernel k(b23());
    const auto s1 = omega_sequence(k, 9, 1000), s2 = omega_sequence(k, 9, 1000);
    CHECK(s1 == s2);
    CHECK(s1 != omega_sequence(k, 10, 1000));
    const OrbitKernel single(doubling());
    for (auto w : omega_sequence(single, 9, 100)) CHECK(w == 0);

    // single-map systems: quenched and annealed coincide for any omega seed
    SimulationPlan a = plan_for(doubling(), 200, 500);
    SimulationPlan q = a;
    q.mode = QuenchMode::Quenched;
    q.omega_seed = 3;
    const auto qa = birkhoff_samples(q).samples();
    q.omega_seed = 4;
    CHECK(qa == birkhoff_samples(q).samples());
    CHECK(qa == birkhoff_samples(a).samples());

    // the x-streams differ across replicas while the map sequence is shared
    SimulationPlan qb = plan_for(b23(), 30, 4);
    qb.mode = QuenchMode::Quenched;
    qb.omega_seed = 5;
    const OrbitEngine engine(qb);
    std::vector<std::uint64_t> first(4);
    for (std::uint64_t r = 0; r < 4; ++r) engine.run(r, 1, [&](long long, std::uint64_t u) { first[r] = u; });
    CHECK(first[0] != first[1]);
}

TEST_CASE("quenched laws pool to the annealed law", "[montecarlo][property]") {
    std::vector<double> pooled;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SimulationPlan q = plan_for(b23(), 200, 2000, 100 + seed);
        q.mode = QuenchMode::Quenched;
        q.omega_seed = seed;
        const auto s = birkhoff_samples(q).samples();
        pooled.insert(pooled.end(), s.begin(), s.end());
    }
    const EmpiricalLaw annealed = birkhoff_samples(plan_for(b23(), 200, 100000, 999));
    CHECK(EmpiricalLaw(pooled).ks_two_sample(annealed) < 0.01);
}

TEST_CASE("synchronized doubled orbits stay equal", "[montecarlo]") {
    SimulationPlan p = plan_for(b23(), 300, 10);
    const OrbitEngine engine(p);
    for (std::uint64_t r = 0; r < 10; ++r) {
        double hat = 0.0;
        engine.run_pair(r, 301, true, [&](long long, std::uint64_t u, std::uint64_t v) {
            hat += engine.phi()(u) - engine.phi()(v);
        });
        CHECK(hat == 0.0);
    }
    bool differ = false;
    engine.run_pair(0, 5, false, [&](long long, std::uint64_t u, std::uint64_t v) { differ |= u != v; });
    CHECK(differ);
}

TEST_CASE("plan validation", "[montecarlo]") {
    SimulationPlan p = plan_for(b23(), 0, 10);
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = plan_for(b23(), 10, 0);
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = plan_for(b23(), 10, 10);
    p.system = nullptr;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
}
