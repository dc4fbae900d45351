#pragma once

#include "rde/maps.hpp"
#include "rde/observable.hpp"
#include "rde/rng.hpp"
#include "rde/stats.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace rde {

/// Orbit states are 64-bit fixed-point numbers u = floor(x * 2^64). The
/// digits of x below 2^-64 are treated as a fresh uniform tail at every step,
/// so a state stands for the uniform law on [u, u + 1) * 2^-64.
///
/// For x -> beta x + a (mod 1) with integer beta the step is exact:
/// u' = beta u + d + a_fixed (mod 2^64) with the carry d uniform on
/// {0, ..., beta - 1}. Other maps go through double precision and get their
/// 11 lowest bits refreshed from the tail stream.
class OrbitKernel {
public:
    explicit OrbitKernel(const RandomSystem& system);

    std::size_t size() const { return maps_.size(); }

    std::uint32_t draw_omega(Stream& s) const {
        if (thresholds_.empty()) return 0;
        // thresholds are multiples of 2^(32 - omega_bits_): fewer bits suffice
        const std::uint32_t r = omega_bits_ == 32 ? s.next_u32()
                                                  : s.bits(omega_bits_) << (32 - omega_bits_);
        std::uint32_t k = 0;
        for (std::uint32_t t : thresholds_) k += r >= t ? 1u : 0u;
        return k;
    }

    std::uint64_t step(std::uint64_t u, std::uint32_t omega, Stream& tail) const {
        const MapKernel& m = maps_[omega];
        if (m.kind == Kind::Generic) return generic_step(u, m, tail);
        // Lemire multiply-shift on digit_bits-wide chunks; exact, rejects
        // with probability below beta / 2^16
        std::uint32_t x = tail.bits(m.digit_bits);
        std::uint32_t prod = x * m.beta;
        while ((prod & m.mask) < m.reject_below) {
            x = tail.bits(m.digit_bits);
            prod = x * m.beta;
        }
        const std::uint32_t d = prod >> m.digit_bits;
        return u * m.beta + d + m.offset;
    }

private:
    enum class Kind { Integer, Generic };
    struct MapKernel {
        Kind kind = Kind::Generic;
        std::uint32_t beta = 0;
        int digit_bits = 0;  // log2 beta for powers of two, else 16
        std::uint32_t mask = 0;
        std::uint32_t reject_below = 0;
        std::uint64_t offset = 0;
        const PiecewiseMap* map = nullptr;
    };
    static std::uint64_t generic_step(std::uint64_t u, const MapKernel& m, Stream& tail);

    std::vector<MapKernel> maps_;
    std::vector<std::uint32_t> thresholds_;  // cumulative, 2^32 scale; empty for one map
    int omega_bits_ = 32;
};

inline double fixed_to_real(std::uint64_t u) { return static_cast<double>(u) * 0x1.0p-64; }
/// floor(x 2^64), saturating at 2^64 - 1 for x >= 1.
std::uint64_t real_to_fixed(double x);
/// ceil(x 2^64) as the first state inside [x, 1); returns false when x >= 1.
bool fixed_lower_bound(double x, std::uint64_t& out);

namespace detail {

struct TrigTable {
    static constexpr int kBits = 10;
    std::array<double, (1 << kBits)> cos_v{};
    std::array<double, (1 << kBits)> sin_v{};
    TrigTable() {
        for (int i = 0; i < (1 << kBits); ++i) {
            const double a = 2.0 * std::numbers::pi * i / (1 << kBits);
            cos_v[i] = std::cos(a);
            sin_v[i] = std::sin(a);
        }
    }
};

inline const TrigTable kTrigTable{};

}  // namespace detail

/// cos and sin of 2 pi phase / 2^64.
inline void fixed_cos_sin(std::uint64_t phase, double& c, double& s) {
    constexpr int kShift = 64 - detail::TrigTable::kBits;
    const auto idx = static_cast<std::size_t>(phase >> kShift);
    const std::uint64_t rem = phase & ((std::uint64_t{1} << kShift) - 1);
    const double t = static_cast<double>(rem) * (2.0 * std::numbers::pi * 0x1.0p-64);
    const double t2 = t * t;
    const double ct = 1.0 - t2 * (0.5 - t2 * (1.0 / 24.0 - t2 * (1.0 / 720.0)));
    const double st = t * (1.0 - t2 * (1.0 / 6.0 - t2 * (1.0 / 120.0)));
    const double ca = detail::kTrigTable.cos_v[idx], sa = detail::kTrigTable.sin_v[idx];
    c = ca * ct - sa * st;
    s = sa * ct + ca * st;
}

/// Observable compiled for evaluation on fixed-point states. Trig terms use the
/// exact phase k u (mod 2^64) and a 1024-entry table with a Taylor correction.
class FastObservable {
public:
    FastObservable() = default;
    explicit FastObservable(const Observable& phi);

    double operator()(std::uint64_t u) const {
        double v = constant_;
        for (const Trig& t : trig_) {
            double c, s;
            fixed_cos_sin(t.k * u, c, s);
            v += t.coefficient * (t.sine ? s : c);
        }
        if (!poly_.empty()) {
            const double x = fixed_to_real(u);
            for (const Poly& p : poly_) {
                double xp = 1.0;
                for (int d = 0; d < p.degree; ++d) xp *= x;
                v += p.coefficient * xp;
            }
        }
        for (const Ind& r : ind_) {
            if (!r.empty && u >= r.lo && (r.to_end || u < r.hi)) v += r.coefficient;
        }
        return v;
    }

    bool trivial() const { return trig_.empty() && poly_.empty() && ind_.empty(); }
    double constant() const { return constant_; }

private:
    struct Trig {
        std::uint64_t k;
        double coefficient;
        bool sine;
    };
    struct Poly {
        int degree;
        double coefficient;
    };
    struct Ind {
        std::uint64_t lo;
        std::uint64_t hi;
        bool to_end;  // interval reaches 1
        bool empty;
        double coefficient;
    };
    std::vector<Trig> trig_;
    std::vector<Poly> poly_;
    std::vector<Ind> ind_;
    double constant_ = 0.0;
};

enum class InitialKind { Stationary, Lebesgue, Point };

struct InitialLaw {
    InitialKind kind = InitialKind::Stationary;
    double x0 = 0.0;

    static InitialLaw stationary() { return {InitialKind::Stationary, 0.0}; }
    static InitialLaw lebesgue() { return {InitialKind::Lebesgue, 0.0}; }
    static InitialLaw point(double x0) { return {InitialKind::Point, x0}; }
};

enum class QuenchMode { Annealed, Quenched };

inline constexpr int kDefaultDensityGrid = 1024;

/// Compiled initial law: inverse CDF over the cell histogram of the density.
class InitialSampler {
public:
    InitialSampler() = default;
    /// density: cell averages of h (needed for Stationary; Lebesgue is used
    /// when every cell equals 1 within 1e-12).
    InitialSampler(InitialLaw law, std::vector<double> density);

    std::uint64_t draw_fixed(Stream& s) const;
    double draw(Stream& s) const { return fixed_to_real(draw_fixed(s)); }
    const InitialLaw& law() const { return law_; }

private:
    InitialLaw law_;
    bool uniform_ = true;
    std::vector<double> cdf_;  // cumulative mass at cell right ends
};

/// Stationary density cell values for the system at grid N.
std::vector<double> stationary_cells(const RandomSystem& system, int n = kDefaultDensityGrid);

double sample_initial(const RandomSystem& system, const InitialLaw& law, Stream& stream);

struct SimulationPlan {
    const RandomSystem* system = nullptr;  // must outlive the plan's use
    Observable phi;
    long long n = 1000;
    long long replicas = 1000;
    std::uint64_t master_seed = 1;
    InitialLaw initial = InitialLaw::stationary();
    QuenchMode mode = QuenchMode::Annealed;
    std::uint64_t omega_seed = 0;
    /// Cell averages of h; computed on demand when empty.
    std::vector<double> density;
    unsigned threads = 0;

    void validate() const;
};

/// Map indices w_1..w_n for a quenched run (shared by all replicas).
std::vector<std::uint8_t> omega_sequence(const OrbitKernel& kernel, std::uint64_t omega_seed,
                                         long long n);

/// S_m / sqrt(m) for each replica at every checkpoint m (sorted, <= plan.n).
/// Result is indexed [checkpoint][replica].
std::vector<std::vector<double>> birkhoff_checkpoints(const SimulationPlan& plan,
                                                      const std::vector<long long>& checkpoints);

EmpiricalLaw birkhoff_samples(const SimulationPlan& plan);

/// Seed of an independent batch derived from a master seed.
inline std::uint64_t derived_seed(std::uint64_t seed, Purpose purpose) {
    return splitmix64(seed + 0x632be59bd9b4e019ULL * static_cast<std::uint64_t>(purpose));
}

/// Compiled plan: kernel, observable, initial sampler and (in quenched mode)
/// the shared map sequence. Replica r uses streams (seed, purpose, r).
class OrbitEngine {
public:
    explicit OrbitEngine(const SimulationPlan& plan);

    const SimulationPlan& plan() const { return plan_; }
    const OrbitKernel& kernel() const { return kernel_; }
    const FastObservable& phi() const { return phi_; }
    /// Cell averages of h (empty unless the plan needed or supplied them).
    const std::vector<double>& density() const { return density_; }
    unsigned threads() const { return threads_; }

    /// Visits x_0 .. x_{visits-1} of replica r: visit(j, u_j). visits <= n + 1.
    template <class Visit>
    void run(std::uint64_t replica, long long visits, Visit&& visit) const {
        Stream omega(plan_.master_seed, Purpose::Omega, replica);
        Stream tail(plan_.master_seed, Purpose::Tail, replica);
        Stream init(plan_.master_seed, Purpose::Init, replica);
        std::uint64_t u = sampler_.draw_fixed(init);
        const std::uint8_t* seq = sequence_.empty() ? nullptr : sequence_.data();
        for (long long j = 0; j < visits; ++j) {
            visit(j, u);
            if (j + 1 == visits) break;
            const std::uint32_t w = seq ? seq[j] : kernel_.draw_omega(omega);
            u = kernel_.step(u, w, tail);
        }
    }

    /// Two coordinates driven by the same maps: visit(j, u_j, v_j). The second
    /// coordinate draws from the Tail2/Init2 streams, or starts at u_0 when
    /// `synchronized`.
    template <class Visit>
    void run_pair(std::uint64_t replica, long long visits, bool synchronized, Visit&& visit) const {
        Stream omega(plan_.master_seed, Purpose::Omega, replica);
        Stream tail(plan_.master_seed, Purpose::Tail, replica);
        Stream init(plan_.master_seed, Purpose::Init, replica);
        Stream tail2(plan_.master_seed, Purpose::Tail2, replica);
        Stream init2(plan_.master_seed, Purpose::Init2, replica);
        std::uint64_t u = sampler_.draw_fixed(init);
        std::uint64_t v = synchronized ? u : sampler_.draw_fixed(init2);
        const std::uint8_t* seq = sequence_.empty() ? nullptr : sequence_.data();
        for (long long j = 0; j < visits; ++j) {
            visit(j, u, v);
            if (j + 1 == visits) break;
            const std::uint32_t w = seq ? seq[j] : kernel_.draw_omega(omega);
            if (synchronized && u == v) {
                u = v = kernel_.step(u, w, tail);
            } else {
                u = kernel_.step(u, w, tail);
                v = kernel_.step(v, w, tail2);
            }
        }
    }

private:
    SimulationPlan plan_;
    OrbitKernel kernel_;
    FastObservable phi_;
    std::vector<double> density_;
    InitialSampler sampler_;
    std::vector<std::uint8_t> sequence_;
    unsigned threads_ = 1;
};

}  // namespace rde
