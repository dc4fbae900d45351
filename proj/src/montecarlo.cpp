#include "rde/montecarlo.hpp"

#include "rde/error.hpp"
#include "rde/parallel.hpp"
#include "rde/transfer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace rde {

OrbitKernel::OrbitKernel(const RandomSystem& system) {
    if (system.size() > 256) throw InvalidArgument("at most 256 maps per system");
    for (const PiecewiseMap& map : system.maps()) {
        MapKernel m;
        m.map = &map;
        if (const auto& form = map.integer_form()) {
            m.beta = form->beta;
            m.offset = form->offset_fixed;
            if (form->beta < 2) throw InvalidArgument("integer slope must be >= 2");
            m.kind = Kind::Integer;
            if (form->beta > (1u << 16)) throw InvalidArgument("integer slope must be <= 2^16");
            m.digit_bits = std::has_single_bit(form->beta) ? std::countr_zero(form->beta) : 16;
        }
        maps_.push_back(m);
    }
    // one chunk width for all maps keeps reservoir refills regular
    int width = 0;
    for (const MapKernel& m : maps_) width = std::max(width, m.digit_bits);
    for (MapKernel& m : maps_) {
        if (m.kind != Kind::Integer) continue;
        m.digit_bits = width;
        m.mask = static_cast<std::uint32_t>((std::uint64_t{1} << width) - 1);
        m.reject_below = static_cast<std::uint32_t>(((std::uint64_t{1} << width) - m.beta) % m.beta);
    }
    if (maps_.size() > 1) {
        double cum = 0.0;
        for (std::size_t k = 0; k + 1 < maps_.size(); ++k) {
            cum += system.probs()[k];
            const double t = std::round(std::ldexp(cum, 32));
            thresholds_.push_back(t >= 4294967295.0 ? 0xFFFFFFFFu : static_cast<std::uint32_t>(t));
        }
        int zeros = 32;
        for (std::uint32_t t : thresholds_) {
            if (t != 0) zeros = std::min(zeros, std::countr_zero(t));
        }
        omega_bits_ = std::max(1, 32 - zeros);
    }
}

std::uint64_t OrbitKernel::generic_step(std::uint64_t u, const MapKernel& m, Stream& tail) {
    const double y = m.map->eval(fixed_to_real(u));
    return (real_to_fixed(y) & ~std::uint64_t{0x7FF}) | tail.bits(11);
}

std::uint64_t real_to_fixed(double x) {
    if (!(x > 0.0)) return 0;
    if (x >= 1.0) return ~std::uint64_t{0};
    return static_cast<std::uint64_t>(std::ldexp(x, 64));
}

bool fixed_lower_bound(double x, std::uint64_t& out) {
    if (!(x > 0.0)) {
        out = 0;
        return true;
    }
    if (x >= 1.0) return false;
    const double v = std::ldexp(x, 64);  // exact
    auto f = static_cast<std::uint64_t>(v);
    if (static_cast<double>(f) < v) ++f;
    out = f;
    return true;
}

FastObservable::FastObservable(const Observable& phi) {
    for (const Term& t : phi.terms()) {
        switch (t.kind) {
            case TermKind::Cosine:
            case TermKind::Sine: {
                const bool sine = t.kind == TermKind::Sine;
                if (t.order == 0) {
                    if (!sine) constant_ += t.coefficient;
                    break;
                }
                // sin(-kx) = -sin(kx); cos is even
                const long long k = t.order;
                const double c = (sine && k < 0) ? -t.coefficient : t.coefficient;
                trig_.push_back({static_cast<std::uint64_t>(k < 0 ? -k : k), c, sine});
                break;
            }
            case TermKind::Monomial:
                if (t.order == 0) {
                    constant_ += t.coefficient;
                } else {
                    poly_.push_back({t.order, t.coefficient});
                }
                break;
            case TermKind::Indicator: {
                Ind r{0, 0, false, false, t.coefficient};
                if (!fixed_lower_bound(t.lo, r.lo)) r.empty = true;
                if (t.hi >= 1.0) {
                    r.to_end = true;
                } else if (!fixed_lower_bound(t.hi, r.hi) || r.hi <= r.lo) {
                    r.empty = true;
                }
                if (!r.empty) ind_.push_back(r);
                break;
            }
        }
    }
}

InitialSampler::InitialSampler(InitialLaw law, std::vector<double> density) : law_(law) {
    if (law_.kind == InitialKind::Point) {
        if (!(law_.x0 >= 0.0 && law_.x0 <= 1.0)) {
            throw DomainError("initial point must lie in [0,1]");
        }
        return;
    }
    if (law_.kind == InitialKind::Lebesgue) return;
    if (density.empty()) throw InvalidArgument("stationary initial law needs a density");
    uniform_ = std::all_of(density.begin(), density.end(),
                           [](double v) { return std::abs(v - 1.0) <= 1e-12; });
    if (uniform_) return;
    cdf_.resize(density.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        if (density[i] < 0.0) throw DomainError("density must be nonnegative");
        acc += density[i];
        cdf_[i] = acc;
    }
    if (!(acc > 0.0)) throw DomainError("density has zero mass");
    for (double& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
}

std::uint64_t InitialSampler::draw_fixed(Stream& s) const {
    switch (law_.kind) {
        case InitialKind::Point:
            return real_to_fixed(law_.x0);
        case InitialKind::Lebesgue:
            return s.next_u64();
        case InitialKind::Stationary:
            break;
    }
    if (uniform_) return s.next_u64();
    const double r = s.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
    const auto cell = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
    const double cells = static_cast<double>(cdf_.size());
    std::uint64_t lo = 0, hi = 0;
    fixed_lower_bound(static_cast<double>(cell) / cells, lo);
    const bool last = cell + 1 == cdf_.size();
    if (last || !fixed_lower_bound(static_cast<double>(cell + 1) / cells, hi)) {
        hi = ~std::uint64_t{0};
    }
    const std::uint64_t width = hi - lo + (last ? 1 : 0);
    if (width == 0) return lo + s.next_u64();  // whole interval
    __extension__ using u128 = unsigned __int128;
    const auto offset = static_cast<std::uint64_t>((static_cast<u128>(s.next_u64()) * width) >> 64);
    return lo + offset;
}

std::vector<double> stationary_cells(const RandomSystem& system, int n) {
    return stationary_density(annealed_operator(system, n)).values;
}

double sample_initial(const RandomSystem& system, const InitialLaw& law, Stream& stream) {
    std::vector<double> density;
    if (law.kind == InitialKind::Stationary) density = stationary_cells(system);
    return InitialSampler(law, std::move(density)).draw(stream);
}

void SimulationPlan::validate() const {
    if (system == nullptr) throw InvalidArgument("simulation plan has no system");
    if (n < 1) throw InvalidArgument("Birkhoff length n must be >= 1");
    if (replicas < 1) throw InvalidArgument("replicas must be >= 1");
    if (system->size() > 256) throw InvalidArgument("at most 256 maps per system");
    if (initial.kind == InitialKind::Point && !(initial.x0 >= 0.0 && initial.x0 <= 1.0)) {
        throw DomainError("initial point must lie in [0,1]");
    }
}

std::vector<std::uint8_t> omega_sequence(const OrbitKernel& kernel, std::uint64_t omega_seed,
                                         long long n) {
    std::vector<std::uint8_t> seq(static_cast<std::size_t>(std::max(0LL, n)), 0);
    if (kernel.size() <= 1) return seq;
    Stream s(omega_seed, Purpose::Omega, 0);
    for (auto& w : seq) w = static_cast<std::uint8_t>(kernel.draw_omega(s));
    return seq;
}

OrbitEngine::OrbitEngine(const SimulationPlan& plan)
    : plan_(plan), kernel_((plan.validate(), *plan.system)), phi_(plan.phi) {
    density_ = plan_.density;
    if (plan_.initial.kind == InitialKind::Stationary && density_.empty()) {
        density_ = stationary_cells(*plan_.system);
    }
    sampler_ = InitialSampler(plan_.initial, density_);
    if (plan_.mode == QuenchMode::Quenched) {
        sequence_ = omega_sequence(kernel_, plan_.omega_seed, plan_.n);
    }
    threads_ = plan_.threads == 0 ? default_threads() : plan_.threads;
}

std::vector<std::vector<double>> birkhoff_checkpoints(const SimulationPlan& plan,
                                                      const std::vector<long long>& checkpoints) {
    if (checkpoints.empty()) throw InvalidArgument("no checkpoints");
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) || checkpoints.front() < 1 ||
        checkpoints.back() > plan.n) {
        throw InvalidArgument("checkpoints must be sorted within [1, n]");
    }
    const OrbitEngine engine(plan);
    const auto replicas = static_cast<std::size_t>(plan.replicas);
    std::vector<std::vector<double>> out(checkpoints.size(), std::vector<double>(replicas));
    const FastObservable& phi = engine.phi();
    parallel_for(
        replicas,
        [&](std::size_t r) {
            double s = 0.0;
            std::size_t c = 0;
            engine.run(r, checkpoints.back(), [&](long long j, std::uint64_t u) {
                s += phi(u);
                while (c < checkpoints.size() && checkpoints[c] == j + 1) {
                    out[c][r] = s / std::sqrt(static_cast<double>(j + 1));
                    ++c;
                }
            });
        },
        engine.threads());
    return out;
}

EmpiricalLaw birkhoff_samples(const SimulationPlan& plan) {
    auto cps = birkhoff_checkpoints(plan, {plan.n});
    return EmpiricalLaw(std::move(cps.front()));
}

}  // namespace rde
