#include "rde/maps.hpp"

#include "rde/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace rde {

namespace {

constexpr double kPartitionTol = 1e-12;
constexpr int kExpansionSamples = 1 << 12;

Branch make_affine_branch(double lo, double hi, double slope, double intercept) {
    Branch b;
    b.domain_lo = lo;
    b.domain_hi = hi;
    const double y0 = slope * lo + intercept;
    const double y1 = slope * hi + intercept;
    b.image_lo = std::min(y0, y1);
    b.image_hi = std::max(y0, y1);
    b.forward = [slope, intercept](double x) { return slope * x + intercept; };
    b.derivative = [slope](double) { return slope; };
    b.inverse = [slope, intercept](double y) { return (y - intercept) / slope; };
    b.min_expansion = std::abs(slope);
    b.affine = AffineForm{slope, intercept};
    return b;
}

double sampled_min_expansion(const Branch& b) {
    double best = std::numeric_limits<double>::infinity();
    const double w = b.domain_hi - b.domain_lo;
    for (int i = 0; i < kExpansionSamples; ++i) {
        const double x = b.domain_lo + w * (i + 0.5) / kExpansionSamples;
        best = std::min(best, std::abs(b.derivative(x)));
    }
    return best;
}

void validate_branch_samples(const Branch& b, std::size_t index) {
    const double w = b.domain_hi - b.domain_lo;
    const double sign0 = b.derivative(b.domain_lo + 0.5 * w) > 0 ? 1.0 : -1.0;
    for (int i = 0; i < 64; ++i) {
        const double x = b.domain_lo + w * (i + 0.5) / 64.0;
        const double d = b.derivative(x);
        if (d * sign0 <= 0.0) {
            std::ostringstream os;
            os << "branch " << index << " is not strictly monotone near x=" << x;
            throw InvalidArgument(os.str());
        }
        const double back = b.inverse(b.forward(x));
        if (std::abs(back - x) > 1e-10) {
            std::ostringstream os;
            os << "branch " << index << ": inverse(forward(x)) != x at x=" << x
               << " (got " << back << ")";
            throw InvalidArgument(os.str());
        }
    }
}

}  // namespace

bool Branch::increasing() const {
    if (affine) return affine->slope > 0.0;
    return derivative(0.5 * (domain_lo + domain_hi)) > 0.0;
}

PiecewiseMap::PiecewiseMap(std::string label, std::vector<Branch> branches, MapOptions options)
    : label_(std::move(label)), branches_(std::move(branches)) {
    if (branches_.empty()) throw InvalidArgument("map '" + label_ + "' has no branches");
    std::sort(branches_.begin(), branches_.end(),
              [](const Branch& a, const Branch& b) { return a.domain_lo < b.domain_lo; });
    if (std::abs(branches_.front().domain_lo) > kPartitionTol ||
        std::abs(branches_.back().domain_hi - 1.0) > kPartitionTol) {
        throw InvalidArgument("branch domains of '" + label_ + "' do not cover [0,1)");
    }
    branches_.front().domain_lo = 0.0;
    branches_.back().domain_hi = 1.0;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        Branch& b = branches_[i];
        if (!(b.domain_hi > b.domain_lo)) {
            throw InvalidArgument("empty branch domain in '" + label_ + "'");
        }
        if (i + 1 < branches_.size()) {
            const double next = branches_[i + 1].domain_lo;
            if (std::abs(next - b.domain_hi) > kPartitionTol) {
                throw InvalidArgument("branch domains of '" + label_ +
                                      "' overlap or leave a gap");
            }
        }
        if (!b.forward || !b.derivative || !b.inverse) {
            throw InvalidArgument("branch of '" + label_ + "' lacks forward/derivative/inverse");
        }
        if (!b.affine) validate_branch_samples(b, i);
        if (!(b.min_expansion > 0.0)) {
            throw InvalidArgument("branch of '" + label_ + "' has inf|T'| <= 0");
        }
        if (options.require_expansion && !(b.min_expansion > 1.0)) {
            throw InvalidArgument("branch of '" + label_ + "' is not expanding (inf|T'| <= 1)");
        }
        if (b.image_lo < -1e-12 || b.image_hi > 1.0 + 1e-12) {
            throw InvalidArgument("branch image of '" + label_ + "' leaves [0,1]");
        }
        b.image_lo = std::clamp(b.image_lo, 0.0, 1.0);
        b.image_hi = std::clamp(b.image_hi, 0.0, 1.0);
    }
    min_expansion_ = std::transform_reduce(
        branches_.begin(), branches_.end(), std::numeric_limits<double>::infinity(),
        [](double a, double b) { return std::min(a, b); },
        [](const Branch& b) { return b.min_expansion; });
}

std::size_t PiecewiseMap::branch_index(double x) const {
    auto it = std::upper_bound(branches_.begin(), branches_.end(), x,
                               [](double v, const Branch& b) { return v < b.domain_lo; });
    if (it == branches_.begin()) return 0;
    return static_cast<std::size_t>(std::distance(branches_.begin(), it)) - 1;
}

double PiecewiseMap::eval(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) {
        std::ostringstream os;
        os << "eval: x=" << x << " outside [0,1]";
        throw DomainError(os.str());
    }
    const Branch& b = branches_[branch_index(x)];
    return std::clamp(b.forward(x), 0.0, 1.0);
}

double PiecewiseMap::derivative(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("derivative: x outside [0,1]");
    return branches_[branch_index(x)].derivative(x);
}

std::vector<Preimage> PiecewiseMap::preimages(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("preimages: x outside [0,1]");
    std::vector<Preimage> out;
    for (const Branch& b : branches_) {
        const bool inc = b.increasing();
        bool covered = inc ? (x >= b.image_lo && x < b.image_hi)
                           : (x > b.image_lo && x <= b.image_hi);
        // x = 1: continuous extension of branches reaching the right end.
        if (!covered && x == 1.0 && b.image_hi == 1.0) covered = true;
        if (!covered) continue;
        const double y = std::clamp(b.inverse(x), b.domain_lo, b.domain_hi);
        out.push_back({y, std::abs(b.derivative(y))});
    }
    return out;
}

bool PiecewiseMap::preserves_lebesgue(int samples, double tol) const {
    for (int i = 0; i < samples; ++i) {
        const double x = (i + 0.5) / samples;
        double total = 0.0;
        for (const Preimage& p : preimages(x)) total += 1.0 / p.deriv_abs;
        if (std::abs(total - 1.0) > tol) return false;
    }
    return true;
}

PiecewiseMap linear_mod1(double beta, double offset) {
    if (!(beta > 1.0) || !std::isfinite(beta)) {
        throw InvalidArgument("linear_mod1 requires beta > 1");
    }
    if (!(offset >= 0.0 && offset < 1.0)) {
        throw InvalidArgument("linear_mod1 requires offset in [0,1)");
    }
    std::vector<Branch> branches;
    double lo = 0.0;
    int k = 0;
    while (lo < 1.0) {
        // the branch ends where beta*x + offset reaches the next integer
        double hi = (static_cast<double>(k + 1) - offset) / beta;
        if (hi > 1.0 - 1e-15) hi = 1.0;
        branches.push_back(make_affine_branch(lo, hi, beta, offset - k));
        lo = hi;
        ++k;
    }
    const bool integral = std::floor(beta) == beta;
    std::ostringstream label;
    if (integral && offset == 0.0) {
        label << "beta" << static_cast<int>(beta);
    } else {
        label << "linear_mod1(" << beta << "," << offset << ")";
    }
    PiecewiseMap map(label.str(), std::move(branches));
    if (integral && beta < 4294967296.0) {
        IntegerSlopeForm form;
        form.beta = static_cast<std::uint32_t>(beta);
        const double scaled = std::ldexp(offset, 64);
        form.offset_fixed = scaled >= 18446744073709551615.0
                                ? ~std::uint64_t{0}
                                : static_cast<std::uint64_t>(scaled);
        map.integer_form_ = form;
    }
    return map;
}

PiecewiseMap beta_map(int beta) {
    if (beta < 2) throw InvalidArgument("beta_map requires an integer beta >= 2");
    return linear_mod1(static_cast<double>(beta), 0.0);
}

PiecewiseMap piecewise_affine(std::string label, const std::vector<AffinePiece>& pieces,
                              MapOptions options) {
    std::vector<Branch> branches;
    branches.reserve(pieces.size());
    for (const AffinePiece& p : pieces) {
        if (p.slope == 0.0) throw InvalidArgument("affine piece with zero slope");
        branches.push_back(make_affine_branch(p.domain_lo, p.domain_hi, p.slope, p.intercept));
    }
    return PiecewiseMap(std::move(label), std::move(branches), options);
}

PiecewiseMap custom_map(std::string label, std::vector<CustomBranch> custom,
                        double declared_min_expansion, MapOptions options) {
    std::vector<Branch> branches;
    branches.reserve(custom.size());
    double sampled = std::numeric_limits<double>::infinity();
    for (CustomBranch& c : custom) {
        Branch b;
        b.domain_lo = c.domain_lo;
        b.domain_hi = c.domain_hi;
        b.forward = std::move(c.forward);
        b.derivative = std::move(c.derivative);
        b.inverse = std::move(c.inverse);
        if (!b.forward || !b.derivative || !b.inverse) {
            throw InvalidArgument("custom branch lacks forward/derivative/inverse");
        }
        const double y0 = b.forward(b.domain_lo);
        const double y1 = b.forward(b.domain_hi);
        b.image_lo = std::min(y0, y1);
        b.image_hi = std::max(y0, y1);
        b.min_expansion = sampled_min_expansion(b);
        sampled = std::min(sampled, b.min_expansion);
        branches.push_back(std::move(b));
    }
    if (!(declared_min_expansion > 0.0)) {
        throw InvalidArgument("declared inf|T'| must be positive");
    }
    if (std::abs(sampled - declared_min_expansion) > 0.05 * declared_min_expansion) {
        std::ostringstream os;
        os << "declared inf|T'| = " << declared_min_expansion
           << " disagrees with sampled value " << sampled << " by more than 5%";
        throw InvalidArgument(os.str());
    }
    return PiecewiseMap(std::move(label), std::move(branches), options);
}

RandomSystem::RandomSystem(std::vector<PiecewiseMap> maps, std::vector<double> probs,
                           std::string label)
    : maps_(std::move(maps)), probs_(std::move(probs)), label_(std::move(label)) {
    if (maps_.empty()) throw InvalidArgument("random system needs at least one map");
    if (maps_.size() != probs_.size()) {
        throw InvalidArgument("number of probabilities does not match number of maps");
    }
    double total = 0.0;
    for (double p : probs_) {
        if (!(p > 0.0)) {
            std::ostringstream os;
            os << "every probability must be > 0 (got " << p << ")";
            throw InvalidArgument(os.str());
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "probabilities sum to " << total;
        throw InvalidArgument(os.str());
    }
    for (std::size_t i = 0; i < maps_.size(); ++i) {
        mean_expansion_ += probs_[i] / maps_[i].min_expansion();
    }
    if (label_.empty()) {
        std::ostringstream os;
        for (std::size_t i = 0; i < maps_.size(); ++i) {
            if (i) os << "+";
            os << maps_[i].label();
        }
        label_ = os.str();
    }
}

bool RandomSystem::preserves_lebesgue() const {
    return std::all_of(maps_.begin(), maps_.end(),
                       [](const PiecewiseMap& m) { return m.preserves_lebesgue(); });
}

double eval(const PiecewiseMap& map, double x) { return map.eval(x); }

std::vector<Preimage> preimages(const PiecewiseMap& map, double x) { return map.preimages(x); }

double expansion_in_mean(const RandomSystem& system) {
    double total = 0.0;
    for (std::size_t i = 0; i < system.size(); ++i) {
        total += system.probs()[i] / system.maps()[i].min_expansion();
    }
    return total;
}

double random_orbit_step(const RandomSystem& system, double x, std::size_t omega_index) {
    if (omega_index >= system.size()) {
        std::ostringstream os;
        os << "map index " << omega_index << " out of range (system has " << system.size()
           << " maps)";
        throw IndexError(os.str());
    }
    return system.maps()[omega_index].eval(x);
}

}  // namespace rde
