#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rde {

/// forward(x) = slope * x + intercept on the branch domain.
struct AffineForm {
    double slope = 1.0;
    double intercept = 0.0;
};

/// One monotone C^2 piece of an interval map.
///
/// The domain is the half-open interval [domain_lo, domain_hi). For an
/// increasing branch the image is [image_lo, image_hi); for a decreasing one
/// it is (image_lo, image_hi].
struct Branch {
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    double image_lo = 0.0;
    double image_hi = 1.0;
    std::function<double(double)> forward;
    std::function<double(double)> derivative;
    std::function<double(double)> inverse;
    /// inf |derivative| over the domain.
    double min_expansion = 1.0;
    /// Set for affine branches; enables exact cell arithmetic.
    std::optional<AffineForm> affine;

    bool increasing() const;
};

/// x -> beta * x + offset (mod 1) with an integer beta. Orbits of such maps
/// can be iterated exactly on 64-bit fixed-point states.
struct IntegerSlopeForm {
    std::uint32_t beta = 2;
    std::uint64_t offset_fixed = 0;  // offset * 2^64
};

struct Preimage {
    double y = 0.0;
    double deriv_abs = 0.0;
};

struct MapOptions {
    /// Builtin families require inf |T'| > 1. Disable for degenerate stubs
    /// (e.g. the identity) used in tests.
    bool require_expansion = true;
};

/// Piecewise monotone map of [0,1] given by branches that partition [0,1).
/// Immutable after construction.
class PiecewiseMap {
public:
    PiecewiseMap(std::string label, std::vector<Branch> branches, MapOptions options = {});

    const std::string& label() const { return label_; }
    const std::vector<Branch>& branches() const { return branches_; }
    std::size_t branch_count() const { return branches_.size(); }
    double min_expansion() const { return min_expansion_; }
    const std::optional<IntegerSlopeForm>& integer_form() const { return integer_form_; }

    /// Index of the branch whose domain contains x; x = 1 belongs to the last.
    std::size_t branch_index(double x) const;

    double eval(double x) const;
    double derivative(double x) const;
    std::vector<Preimage> preimages(double x) const;

    /// Checks sum over preimages of 1/|T'| == 1 at `samples` equally spaced
    /// points in (0,1).
    bool preserves_lebesgue(int samples = 257, double tol = 1e-9) const;

private:
    friend PiecewiseMap linear_mod1(double beta, double offset);

    std::string label_;
    std::vector<Branch> branches_;
    double min_expansion_ = 0.0;
    std::optional<IntegerSlopeForm> integer_form_;
};

/// beta * x mod 1 for integer beta >= 2.
PiecewiseMap beta_map(int beta);

/// beta * x + offset mod 1 for real beta > 1, offset in [0,1).
PiecewiseMap linear_mod1(double beta, double offset = 0.0);

/// Affine branch given by its domain and forward slope/intercept.
struct AffinePiece {
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    double slope = 2.0;
    double intercept = 0.0;
};

/// Map assembled from affine pieces (general Lasota-Yorke maps, possibly
/// non-surjective branches).
PiecewiseMap piecewise_affine(std::string label, const std::vector<AffinePiece>& pieces,
                              MapOptions options = {});

/// User-supplied branch for non-linear maps.
struct CustomBranch {
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    std::function<double(double)> forward;
    std::function<double(double)> derivative;
    std::function<double(double)> inverse;
};

/// Builds a map from black-box branches. inf |T'| cannot be computed exactly,
/// so the caller declares it and the library checks it against 2^12 samples
/// per branch (5% agreement required).
PiecewiseMap custom_map(std::string label, std::vector<CustomBranch> branches,
                        double declared_min_expansion, MapOptions options = {});

/// Finite family {T_omega} with i.i.d. selection probabilities {p_omega}.
class RandomSystem {
public:
    RandomSystem(std::vector<PiecewiseMap> maps, std::vector<double> probs,
                 std::string label = {});

    const std::vector<PiecewiseMap>& maps() const { return maps_; }
    const std::vector<double>& probs() const { return probs_; }
    std::size_t size() const { return maps_.size(); }
    const std::string& label() const { return label_; }
    double mean_expansion_coeff() const { return mean_expansion_; }

    /// Every map preserves Lebesgue measure.
    bool preserves_lebesgue() const;

private:
    std::vector<PiecewiseMap> maps_;
    std::vector<double> probs_;
    std::string label_;
    double mean_expansion_ = 0.0;
};

double eval(const PiecewiseMap& map, double x);
std::vector<Preimage> preimages(const PiecewiseMap& map, double x);

/// Lambda = sum_omega p_omega / lambda(T_omega); Lambda < 1 means expanding in mean.
double expansion_in_mean(const RandomSystem& system);

double random_orbit_step(const RandomSystem& system, double x, std::size_t omega_index);

}  // namespace rde
