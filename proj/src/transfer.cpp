#include "rde/transfer.hpp"

#include "rde/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace rde {

namespace {

constexpr double kSnapTol = 1e-9;

double snap_to_grid(double v, double n) {
    const double r = std::round(v * n);
    return std::abs(v - r / n) <= kSnapTol ? r / n : v;
}

// Cuts the branch domain at the preimages of the grid points inside the image
// and at the source cell boundaries. Neighbouring pieces share their endpoint
// exactly, so each column telescopes to the measure of the source cell.
void add_branch_triplets(const Branch& b, int n, std::vector<Triplet>& out) {
    const double nd = n;
    const double ylo = snap_to_grid(b.image_lo, nd);
    const double yhi = snap_to_grid(b.image_hi, nd);
    if (!(yhi > ylo)) return;

    std::vector<double> ys{ylo};
    for (int k = static_cast<int>(std::floor(ylo * nd)) + 1; k < n; ++k) {
        const double y = k / nd;
        if (y >= yhi) break;
        if (y > ylo) ys.push_back(y);
    }
    ys.push_back(yhi);

    const bool inc = b.increasing();
    auto invert = [&](double y) {
        double x;
        if (b.affine) {
            x = (y - b.affine->intercept) / b.affine->slope;
        } else {
            x = b.inverse(y);
        }
        return snap_to_grid(std::clamp(x, b.domain_lo, b.domain_hi), nd);
    };
    std::vector<double> xs(ys.size());
    for (std::size_t m = 0; m < ys.size(); ++m) xs[m] = invert(ys[m]);
    xs.front() = inc ? b.domain_lo : b.domain_hi;
    xs.back() = inc ? b.domain_hi : b.domain_lo;

    for (std::size_t m = 0; m + 1 < ys.size(); ++m) {
        const int j = std::clamp(static_cast<int>(std::floor(0.5 * (ys[m] + ys[m + 1]) * nd)), 0,
                                 n - 1);
        const double xa = std::min(xs[m], xs[m + 1]);
        const double xb = std::max(xs[m], xs[m + 1]);
        int c = std::clamp(static_cast<int>(std::floor(xa * nd)), 0, n - 1);
        double left = xa;
        while (left < xb && c < n) {
            const double right = std::min(xb, (c + 1) / nd);
            if (right > left) out.push_back({j, c, (right - left) * nd});
            left = std::max(left, right);
            ++c;
        }
    }
}

template <typename T>
void apply_doubled(const DiscretizedOperator& op, std::span<const T> in, std::span<T> out) {
    const int n = op.grid_size();
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    std::vector<T> a(nn), b(nn);
    std::fill(out.begin(), out.end(), T{});
    for (std::size_t f = 0; f < op.factors().size(); ++f) {
        const CscMatrix& u = op.factors()[f];
        const double p = op.weights()[f];
        // a = U V (rows of V are first-coordinate cells)
        std::fill(a.begin(), a.end(), T{});
        for (int i = 0; i < n; ++i) {
            const T* vrow = in.data() + static_cast<std::size_t>(i) * n;
            for (int k = u.col_ptr[i]; k < u.col_ptr[i + 1]; ++k) {
                T* arow = a.data() + static_cast<std::size_t>(u.row_idx[k]) * n;
                const double w = u.values[k];
                for (int j = 0; j < n; ++j) arow[j] += w * vrow[j];
            }
        }
        // b = a U^T
        std::fill(b.begin(), b.end(), T{});
        for (int r = 0; r < n; ++r) {
            const T* arow = a.data() + static_cast<std::size_t>(r) * n;
            T* brow = b.data() + static_cast<std::size_t>(r) * n;
            for (int j = 0; j < n; ++j) {
                const T v = arow[j];
                for (int k = u.col_ptr[j]; k < u.col_ptr[j + 1]; ++k) {
                    brow[u.row_idx[k]] += u.values[k] * v;
                }
            }
        }
        for (std::size_t q = 0; q < nn; ++q) out[q] += p * b[q];
    }
}

double mean_abs(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s / static_cast<double>(v.size());
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Deterministic start vector in [-1, 1].
std::vector<double> scrambled_vector(std::size_t n, std::uint64_t salt) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t z = (i + 1) * 0x9e3779b97f4a7c15ULL + salt;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        v[i] = 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
    }
    return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Largest modulus among the eigenvalues of [[a, b], [c, d]].
double max_eig_modulus_2x2(double a, double b, double c, double d) {
    const double tr = a + d;
    const double det = a * d - b * c;
    const double disc = 0.25 * tr * tr - det;
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        return std::max(std::abs(0.5 * tr + s), std::abs(0.5 * tr - s));
    }
    return std::sqrt(std::max(det, 0.0));
}

}  // namespace

double CscMatrix::at(int row, int col) const {
    for (int k = col_ptr[col]; k < col_ptr[col + 1]; ++k) {
        if (row_idx[k] == row) return values[k];
    }
    return 0.0;
}

CscMatrix csc_from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    CscMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.col_ptr.assign(static_cast<std::size_t>(cols) + 1, 0);
    for (std::size_t k = 0; k < triplets.size();) {
        const Triplet& t = triplets[k];
        double sum = 0.0;
        std::size_t e = k;
        while (e < triplets.size() && triplets[e].col == t.col && triplets[e].row == t.row) {
            sum += triplets[e].value;
            ++e;
        }
        if (sum != 0.0) {
            m.row_idx.push_back(t.row);
            m.values.push_back(sum);
            ++m.col_ptr[t.col + 1];
        }
        k = e;
    }
    std::partial_sum(m.col_ptr.begin(), m.col_ptr.end(), m.col_ptr.begin());
    return m;
}

DiscretizedOperator DiscretizedOperator::from_matrix(CscMatrix matrix, std::string label) {
    if (matrix.rows != matrix.cols) throw InvalidArgument("operator matrix must be square");
    DiscretizedOperator op;
    op.n_ = matrix.rows;
    op.label_ = std::move(label);
    op.base_ = std::move(matrix);
    return op;
}

std::size_t DiscretizedOperator::dimension() const {
    return doubled_ ? static_cast<std::size_t>(n_) * n_ : static_cast<std::size_t>(n_);
}

void DiscretizedOperator::apply(std::span<const double> in, std::span<double> out) const {
    if (twisted()) throw InvalidArgument("real apply on a twisted operator");
    if (in.size() != dimension() || out.size() != dimension()) {
        throw InvalidArgument("vector size does not match operator dimension");
    }
    if (doubled_) {
        apply_doubled<double>(*this, in, out);
    } else {
        base_.multiply<double>(in, out);
    }
}

void DiscretizedOperator::apply(std::span<const std::complex<double>> in,
                                std::span<std::complex<double>> out) const {
    if (in.size() != dimension() || out.size() != dimension()) {
        throw InvalidArgument("vector size does not match operator dimension");
    }
    if (doubled_) {
        apply_doubled<std::complex<double>>(*this, in, out);
        return;
    }
    if (!twisted()) {
        base_.multiply<std::complex<double>>(in, out);
        return;
    }
    std::vector<std::complex<double>> tmp(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) tmp[i] = twist_weights_[i] * in[i];
    base_.multiply<std::complex<double>>(tmp, out);
}

std::vector<SparseEntry> DiscretizedOperator::entries() const {
    std::vector<SparseEntry> out;
    if (!doubled_) {
        out.reserve(base_.nnz());
        for (int c = 0; c < base_.cols; ++c) {
            const std::complex<double> w = twisted() ? twist_weights_[c] : 1.0;
            for (int k = base_.col_ptr[c]; k < base_.col_ptr[c + 1]; ++k) {
                out.push_back({base_.row_idx[k], c, base_.values[k] * w});
            }
        }
        return out;
    }
    double total = 0.0;
    for (const CscMatrix& u : factors_) total += static_cast<double>(u.nnz()) * u.nnz();
    if (total > 4e7) throw ResourceError("doubled operator too large to materialize");
    const long long n = n_;
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        const CscMatrix& u = factors_[f];
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int k1 = u.col_ptr[i]; k1 < u.col_ptr[i + 1]; ++k1) {
                    for (int k2 = u.col_ptr[j]; k2 < u.col_ptr[j + 1]; ++k2) {
                        out.push_back({u.row_idx[k1] * n + u.row_idx[k2], i * n + j,
                                       weights_[f] * u.values[k1] * u.values[k2]});
                    }
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const SparseEntry& a, const SparseEntry& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    std::vector<SparseEntry> merged;
    merged.reserve(out.size());
    for (const SparseEntry& e : out) {
        if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col) {
            merged.back().value += e.value;
        } else {
            merged.push_back(e);
        }
    }
    return merged;
}

CscMatrix ulam_matrix_csc(const PiecewiseMap& map, int n) {
    if (n < 2) throw InvalidArgument("Ulam grid needs N >= 2");
    std::vector<Triplet> triplets;
    for (const Branch& b : map.branches()) add_branch_triplets(b, n, triplets);
    return csc_from_triplets(n, n, std::move(triplets));
}

DiscretizedOperator ulam_matrix(const PiecewiseMap& map, int n) {
    return DiscretizedOperator::from_matrix(ulam_matrix_csc(map, n), map.label());
}

DiscretizedOperator annealed_operator(const RandomSystem& system, int n) {
    if (system.size() == 1) {
        return DiscretizedOperator::from_matrix(ulam_matrix_csc(system.maps()[0], n),
                                                system.label());
    }
    std::vector<Triplet> all;
    for (std::size_t w = 0; w < system.size(); ++w) {
        std::vector<Triplet> t;
        for (const Branch& b : system.maps()[w].branches()) add_branch_triplets(b, n, t);
        for (Triplet& e : t) e.value *= system.probs()[w];
        all.insert(all.end(), t.begin(), t.end());
    }
    return DiscretizedOperator::from_matrix(csc_from_triplets(n, n, std::move(all)),
                                            system.label());
}

DiscretizedOperator twist_operator(const DiscretizedOperator& base, const Observable& phi,
                                   std::complex<double> z) {
    if (base.doubled() || base.twisted()) {
        throw InvalidArgument("twist_operator needs an untwisted 1D operator");
    }
    DiscretizedOperator op = base;
    op.twist_ = DiscretizedOperator::Twist{phi, z};
    op.twist_weights_ = phi.exp_cell_averages(base.grid_size(), z);
    return op;
}

DiscretizedOperator twisted_operator(const RandomSystem& system, const Observable& phi,
                                     std::complex<double> z, int n) {
    return twist_operator(annealed_operator(system, n), phi, z);
}

DiscretizedOperator doubled_operator(const RandomSystem& system, int n, int guard) {
    if (n < 2) throw InvalidArgument("Ulam grid needs N >= 2");
    if (n > guard) {
        std::ostringstream os;
        os << "doubled grid N=" << n << " exceeds guard " << guard;
        throw ResourceError(os.str());
    }
    DiscretizedOperator op;
    op.n_ = n;
    op.doubled_ = true;
    op.label_ = system.label() + " (doubled)";
    for (std::size_t w = 0; w < system.size(); ++w) {
        op.factors_.push_back(ulam_matrix_csc(system.maps()[w], n));
        op.weights_.push_back(system.probs()[w]);
    }
    return op;
}

StationaryDensity stationary_density(const DiscretizedOperator& op, double tol, int max_iter) {
    if (op.twisted()) throw InvalidArgument("stationary_density needs an untwisted operator");
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    const std::size_t d = op.dimension();
    std::vector<double> v(d, 1.0), w(d);
    int it = 0;
    double diff = 0.0;
    for (; it < max_iter; ++it) {
        op.apply(v, w);
        const double m = mean_of(w);
        if (!(m > 0.0)) throw ConvergenceError("stationary_density: mass vanished");
        diff = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            w[i] /= m;
            diff += std::abs(w[i] - v[i]);
        }
        diff /= static_cast<double>(d);
        v.swap(w);
        if (diff < tol) break;
    }
    if (!(diff < tol)) {
        std::ostringstream os;
        os << "stationary_density did not converge in " << max_iter
           << " iterations (last L1 change " << diff << ")";
        throw ConvergenceError(os.str());
    }
    StationaryDensity h;
    op.apply(v, w);
    for (std::size_t i = 0; i < d; ++i) w[i] -= v[i];
    h.residual = mean_abs(w);
    h.values = std::move(v);
    h.grid_size = op.grid_size();
    h.iterations = it + 1;
    return h;
}

SpectralReport spectral_gap(const DiscretizedOperator& op, const StationaryDensity& h,
                            double tol, int max_iter) {
    if (op.twisted()) throw InvalidArgument("spectral_gap needs an untwisted operator");
    const std::size_t d = op.dimension();
    if (h.values.size() != d) throw InvalidArgument("density size does not match operator");

    // Two-dimensional subspace iteration on the complement of h, so that a
    // complex pair of subdominant eigenvalues is resolved.
    auto deflate = [&](std::vector<double>& v) {
        const double m = mean_of(v);
        for (std::size_t i = 0; i < d; ++i) v[i] -= m * h.values[i];
    };
    std::vector<double> q1 = scrambled_vector(d, 1), q2 = scrambled_vector(d, 2);
    deflate(q1);
    deflate(q2);
    std::vector<double> p1(d), p2(d);

    auto orthonormalize = [&](std::vector<double>& a, std::vector<double>& b) {
        const double na = std::sqrt(dot(a, a));
        if (na > 0.0) {
            for (double& x : a) x /= na;
        }
        const double proj = dot(a, b);
        for (std::size_t i = 0; i < d; ++i) b[i] -= proj * a[i];
        const double nb = std::sqrt(dot(b, b));
        if (nb > 1e-13) {
            for (double& x : b) x /= nb;
        } else {
            std::fill(b.begin(), b.end(), 0.0);
        }
        return na;
    };
    orthonormalize(q1, q2);

    SpectralReport rep;
    rep.leading_eigenvalue = 1.0;
    {
        std::vector<double> ph(d);
        op.apply(h.values, ph);
        rep.leading_eigenvalue = dot(ph, h.values) / dot(h.values, h.values);
    }
    double prev = -1.0;
    int settled = 0;
    int it = 0;
    for (; it < max_iter; ++it) {
        op.apply(q1, p1);
        op.apply(q2, p2);
        deflate(p1);
        deflate(p2);
        const double h11 = dot(q1, p1), h12 = dot(q1, p2);
        const double h21 = dot(q2, p1), h22 = dot(q2, p2);
        const double mu = max_eig_modulus_2x2(h11, h12, h21, h22);
        const double growth = std::sqrt(dot(p1, p1) + dot(p2, p2));
        if (growth < 1e-13) {
            // P^k annihilates the complement: nilpotent on it.
            rep.second_modulus = 0.0;
            rep.tolerance_achieved = growth;
            rep.iterations = it + 1;
            return rep;
        }
        q1.swap(p1);
        q2.swap(p2);
        orthonormalize(q1, q2);
        const double change = std::abs(mu - prev);
        prev = mu;
        rep.second_modulus = mu;
        rep.tolerance_achieved = change;
        settled = change < tol ? settled + 1 : 0;
        if (settled >= 3) break;
    }
    rep.iterations = std::min(it + 1, max_iter);
    if (settled < 3) {
        std::ostringstream os;
        os << "spectral_gap did not converge in " << max_iter << " iterations (estimate "
           << rep.second_modulus << ")";
        throw ConvergenceError(os.str());
    }
    rep.mixing = rep.second_modulus < 1.0 - 1e-9;
    return rep;
}

namespace {

struct PowerResult {
    std::complex<double> lambda;
    double change = 0.0;
    bool converged = false;
    int iterations = 0;
    double windowed_modulus = 0.0;
};

PowerResult complex_power(const DiscretizedOperator& op, double tol, int max_iter) {
    const std::size_t d = op.dimension();
    std::vector<std::complex<double>> u(d, 1.0), pu(d);
    double norm = std::sqrt(static_cast<double>(d));
    for (auto& x : u) x /= norm;
    PowerResult r;
    std::complex<double> prev{0.0, 0.0};
    int settled = 0;
    constexpr int kWindow = 64;
    std::vector<double> log_growth;
    log_growth.reserve(static_cast<std::size_t>(std::min(max_iter, 1 << 16)));
    for (int it = 0; it < max_iter; ++it) {
        op.apply(u, pu);
        std::complex<double> num{0.0, 0.0};
        double nn = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            num += std::conj(u[i]) * pu[i];
            nn += std::norm(pu[i]);
        }
        r.lambda = num;  // u has unit norm
        const double g = std::sqrt(nn);
        r.iterations = it + 1;
        if (!(g > 0.0)) {
            r.lambda = 0.0;
            r.converged = true;
            r.windowed_modulus = 0.0;
            return r;
        }
        log_growth.push_back(std::log(g));
        for (std::size_t i = 0; i < d; ++i) u[i] = pu[i] / g;
        r.change = std::abs(r.lambda - prev);
        prev = r.lambda;
        settled = r.change <= tol * std::max(1.0, std::abs(r.lambda)) ? settled + 1 : 0;
        if (settled >= 3) {
            r.converged = true;
            break;
        }
    }
    const std::size_t w = std::min<std::size_t>(kWindow, log_growth.size());
    double s = 0.0;
    for (std::size_t i = log_growth.size() - w; i < log_growth.size(); ++i) s += log_growth[i];
    r.windowed_modulus = w ? std::exp(s / static_cast<double>(w)) : 0.0;
    return r;
}

}  // namespace

std::complex<double> leading_eigenvalue(const DiscretizedOperator& op, double tol, int max_iter) {
    const PowerResult r = complex_power(op, tol, max_iter);
    if (!r.converged) {
        std::ostringstream os;
        os << "leading_eigenvalue: no dominant eigenvalue after " << max_iter
           << " iterations (z=" << op.twist_z() << ", last change " << r.change << ")";
        throw ConvergenceError(os.str());
    }
    return r.lambda;
}

ModulusEstimate dominant_modulus(const DiscretizedOperator& op, double tol, int max_iter) {
    const PowerResult r = complex_power(op, tol, max_iter);
    ModulusEstimate m;
    m.converged = r.converged;
    m.iterations = r.iterations;
    m.modulus = r.converged ? std::abs(r.lambda) : r.windowed_modulus;
    return m;
}

void write_sparse(std::ostream& os, long long rows, long long cols,
                  const std::vector<SparseEntry>& entries) {
    os << "RDE-SPARSE v1\n" << rows << ' ' << cols << ' ' << entries.size() << '\n';
    os << std::setprecision(17);
    for (const SparseEntry& e : entries) {
        os << e.row << ' ' << e.col << ' ' << e.value.real() << ' ' << e.value.imag() << '\n';
    }
}

void write_operator(std::ostream& os, const DiscretizedOperator& op) {
    const auto d = static_cast<long long>(op.dimension());
    write_sparse(os, d, d, op.entries());
}

void write_density(std::ostream& os, const StationaryDensity& h) {
    std::vector<SparseEntry> e;
    for (std::size_t i = 0; i < h.values.size(); ++i) {
        if (h.values[i] != 0.0) e.push_back({static_cast<long long>(i), 0, h.values[i]});
    }
    write_sparse(os, static_cast<long long>(h.values.size()), 1, e);
}

SparseText read_sparse(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("RDE-SPARSE v1", 0) != 0) {
        throw InvalidArgument("missing 'RDE-SPARSE v1' header");
    }
    SparseText out;
    long long nnz = 0;
    if (!(is >> out.rows >> out.cols >> nnz) || out.rows < 0 || out.cols < 0 || nnz < 0) {
        throw InvalidArgument("bad 'rows cols nnz' line");
    }
    out.entries.reserve(static_cast<std::size_t>(nnz));
    for (long long k = 0; k < nnz; ++k) {
        SparseEntry e;
        double re = 0.0, im = 0.0;
        if (!(is >> e.row >> e.col >> re >> im)) {
            std::ostringstream os;
            os << "entry " << k << " is malformed or missing";
            throw InvalidArgument(os.str());
        }
        if (e.row < 0 || e.row >= out.rows || e.col < 0 || e.col >= out.cols) {
            std::ostringstream os;
            os << "entry " << k << " index out of range";
            throw InvalidArgument(os.str());
        }
        e.value = {re, im};
        out.entries.push_back(e);
    }
    return out;
}

}  // namespace rde
