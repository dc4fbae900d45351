#pragma once

#include "rde/maps.hpp"
#include "rde/observable.hpp"

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rde {

/// Real sparse matrix in compressed-column form.
struct CscMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> col_ptr;  // size cols + 1
    std::vector<int> row_idx;
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }
    double at(int row, int col) const;

    /// y = A x
    template <typename T>
    void multiply(std::span<const T> x, std::span<T> y) const {
        std::fill(y.begin(), y.end(), T{});
        for (int c = 0; c < cols; ++c) {
            const T xc = x[c];
            for (int k = col_ptr[c]; k < col_ptr[c + 1]; ++k) y[row_idx[k]] += values[k] * xc;
        }
    }
};

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// Sums duplicate (row, col) entries and drops exact zeros.
CscMatrix csc_from_triplets(int rows, int cols, std::vector<Triplet> triplets);

struct SparseEntry {
    long long row = 0;
    long long col = 0;
    std::complex<double> value;
};

/// Ulam discretization of a (possibly twisted or doubled) annealed transfer
/// operator. Vectors are cell averages of densities; column i describes where
/// the mass of source cell i goes.
///
/// Doubled operators act on N*N vectors indexed i*N + j, with i the cell of
/// the first coordinate. They keep one Ulam factor per map and never build
/// the Kronecker product.
class DiscretizedOperator {
public:
    static DiscretizedOperator from_matrix(CscMatrix matrix, std::string system_label);

    int grid_size() const { return n_; }
    std::size_t dimension() const;
    bool doubled() const { return doubled_; }
    bool twisted() const { return twist_.has_value(); }
    std::complex<double> twist_z() const { return twist_ ? twist_->z : 0.0; }
    const Observable* twist_observable() const { return twist_ ? &twist_->phi : nullptr; }
    const std::string& system_label() const { return label_; }

    /// Untwisted 1D matrix (the annealed Ulam matrix).
    const CscMatrix& matrix() const { return base_; }
    /// Per-map factors and weights of a doubled operator.
    const std::vector<CscMatrix>& factors() const { return factors_; }
    const std::vector<double>& weights() const { return weights_; }
    /// Cell averages of e^{z phi} (empty when untwisted).
    const std::vector<std::complex<double>>& twist_weights() const { return twist_weights_; }

    /// out = P in. The real overload requires an untwisted operator.
    void apply(std::span<const double> in, std::span<double> out) const;
    void apply(std::span<const std::complex<double>> in,
               std::span<std::complex<double>> out) const;

    /// Materialized entries sorted by (col, row). Doubled operators throw a
    /// ResourceError above 4e7 entries.
    std::vector<SparseEntry> entries() const;

private:
    friend DiscretizedOperator twist_operator(const DiscretizedOperator&, const Observable&,
                                              std::complex<double>);
    friend DiscretizedOperator doubled_operator(const RandomSystem&, int, int);

    struct Twist {
        Observable phi;
        std::complex<double> z;
    };

    int n_ = 0;
    bool doubled_ = false;
    std::string label_;
    CscMatrix base_;
    std::vector<CscMatrix> factors_;
    std::vector<double> weights_;
    std::optional<Twist> twist_;
    std::vector<std::complex<double>> twist_weights_;
};

struct StationaryDensity {
    std::vector<double> values;
    int grid_size = 0;
    double residual = 0.0;
    int iterations = 0;
};

struct SpectralReport {
    std::complex<double> leading_eigenvalue{1.0, 0.0};
    double second_modulus = 0.0;
    int iterations = 0;
    double tolerance_achieved = 0.0;
    /// False when second_modulus is 1 to within 1e-9 (no gap).
    bool mixing = true;
};

/// Spectral radius estimate from the growth of |P^n v|.
struct ModulusEstimate {
    double modulus = 0.0;
    bool converged = false;
    int iterations = 0;
};

CscMatrix ulam_matrix_csc(const PiecewiseMap& map, int n);
DiscretizedOperator ulam_matrix(const PiecewiseMap& map, int n);
DiscretizedOperator annealed_operator(const RandomSystem& system, int n);

/// P_z f = P(e^{z phi} f).
DiscretizedOperator twisted_operator(const RandomSystem& system, const Observable& phi,
                                     std::complex<double> z, int n);

/// Twisted copy of an untwisted 1D operator (reuses the assembled matrix).
DiscretizedOperator twist_operator(const DiscretizedOperator& base, const Observable& phi,
                                   std::complex<double> z);

inline constexpr int kDoubledGridGuard = 256;

/// Sum_w p_w U_w (x) U_w on the N x N grid.
DiscretizedOperator doubled_operator(const RandomSystem& system, int n,
                                     int guard = kDoubledGridGuard);

/// Power iteration from the uniform vector; stops when successive iterates
/// differ by less than tol in L1(m).
StationaryDensity stationary_density(const DiscretizedOperator& op, double tol = 1e-12,
                                     int max_iter = 100000);

/// Deflated power iteration v -> Pv - (int Pv dm) h.
SpectralReport spectral_gap(const DiscretizedOperator& op, const StationaryDensity& h,
                            double tol = 1e-8, int max_iter = 100000);

/// Dominant eigenvalue with Rayleigh-quotient readout. Throws
/// ConvergenceError when successive readouts do not settle within tol.
std::complex<double> leading_eigenvalue(const DiscretizedOperator& op, double tol = 1e-14,
                                        int max_iter = 100000);

/// Windowed geometric growth rate of |P^n v|; does not throw.
ModulusEstimate dominant_modulus(const DiscretizedOperator& op, double tol = 1e-9,
                                 int max_iter = 20000);

/// Sparse text format:
///   RDE-SPARSE v1
///   rows cols nnz
///   row col re im      (one line per entry)
void write_sparse(std::ostream& os, long long rows, long long cols,
                  const std::vector<SparseEntry>& entries);
void write_operator(std::ostream& os, const DiscretizedOperator& op);
void write_density(std::ostream& os, const StationaryDensity& h);

struct SparseText {
    long long rows = 0;
    long long cols = 0;
    std::vector<SparseEntry> entries;
};
SparseText read_sparse(std::istream& is);

}  // namespace rde
