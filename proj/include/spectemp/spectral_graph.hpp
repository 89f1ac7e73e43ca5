#pragma once

#include "spectemp/basis.hpp"
#include "spectemp/tensor.hpp"

#include <iosfwd>
#include <vector>

namespace spectemp::graph {

// Eigenvalues closer than this are treated as one repeated eigenvalue.
inline constexpr double kEigenvalueTieTolerance = 1e-8;

// Dense symmetric nonnegative weight matrix.
class Adjacency {
public:
    Adjacency() = default;
    // Throws ShapeError when non-square or asymmetric (beyond 1e-12), and
    // ParameterError on negative weights or a nonzero diagonal without
    // `allow_self_loops`.
    explicit Adjacency(Matrix weights, bool allow_self_loops = false);

    int size() const { return static_cast<int>(weights_.rows()); }
    const Matrix& weights() const { return weights_; }
    bool allows_self_loops() const { return self_loops_; }

private:
    Matrix weights_;
    bool self_loops_ = false;
};

struct GraphSpectrum {
    Matrix laplacian;
    Vector eigenvalues;  // ascending
    Matrix eigenvectors; // columns, orthonormal

    int size() const { return static_cast<int>(eigenvalues.size()); }
    // True when two consecutive eigenvalues lie within kEigenvalueTieTolerance.
    bool has_repeated_eigenvalues(double tol = kEigenvalueTieTolerance) const;
};

struct FilterBank {
    BasisSpec basis;
    Matrix coefficients; // (K+1) x D

    int degree() const { return basis.degree; }
    int dims() const { return static_cast<int>(coefficients.cols()); }
    void validate() const;
};

struct SignalDensity {
    std::vector<double> grid;       // distinct eigenvalues, ascending
    std::vector<double> density;    // dF / dlambda on the grid
    std::vector<double> cumulative; // F(lambda), nondecreasing
};

// L_hat = D^{-1/2} (D - A) D^{-1/2}. Rows and columns of zero-degree nodes are
// all zero.
Matrix normalized_laplacian(const Adjacency& adj);

// A_hat = I - L_hat.
Matrix shifted_adjacency(const Matrix& laplacian);

// Symmetric eigensolve with ascending eigenvalues. Each eigenvector is signed
// so that its first entry above 1e-12 in magnitude is positive.
GraphSpectrum eigendecompose(const Matrix& laplacian);

// sum_k Theta[k, d] P_k(A_hat) X[:, d], computed by running the basis
// recurrence on N x D blocks.
Matrix graph_conv(const FilterBank& bank, const Matrix& laplacian, const Matrix& x);

// U g(Lambda) U^T X with g_d(lambda) = sum_k Theta[k, d] P_k(1 - lambda).
// Test oracle for graph_conv.
Matrix spectral_oracle_conv(const GraphSpectrum& spectrum, const FilterBank& bank, const Matrix& x);

// g_theta(lambda) per dimension: rows follow `lambdas`, columns the D dims.
Matrix filter_response(const FilterBank& bank, const std::vector<double>& lambdas);

void write_filter_response_csv(std::ostream& os, const std::vector<double>& lambdas,
                               const Matrix& response);

// Cumulative squared spectral energy F over the eigenvalue grid. Repeated
// eigenvalues are merged into one grid point. The density at the first grid
// point uses the width of the first gap (or 1 when there is only one point).
SignalDensity signal_density(const GraphSpectrum& spectrum, const Matrix& x);

struct AlphaFitOptions {
    double alpha_min = -0.49;
    double alpha_max = 5.0;
    double alpha_step = 0.01;
    // x = 1 - lambda is clamped to [-1 + clamp, 1 - clamp] before the weight
    // is evaluated.
    double endpoint_clamp = 1e-6;
};

// Sum of squared differences between the unit-sum normalised density and the
// unit-sum normalised weight (1 - x^2)^(alpha - 1/2) on the density grid.
double weight_fit_residual(const SignalDensity& density, double alpha,
                           const AlphaFitOptions& options = {});

// Grid search for the Gegenbauer alpha whose weight best matches the density.
// Ties go to the smaller alpha. Throws NumericalError on an all-zero density.
double fit_weight_alpha(const SignalDensity& density, const AlphaFitOptions& options = {});

} // namespace spectemp::graph
