#include "spectemp/spectral_graph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace spectemp::graph {

Adjacency::Adjacency(Matrix weights, bool allow_self_loops)
    : weights_(std::move(weights)), self_loops_(allow_self_loops) {
    if (weights_.rows() != weights_.cols()) {
        throw ShapeError("adjacency must be square");
    }
    const auto n = weights_.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double w = weights_(i, j);
            if (!std::isfinite(w)) throw ParameterError("adjacency has a non-finite weight");
            if (w < 0.0) throw ParameterError("adjacency weights must be nonnegative");
            if (std::abs(w - weights_(j, i)) > 1e-12) {
                throw ShapeError("adjacency must be symmetric");
            }
        }
        if (!self_loops_ && weights_(i, i) != 0.0) {
            throw ParameterError("adjacency has a self-loop but self-loops are disabled");
        }
    }
}

bool GraphSpectrum::has_repeated_eigenvalues(double tol) const {
    for (Eigen::Index i = 1; i < eigenvalues.size(); ++i) {
        if (std::abs(eigenvalues(i) - eigenvalues(i - 1)) < tol) return true;
    }
    return false;
}

void FilterBank::validate() const {
    basis.validate();
    if (coefficients.rows() != basis.degree + 1) {
        throw ShapeError("filter coefficients must have degree + 1 rows");
    }
    if (coefficients.cols() < 1) {
        throw ShapeError("filter coefficients need at least one column");
    }
}

Matrix normalized_laplacian(const Adjacency& adj) {
    const Matrix& a = adj.weights();
    const Eigen::Index n = a.rows();
    Vector inv_sqrt_deg(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double deg = a.row(i).sum();
        inv_sqrt_deg(i) = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    Matrix lap(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = (i == j) ? a.row(i).sum() : 0.0;
            lap(i, j) = inv_sqrt_deg(i) * (d - a(i, j)) * inv_sqrt_deg(j);
        }
    }
    // Symmetric by construction up to rounding in the products.
    return 0.5 * (lap + lap.transpose());
}

Matrix shifted_adjacency(const Matrix& laplacian) {
    return Matrix::Identity(laplacian.rows(), laplacian.cols()) - laplacian;
}

GraphSpectrum eigendecompose(const Matrix& laplacian) {
    if (laplacian.rows() != laplacian.cols()) {
        throw ShapeError("eigendecompose: matrix must be square");
    }
    if ((laplacian - laplacian.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw ShapeError("eigendecompose: matrix must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigendecompose: symmetric eigensolver did not converge");
    }
    GraphSpectrum out;
    out.laplacian = laplacian;
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors();
    for (Eigen::Index c = 0; c < out.eigenvectors.cols(); ++c) {
        auto col = out.eigenvectors.col(c);
        for (Eigen::Index r = 0; r < col.size(); ++r) {
            if (std::abs(col(r)) > 1e-12) {
                if (col(r) < 0.0) col *= -1.0;
                break;
            }
        }
    }
    return out;
}

namespace {

struct DenseOps {
    const Matrix& shift_matrix;
    Matrix shift(const Matrix& v) const { return shift_matrix * v; }
    Matrix scale(double a, const Matrix& v) const { return a * v; }
    Matrix lin(double a, const Matrix& u, double b, const Matrix& w) const { return a * u + b * w; }
};

} // namespace

Matrix graph_conv(const FilterBank& bank, const Matrix& laplacian, const Matrix& x) {
    bank.validate();
    if (laplacian.rows() != laplacian.cols() || laplacian.rows() != x.rows()) {
        throw ShapeError("graph_conv: laplacian and signal sizes disagree");
    }
    if (x.cols() != bank.dims()) {
        throw ShapeError("graph_conv: signal has " + std::to_string(x.cols()) +
                         " dims but filter coefficients have " + std::to_string(bank.dims()));
    }
    const Matrix a_hat = shifted_adjacency(laplacian);
    DenseOps ops{a_hat};
    const auto terms = polynomial_terms(bank.basis, x, ops);
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    for (int k = 0; k <= bank.degree(); ++k) {
        out += terms[k] * bank.coefficients.row(k).asDiagonal();
    }
    return out;
}

Matrix filter_response(const FilterBank& bank, const std::vector<double>& lambdas) {
    bank.validate();
    Matrix out(static_cast<Eigen::Index>(lambdas.size()), bank.dims());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const auto p = basis_values(bank.basis, lambda_to_x(lambdas[i]));
        for (int d = 0; d < bank.dims(); ++d) {
            double g = 0.0;
            for (int k = 0; k <= bank.degree(); ++k) g += bank.coefficients(k, d) * p[k];
            out(static_cast<Eigen::Index>(i), d) = g;
        }
    }
    return out;
}

Matrix spectral_oracle_conv(const GraphSpectrum& spectrum, const FilterBank& bank, const Matrix& x) {
    bank.validate();
    if (x.rows() != spectrum.size() || x.cols() != bank.dims()) {
        throw ShapeError("spectral_oracle_conv: signal shape mismatch");
    }
    std::vector<double> lambdas(spectrum.eigenvalues.data(),
                                spectrum.eigenvalues.data() + spectrum.eigenvalues.size());
    const Matrix g = filter_response(bank, lambdas);
    const Matrix& u = spectrum.eigenvectors;
    Matrix out(x.rows(), x.cols());
    for (int d = 0; d < bank.dims(); ++d) {
        out.col(d) = u * (g.col(d).asDiagonal() * (u.transpose() * x.col(d)));
    }
    return out;
}

void write_filter_response_csv(std::ostream& os, const std::vector<double>& lambdas,
                               const Matrix& response) {
    os << "lambda";
    for (Eigen::Index d = 0; d < response.cols(); ++d) os << ",response_dim_" << d;
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        os << lambdas[i];
        for (Eigen::Index d = 0; d < response.cols(); ++d) {
            os << ',' << response(static_cast<Eigen::Index>(i), d);
        }
        os << '\n';
    }
}

SignalDensity signal_density(const GraphSpectrum& spectrum, const Matrix& x) {
    if (x.rows() != spectrum.size()) {
        throw ShapeError("signal_density: signal rows must match graph size");
    }
    const Matrix coeffs = spectrum.eigenvectors.transpose() * x;
    SignalDensity out;
    double running = 0.0;
    for (Eigen::Index i = 0; i < coeffs.rows(); ++i) {
        const double lambda = spectrum.eigenvalues(i);
        running += coeffs.row(i).squaredNorm();
        if (!out.grid.empty() && std::abs(lambda - out.grid.back()) < kEigenvalueTieTolerance) {
            out.cumulative.back() = running;
        } else {
            out.grid.push_back(lambda);
            out.cumulative.push_back(running);
        }
    }
    const std::size_t m = out.grid.size();
    out.density.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double prev = i == 0 ? 0.0 : out.cumulative[i - 1];
        double width = 1.0;
        if (i > 0) {
            width = out.grid[i] - out.grid[i - 1];
        } else if (m > 1) {
            width = out.grid[1] - out.grid[0];
        }
        out.density[i] = std::max(0.0, out.cumulative[i] - prev) / width;
    }
    return out;
}

double weight_fit_residual(const SignalDensity& density, double alpha, const AlphaFitOptions& options) {
    const std::size_t m = density.grid.size();
    double density_sum = 0.0;
    for (double d : density.density) density_sum += d;
    if (!(density_sum > 0.0)) {
        throw NumericalError("weight fit: density is identically zero");
    }
    std::vector<double> weight(m);
    double weight_sum = 0.0;
    const double lo = -1.0 + options.endpoint_clamp;
    const double hi = 1.0 - options.endpoint_clamp;
    for (std::size_t i = 0; i < m; ++i) {
        const double x = std::clamp(lambda_to_x(density.grid[i]), lo, hi);
        weight[i] = std::pow(1.0 - x * x, alpha - 0.5);
        weight_sum += weight[i];
    }
    double r = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double diff = density.density[i] / density_sum - weight[i] / weight_sum;
        r += diff * diff;
    }
    return r;
}

double fit_weight_alpha(const SignalDensity& density, const AlphaFitOptions& options) {
    const int steps =
        static_cast<int>(std::floor((options.alpha_max - options.alpha_min) / options.alpha_step + 1e-9));
    double best_alpha = options.alpha_min;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i) {
        const double alpha = options.alpha_min + i * options.alpha_step;
        const double r = weight_fit_residual(density, alpha, options);
        if (r < best) {
            best = r;
            best_alpha = alpha;
        }
    }
    return best_alpha;
}

} // namespace spectemp::graph
