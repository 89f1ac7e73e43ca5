#pragma once

#include "spectemp/tensor.hpp"

#include <cmath>
#include <random>

namespace testing_support {

using spectemp::Matrix;
using spectemp::Tensor3;

inline Matrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

inline Tensor3 gaussian_tensor(int n, int t, int d, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor3 x(n, t, d);
    for (double& v : x.data()) v = normal(rng);
    return x;
}

// Erdos-Renyi graph with uniform (0.5, 1.5) weights.
inline Matrix random_graph(int n, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (uni(rng) < p) a(i, j) = a(j, i) = 0.5 + uni(rng);
    return a;
}

inline double rel_err(const Matrix& got, const Matrix& want) {
    const double denom = want.norm();
    return denom > 0.0 ? (got - want).norm() / denom : (got - want).norm();
}

inline Matrix permutation_matrix(const std::vector<int>& perm) {
    const int n = static_cast<int>(perm.size());
    Matrix p = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) p(perm[i], i) = 1.0;
    return p;
}

} // namespace testing_support
