#pragma once

#include "spectemp/errors.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace spectemp::graph {

enum class Basis { Monomial, Bernstein, Chebyshev2, Gegenbauer, Jacobi };

inline constexpr Basis kAllBases[] = {Basis::Monomial, Basis::Bernstein, Basis::Chebyshev2,
                                      Basis::Gegenbauer, Basis::Jacobi};

std::string_view to_string(Basis basis);
Basis parse_basis(std::string_view name);

// Which matrix the Monomial basis is a power series in. The other bases have a
// fixed argument: the orthogonal ones run on A_hat = I - L_hat and Bernstein is
// defined directly in lambda.
enum class MonomialDomain { Adjacency, Laplacian };

// A polynomial family truncated at `degree`. P_k is always viewed as a function
// of the Laplacian eigenvalue lambda in [0, 2]; the orthogonal families are
// evaluated at x = 1 - lambda.
struct BasisSpec {
    Basis kind = Basis::Gegenbauer;
    int degree = 4;
    double alpha = 1.0;     // Gegenbauer parameter, alpha > -1/2 and alpha != 0
    double jacobi_a = 0.5;  // Jacobi pair, both > -1
    double jacobi_b = 0.5;
    MonomialDomain monomial_domain = MonomialDomain::Adjacency;

    static BasisSpec monomial(int degree, MonomialDomain domain = MonomialDomain::Adjacency);
    static BasisSpec bernstein(int degree);
    static BasisSpec chebyshev2(int degree);
    static BasisSpec gegenbauer(int degree, double alpha);
    // Gegenbauer specialisation of Jacobi: a = b = alpha - 1/2.
    static BasisSpec jacobi(int degree, double alpha);
    static BasisSpec jacobi(int degree, double a, double b);

    // Throws ParameterError when the family parameters are illegal.
    void validate() const;
};

// P_k at x in [-1, 1] (lambda = 1 - x). Bernstein uses the binomial closed
// form; the other families run their three-term recurrence.
double basis_eval(const BasisSpec& spec, int k, double x);

// P_0(x) .. P_degree(x).
std::vector<double> basis_values(const BasisSpec& spec, double x);

// Gram matrix G[j][k] = integral over [-1, 1] of P_j P_k (1 - x)^a (1 + x)^b,
// by adaptive Gauss-Kronrod quadrature after x = cos(theta).
std::vector<std::vector<double>> basis_gram(const BasisSpec& spec, double a, double b);

// max over j != k of |G[j][k]| / sqrt(G[j][j] G[k][k]).
double orthogonality_residual(const BasisSpec& spec, double a, double b);

// Filter response argument for eigenvalue lambda.
inline double lambda_to_x(double lambda) { return 1.0 - lambda; }

namespace detail {

struct JacobiStep {
    double shift_coef;  // multiplies A_hat * P_{k-1}
    double self_coef;   // multiplies P_{k-1}
    double prev_coef;   // multiplies P_{k-2}
};

inline JacobiStep jacobi_step(int k, double a, double b) {
    const double s = 2.0 * k + a + b;
    const double denom = 2.0 * k * (k + a + b) * (s - 2.0);
    return {(s - 1.0) * s * (s - 2.0) / denom, (s - 1.0) * (a * a - b * b) / denom,
            -2.0 * (k + a - 1.0) * (k + b - 1.0) * s / denom};
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

} // namespace detail

// Runs the basis recurrence on an arbitrary value type, returning
// [P_0(A_hat) v, ..., P_K(A_hat) v]. `ops` must provide
//   V shift(const V&)                          -> A_hat * v
//   V scale(double, const V&)                  -> a * v
//   V lin(double, const V&, double, const V&)  -> a * u + b * w
// so the same coefficients drive both the dense filter and the autodiff
// model. P_k(A_hat) is never formed as a matrix.
template <class V, class Ops>
std::vector<V> polynomial_terms(const BasisSpec& spec, const V& v, Ops& ops) {
    spec.validate();
    const int K = spec.degree;
    std::vector<V> terms;
    terms.reserve(K + 1);

    switch (spec.kind) {
    case Basis::Monomial: {
        terms.push_back(v);
        for (int k = 1; k <= K; ++k) {
            const V& prev = terms.back();
            if (spec.monomial_domain == MonomialDomain::Adjacency) {
                terms.push_back(ops.shift(prev));
            } else {
                // L_hat v = v - A_hat v
                terms.push_back(ops.lin(1.0, prev, -1.0, ops.shift(prev)));
            }
        }
        break;
    }
    case Basis::Chebyshev2:
    case Basis::Gegenbauer: {
        const double alpha = spec.kind == Basis::Chebyshev2 ? 1.0 : spec.alpha;
        terms.push_back(v);
        if (K >= 1) terms.push_back(ops.scale(2.0 * alpha, ops.shift(v)));
        for (int k = 2; k <= K; ++k) {
            const double c1 = 2.0 * (k + alpha - 1.0) / k;
            const double c2 = -(k + 2.0 * alpha - 2.0) / k;
            terms.push_back(ops.lin(c1, ops.shift(terms[k - 1]), c2, terms[k - 2]));
        }
        break;
    }
    case Basis::Jacobi: {
        const double a = spec.jacobi_a;
        const double b = spec.jacobi_b;
        terms.push_back(v);
        if (K >= 1) terms.push_back(ops.lin(0.5 * (a - b), v, 0.5 * (a + b + 2.0), ops.shift(v)));
        for (int k = 2; k <= K; ++k) {
            const auto c = detail::jacobi_step(k, a, b);
            V head = ops.lin(c.shift_coef, ops.shift(terms[k - 1]), c.self_coef, terms[k - 1]);
            terms.push_back(ops.lin(1.0, head, c.prev_coef, terms[k - 2]));
        }
        break;
    }
    case Basis::Bernstein: {
        // C(K,k) (I - L_hat/2)^{K-k} (L_hat/2)^k v with L_hat/2 = (I - A_hat)/2.
        std::vector<V> half_lap_powers;
        half_lap_powers.reserve(K + 1);
        half_lap_powers.push_back(v);
        for (int k = 1; k <= K; ++k) {
            const V& p = half_lap_powers.back();
            half_lap_powers.push_back(ops.lin(0.5, p, -0.5, ops.shift(p)));
        }
        for (int k = 0; k <= K; ++k) {
            V cur = half_lap_powers[k];
            for (int i = 0; i < K - k; ++i) cur = ops.lin(0.5, cur, 0.5, ops.shift(cur));
            terms.push_back(ops.scale(detail::binomial(K, k), cur));
        }
        break;
    }
    }
    return terms;
}

} // namespace spectemp::graph
