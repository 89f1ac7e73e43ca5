#include "spectemp/basis.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spectemp::graph {

std::string_view to_string(Basis basis) {
    switch (basis) {
    case Basis::Monomial: return "monomial";
    case Basis::Bernstein: return "bernstein";
    case Basis::Chebyshev2: return "chebyshev2";
    case Basis::Gegenbauer: return "gegenbauer";
    case Basis::Jacobi: return "jacobi";
    }
    return "unknown";
}

Basis parse_basis(std::string_view name) {
    for (Basis b : kAllBases) {
        if (to_string(b) == name) return b;
    }
    if (name == "chebyshev") return Basis::Chebyshev2;
    throw ConfigError("unknown basis '" + std::string(name) +
                      "' (expected monomial, bernstein, chebyshev2, gegenbauer or jacobi)");
}

BasisSpec BasisSpec::monomial(int degree, MonomialDomain domain) {
    BasisSpec s;
    s.kind = Basis::Monomial;
    s.degree = degree;
    s.monomial_domain = domain;
    return s;
}

BasisSpec BasisSpec::bernstein(int degree) {
    BasisSpec s;
    s.kind = Basis::Bernstein;
    s.degree = degree;
    return s;
}

BasisSpec BasisSpec::chebyshev2(int degree) {
    BasisSpec s;
    s.kind = Basis::Chebyshev2;
    s.degree = degree;
    s.alpha = 1.0;
    return s;
}

BasisSpec BasisSpec::gegenbauer(int degree, double alpha) {
    BasisSpec s;
    s.kind = Basis::Gegenbauer;
    s.degree = degree;
    s.alpha = alpha;
    return s;
}

BasisSpec BasisSpec::jacobi(int degree, double alpha) {
    return jacobi(degree, alpha - 0.5, alpha - 0.5);
}

BasisSpec BasisSpec::jacobi(int degree, double a, double b) {
    BasisSpec s;
    s.kind = Basis::Jacobi;
    s.degree = degree;
    s.alpha = a + 0.5;
    s.jacobi_a = a;
    s.jacobi_b = b;
    return s;
}

void BasisSpec::validate() const {
    if (degree < 0) {
        throw ParameterError("polynomial degree must be >= 0");
    }
    if (kind == Basis::Gegenbauer) {
        if (!(alpha > -0.5)) {
            throw ParameterError("Gegenbauer alpha must exceed -1/2, got " + std::to_string(alpha));
        }
        // P_k vanishes identically for k >= 1 when alpha == 0.
        if (alpha == 0.0) {
            throw ParameterError("Gegenbauer alpha = 0 gives a degenerate basis");
        }
    }
    if (kind == Basis::Jacobi && !(jacobi_a > -1.0 && jacobi_b > -1.0)) {
        throw ParameterError("Jacobi parameters must both exceed -1");
    }
}

namespace {

struct ScalarOps {
    double x;
    double shift(double v) const { return x * v; }
    double scale(double a, double v) const { return a * v; }
    double lin(double a, double u, double b, double w) const { return a * u + b * w; }
};

} // namespace

std::vector<double> basis_values(const BasisSpec& spec, double x) {
    if (spec.kind == Basis::Bernstein) {
        spec.validate();
        std::vector<double> out(spec.degree + 1);
        for (int k = 0; k <= spec.degree; ++k) out[k] = basis_eval(spec, k, x);
        return out;
    }
    ScalarOps ops{x};
    return polynomial_terms(spec, 1.0, ops);
}

double basis_eval(const BasisSpec& spec, int k, double x) {
    spec.validate();
    if (k < 0 || k > spec.degree) {
        throw ParameterError("basis index k outside [0, degree]");
    }
    if (spec.kind == Basis::Bernstein) {
        const int K = spec.degree;
        const double lambda = 1.0 - x;
        return detail::binomial(K, k) * std::pow(1.0 - lambda / 2.0, K - k) *
               std::pow(lambda / 2.0, k);
    }
    return basis_values(spec, x)[k];
}

std::vector<std::vector<double>> basis_gram(const BasisSpec& spec, double a, double b) {
    spec.validate();
    if (a <= -1.0 || b <= -1.0) throw ParameterError("weight exponents must exceed -1");
    const int n = spec.degree + 1;
    std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
    // (1 - cos t)^a (1 + cos t)^b sin t written in half angles stays accurate
    // near both endpoints.
    const double lead = std::pow(2.0, a + b + 1.0);
    for (int j = 0; j < n; ++j) {
        for (int k = j; k < n; ++k) {
            auto f = [&](double t) {
                const double x = std::cos(t);
                const double w = lead * std::pow(std::sin(0.5 * t), 2.0 * a + 1.0) *
                                 std::pow(std::cos(0.5 * t), 2.0 * b + 1.0);
                return basis_eval(spec, j, x) * basis_eval(spec, k, x) * w;
            };
            const double v =
                boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi, 15, 1e-14);
            gram[j][k] = gram[k][j] = v;
        }
    }
    return gram;
}

double orthogonality_residual(const BasisSpec& spec, double a, double b) {
    const auto g = basis_gram(spec, a, b);
    double worst = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j)
        for (std::size_t k = 0; k < g.size(); ++k)
            if (j != k) worst = std::max(worst, std::abs(g[j][k]) / std::sqrt(g[j][j] * g[k][k]));
    return worst;
}

} // namespace spectemp::graph
