// Runs every acceptance criterion and prints one PASS/FAIL line each. Exits
// nonzero when any criterion fails. Run from the repository root so that
// configs/ and fixtures/ resolve.
#include "support.hpp"

#include "spectemp/fourier.hpp"
#include "spectemp/frequency_temporal.hpp"
#include "spectemp/harness.hpp"
#include "spectemp/spectral_graph.hpp"
#include "spectemp/temporal_wl.hpp"
#include "spectemp/train.hpp"

#include <boost/math/special_functions/chebyshev.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace spectemp;
using nlohmann::json;
using testing_support::gaussian_matrix;
using testing_support::gaussian_tensor;
using testing_support::random_graph;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json config_file(const std::string& path, const std::vector<std::string>& overrides = {}) {
    harness::ExperimentSpec spec;
    spec.config_path = path;
    spec.overrides = overrides;
    return harness::effective_config(spec);
}

harness::RunSeeds seeds_for(std::uint64_t seed) {
    std::mt19937_64 master(seed);
    return harness::RunSeeds::draw(master);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Outcome oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> n_dist(2, 16), k_dist(0, 6), d_dist(1, 3);
    std::uniform_real_distribution<double> p_dist(0.15, 0.9), alpha_dist(0.1, 2.5);
    double worst = 0.0;
    for (int g = 0; g < 100; ++g) {
        const int n = n_dist(rng);
        const Matrix lap = graph::normalized_laplacian(graph::Adjacency(random_graph(n, p_dist(rng), rng)));
        const auto spectrum = graph::eigendecompose(lap);
        const int dims = d_dist(rng);
        const Matrix x = gaussian_matrix(n, dims, rng);
        for (graph::Basis b : graph::kAllBases) {
            const int k = k_dist(rng);
            const double alpha = alpha_dist(rng);
            graph::FilterBank bank;
            switch (b) {
            case graph::Basis::Monomial: bank.basis = graph::BasisSpec::monomial(k); break;
            case graph::Basis::Bernstein: bank.basis = graph::BasisSpec::bernstein(k); break;
            case graph::Basis::Chebyshev2: bank.basis = graph::BasisSpec::chebyshev2(k); break;
            case graph::Basis::Gegenbauer: bank.basis = graph::BasisSpec::gegenbauer(k, alpha); break;
            case graph::Basis::Jacobi: bank.basis = graph::BasisSpec::jacobi(k, alpha - 0.6, 0.9 - alpha / 2); break;
            }
            bank.coefficients = gaussian_matrix(k + 1, dims, rng);
            const Matrix fast = graph::graph_conv(bank, lap, x);
            const Matrix slow = graph::spectral_oracle_conv(spectrum, bank, x);
            worst = std::max(worst, (fast - slow).norm() / std::max(slow.norm(), 1e-300));
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-10 && secs < 30.0, "max rel error " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome gegenbauer_correctness() {
    bool exact = true;
    for (double alpha : {0.3, 0.5, 1.0, 2.0, 3.7})
        for (double x : {-1.0, -0.35, 0.0, 0.5, 0.9, 1.0}) {
            const auto v = graph::basis_values(graph::BasisSpec::gegenbauer(1, alpha), x);
            exact = exact && v[0] == 1.0 && v[1] == 2.0 * alpha * x;
        }
    double cheb = 0.0;
    for (int i = 0; i <= 40; ++i) {
        const double x = -1.0 + i / 20.0;
        const auto g = graph::basis_values(graph::BasisSpec::gegenbauer(6, 1.0), x);
        for (int k = 0; k <= 6; ++k) {
            cheb = std::max(cheb, std::abs(g[k] - boost::math::chebyshev_u(static_cast<unsigned>(k), x)));
        }
    }
    double resid = 0.0;
    for (double alpha : {0.5, 1.0, 2.0}) {
        resid = std::max(resid, graph::orthogonality_residual(graph::BasisSpec::gegenbauer(6, alpha), alpha - 0.5,
                                                              alpha - 0.5));
    }
    return {exact && cheb < 1e-12 && resid < 1e-6, std::string("P0/P1 exact ") + (exact ? "yes" : "no") +
                                                       ", |C(1) - U| " + fmt(cheb) + ", quadrature residual " +
                                                       fmt(resid)};
}

Outcome dft_suite() {
    std::mt19937_64 rng(103);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int t : {7, 8, 12, 64}) {
        std::vector<double> x(t);
        for (double& v : x) v = normal(rng);
        const auto f = temporal::dft(std::span<const double>(x));
        const auto back = temporal::idft(f);
        double energy = 0.0, spec = 0.0;
        for (int i = 0; i < t; ++i) {
            worst = std::max(worst, std::abs(back[i] - temporal::Complex(x[i], 0.0)));
            energy += x[i] * x[i];
            spec += std::norm(f[i]);
        }
        worst = std::max(worst, std::abs(energy - spec / t));
        for (int k = 1; k < t; ++k) worst = std::max(worst, std::abs(f[k] - std::conj(f[t - k])));
    }
    return {worst < 1e-9, "max deviation " + fmt(worst)};
}

Outcome fdm_identity() {
    std::mt19937_64 rng(104);
    double coarse = 0.0, fine = 0.0;
    bool trend_exact = true;
    for (int t : {7, 12, 24}) {
        const Tensor3 x = gaussian_tensor(5, t, 2, rng);
        temporal::TemporalFdmParams p;
        p.mode_indices = temporal::lowest_modes(t);
        p.weights = temporal::SpectralWeights::identity(5, 2, t);
        p.decomp_window = 3;
        coarse = std::max(coarse, max_abs_diff(temporal::coarse_fdm(x, p), x));
        fine = std::max(fine, max_abs_diff(temporal::fine_fdm(x, p), x));
        p.attention = temporal::AttentionWeights{gaussian_matrix(2, 2, rng), gaussian_matrix(2, 2, rng),
                                                 gaussian_matrix(2, 2, rng), true};
        const Tensor3 trend = gaussian_tensor(5, t, 2, rng);
        const Tensor3 out = temporal::spectral_attention(trend, Tensor3(5, t, 2, 0.0), p);
        trend_exact = trend_exact && out.data() == trend.data();
    }
    return {coarse < 1e-10 && fine < 1e-10 && trend_exact,
            "coarse " + fmt(coarse) + ", fine " + fmt(fine) + ", attention trend exact " + (trend_exact ? "yes" : "no")};
}

Outcome gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(105);
    double worst = 0.0;
    int checked = 0;
    for (auto variant : {model::Variant::Linear, model::Variant::Nonlinear}) {
        model::ModelConfig c;
        c.nodes = 3;
        c.lookback = 8;
        c.horizon = 3;
        c.dims = 1;
        c.blocks = 1;
        c.basis = graph::BasisSpec::gegenbauer(2, 1.0);
        c.modes = 3;
        c.variant = variant;
        c.adjacency_mode = model::AdjacencyMode::Provided;
        auto s = model::init_state(c, random_graph(3, 0.9, rng), rng);
        std::normal_distribution<double> normal(0.0, 0.2);
        for (auto& [name, m] : s.params)
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += normal(rng);
        std::vector<Tensor3> xs, ys;
        for (int b = 0; b < 3; ++b) {
            xs.push_back(gaussian_tensor(3, 8, 1, rng));
            ys.push_back(gaussian_tensor(3, 3, 1, rng));
        }
        const auto exact = train::gradients(s, c, xs, ys);
        const double h = 1e-5;
        for (auto& [name, p] : s.params) {
            Matrix fd(p.rows(), p.cols());
            for (Eigen::Index i = 0; i < p.size(); ++i) {
                const double keep = p.data()[i];
                p.data()[i] = keep + h;
                const double up = train::batch_loss_value(s, c, xs, ys);
                p.data()[i] = keep - h;
                const double down = train::batch_loss_value(s, c, xs, ys);
                p.data()[i] = keep;
                fd.data()[i] = (up - down) / (2.0 * h);
            }
            const Matrix& g = exact.grads.at(name);
            worst = std::max(worst, (g - fd).norm() / std::max({g.norm(), fd.norm(), 1e-10}));
            ++checked;
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 60.0,
            std::to_string(checked) + " parameters, max rel error " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome wl_fixtures() {
    const auto left = wl::load_dtdg("fixtures/fig5_left.dtdg");
    const auto right = wl::load_dtdg("fixtures/fig5_right.dtdg");
    const bool left_fails = !wl::distinguishable(left, 0, 2, 1);
    bool right_all = true;
    for (int u = 0; u < right.nodes(); ++u)
        for (int v = u + 1; v < right.nodes(); ++v) right_all = right_all && wl::distinguishable(right, u, v, 1);

    std::mt19937_64 rng(106);
    std::uniform_int_distribution<int> n_dist(1, 8), t_dist(1, 4), f_dist(0, 2);
    std::bernoulli_distribution edge(0.35);
    int monotone_bad = 0, iso_bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = n_dist(rng), steps = t_dist(rng);
        wl::Dtdg g(n, 1);
        for (int t = 0; t < steps; ++t) {
            std::vector<std::pair<int, int>> edges;
            for (int u = 0; u < n; ++u)
                for (int v = u + 1; v < n; ++v)
                    if (edge(rng)) edges.emplace_back(u, v);
            Matrix x(n, 1);
            for (int i = 0; i < n; ++i) x(i, 0) = f_dist(rng);
            g.add_snapshot(std::move(edges), std::move(x));
        }
        std::vector<wl::ColoringState> states{wl::init_colors(g)};
        for (int l = 0; l < n * steps; ++l) states.push_back(wl::refine(g, states.back()));
        for (std::size_t l = 0; l + 1 < states.size(); ++l)
            for (int t = 0; t < steps; ++t)
                for (int u = 0; u < n; ++u)
                    for (int v = 0; v < n; ++v)
                        if (states[l + 1].color(u, t) == states[l + 1].color(v, t) &&
                            states[l].color(u, t) != states[l].color(v, t)) {
                            ++monotone_bad;
                        }
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        if (wl::wl_test(g, g.permuted(perm)).verdict != wl::Verdict::Inconclusive) ++iso_bad;
    }
    return {left_fails && right_all && monotone_bad == 0 && iso_bad == 0,
            std::string("left (A,C) collide ") + (left_fails ? "yes" : "no") + ", right all distinct " +
                (right_all ? "yes" : "no") + ", monotonicity violations " + std::to_string(monotone_bad) +
                ", isomorphic pairs separated " + std::to_string(iso_bad)};
}

Outcome column_sampling() {
    const json cfg = config_file("configs/theory.json");
    const auto r = harness::column_sampling_experiment(cfg.at("theory").at("lemma"), 1);
    return {r.noisy.violation_rate <= 0.3 && r.exact.max_lhs < 1e-8,
            "violation rate " + fmt(r.noisy.violation_rate) + " over " + std::to_string(r.noisy.lhs.size()) +
                " trials, exact-rank error " + fmt(r.exact.max_lhs)};
}

Outcome convergence_direction() {
    const auto t0 = std::chrono::steady_clock::now();
    const json cfg = config_file("configs/theory.json");
    int wins = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto curves = harness::model_race(cfg, seeds_for(seed));
        const double orth = std::max({curves.at("gegenbauer").back(), curves.at("chebyshev2").back(),
                                      curves.at("jacobi").back()});
        const double plain = std::min(curves.at("monomial").back(), curves.at("bernstein").back());
        if (orth < plain) ++wins;
        detail << (seed > 1 ? "; " : "") << "seed " << seed << " orth max " << fmt(orth) << " vs mono/bern min "
               << fmt(plain);
    }
    const double secs = seconds_since(t0);
    return {wins >= 4 && secs < 600.0,
            std::to_string(wins) + "/5 seeds (" + detail.str() + "), " + fmt(secs) + " s"};
}

Outcome signed_relation() {
    const json cfg = config_file("configs/synth.json");
    int wins = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = harness::signed_relation_experiment(cfg, seed);
        if (r.model_silhouette > r.control_silhouette) ++wins;
        detail << (seed > 1 ? "; " : "") << fmt(r.model_silhouette) << " vs " << fmt(r.control_silhouette);
    }
    return {wins >= 4, std::to_string(wins) + "/5 seeds (model vs control: " + detail.str() + ")"};
}

Outcome forecasting_sanity() {
    const auto t0 = std::chrono::steady_clock::now();
    const json cfg = config_file("configs/train_seasonal.json", {"data.source=seasonal", "data.nodes=8",
                                                                  "data.periods=20", "model.lookback=24",
                                                                  "model.horizon=3"});
    const auto r = harness::train_from_config(cfg, seeds_for(1)).result;
    const double secs = seconds_since(t0);
    const double gain = 1.0 - r.test.mae / r.baseline.mae;
    return {gain >= 0.2 && secs < 300.0, "MAE " + fmt(r.test.mae) + " vs persistence " + fmt(r.baseline.mae) +
                                             " (" + fmt(100.0 * gain) + "% better), " + fmt(secs) + " s"};
}

Outcome ablation_direction() {
    const json cfg = config_file("configs/ablate.json");
    std::vector<harness::AblationVariant> variants;
    for (const auto& v : harness::ablation_variants("design"))
        if (v.id == "ref" || v.id == "B.4" || v.id == "B.6") variants.push_back(v);
    int worse_projector = 0, worse_fine = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = harness::run_variants(cfg, variants, seeds_for(seed));
        if (r[1].test.mae > r[0].test.mae) ++worse_projector;
        if (r[2].test.mae > r[0].test.mae) ++worse_fine;
        detail << (seed > 1 ? "; " : "") << fmt(r[0].test.mae) << '/' << fmt(r[1].test.mae) << '/'
               << fmt(r[2].test.mae);
    }
    return {worse_projector >= 4 && worse_fine >= 4,
            "random projector worse " + std::to_string(worse_projector) + "/5, no fine FDM worse " +
                std::to_string(worse_fine) + "/5 (MAE full/random/no-fine: " + detail.str() + ")"};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"oracle equivalence", oracle_equivalence},
        {"gegenbauer correctness", gegenbauer_correctness},
        {"dft suite", dft_suite},
        {"fdm identity", fdm_identity},
        {"gradient check", gradient_check},
        {"temporal 1-wl fixtures", wl_fixtures},
        {"column sampling bound", column_sampling},
        {"convergence direction", convergence_direction},
        {"signed-relation separation", signed_relation},
        {"forecasting sanity", forecasting_sanity},
        {"ablation direction", ablation_direction},
    };
    // Optional arguments pick criteria by number.
    std::vector<int> picked;
    for (int i = 1; i < argc; ++i) picked.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!picked.empty() && std::find(picked.begin(), picked.end(), id) == picked.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << id << ". " << criteria[i].first << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
