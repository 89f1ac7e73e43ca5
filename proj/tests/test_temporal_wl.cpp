#include "doctest.h"
#include "support.hpp"

#include "spectemp/errors.hpp"
#include "spectemp/model.hpp"
#include "spectemp/temporal_wl.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace spectemp;
using namespace spectemp::wl;

namespace {

Dtdg from_text(const std::string& text) {
    std::istringstream is(text);
    return parse_dtdg(is);
}

Dtdg random_dtdg(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_dist(1, 8), t_dist(1, 4), d_dist(0, 1), f_dist(0, 2);
    std::bernoulli_distribution edge(0.35);
    const int n = n_dist(rng);
    const int steps = t_dist(rng);
    const int dims = d_dist(rng);
    Dtdg g(n, dims);
    for (int t = 0; t < steps; ++t) {
        std::vector<std::pair<int, int>> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (edge(rng)) edges.emplace_back(u, v);
        Matrix x(n, dims);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 0.5 * f_dist(rng);
        g.add_snapshot(std::move(edges), std::move(x));
    }
    return g;
}

std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

Dtdg featureless(int n, const std::vector<std::vector<std::pair<int, int>>>& snapshots) {
    Dtdg g(n, 0);
    for (const auto& e : snapshots) g.add_snapshot(e, Matrix(n, 0));
    return g;
}

} // namespace

TEST_CASE("initial colors") {
    const Dtdg plain = featureless(4, {{{0, 1}, {1, 2}}, {{2, 3}}});
    const auto c0 = init_colors(plain);
    CHECK(c0.distinct() == 1);

    Dtdg distinct(3, 1);
    Matrix x(3, 1);
    x << 0.1, 0.2, 0.3;
    distinct.add_snapshot({{0, 1}}, x);
    Matrix y(3, 1);
    y << 0.3, 0.1, 0.2;
    distinct.add_snapshot({{1, 2}}, y);
    const auto c = init_colors(distinct);
    CHECK(c.distinct() == 3);
    CHECK(c.color(0, 0) == c.color(1, 1));
    CHECK(c.color(2, 0) == c.color(0, 1));

    // Values closer than the quantum share a color.
    Dtdg near(2, 1);
    Matrix z(2, 1);
    z << 1.0, 1.0 + 1e-12;
    near.add_snapshot({}, z);
    CHECK(init_colors(near).distinct() == 1);
}

TEST_CASE("refinement on regular and path graphs") {
    const Dtdg cycle = featureless(5, {{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}}});
    const auto hist = refine_until_stable(cycle);
    for (const auto& s : hist) CHECK(s.distinct() == 1);

    const Dtdg path = featureless(3, {{{0, 1}, {1, 2}}});
    const auto r = refine(path, init_colors(path));
    CHECK(r.color(0, 0) == r.color(2, 0));
    CHECK(r.color(0, 0) != r.color(1, 0));
    CHECK(r.step == 1);

    // The previous-time color separates an otherwise identical snapshot.
    const Dtdg two = featureless(3, {{{0, 1}}, {}});
    const auto s = refine_until_stable(two).back();
    CHECK(s.color(0, 1) != s.color(2, 1));
    CHECK(s.color(0, 1) == s.color(1, 1));
}

TEST_CASE("figure fixtures") {
    const Dtdg left = load_dtdg("fixtures/fig5_left.dtdg");
    const Dtdg right = load_dtdg("fixtures/fig5_right.dtdg");
    REQUIRE(left.nodes() == 6);
    REQUIRE(left.steps() == 2);

    // Left: every node is 2-regular at both times, so A (0) and C (2) collide.
    CHECK_FALSE(distinguishable(left, 0, 2, 1));
    const auto lh = refine_until_stable(left).back();
    CHECK(lh.color(0, 1) == lh.color(2, 1));

    const auto rh = refine_until_stable(right).back();
    std::vector<int> at_end = rh.colors[1];
    std::sort(at_end.begin(), at_end.end());
    CHECK(std::adjacent_find(at_end.begin(), at_end.end()) == at_end.end());
    for (int u = 0; u < 6; ++u)
        for (int v = u + 1; v < 6; ++v) CHECK(distinguishable(right, u, v, 1));
    for (int u = 0; u < 6; ++u) CHECK_FALSE(distinguishable(right, u, u, 1));

    const auto res = wl_test(left, right);
    CHECK(res.verdict == Verdict::NonIsomorphic);
    CHECK(res.separating_step >= 0);
    CHECK(wl_test(left, left).verdict == Verdict::Inconclusive);
    CHECK(wl_test(right, right).verdict == Verdict::Inconclusive);
}

TEST_CASE("triangles with different node features") {
    const std::vector<std::pair<int, int>> tri{{0, 1}, {1, 2}, {0, 2}};
    Dtdg a(3, 1), b(3, 1);
    Matrix xa = Matrix::Zero(3, 1), xb = Matrix::Zero(3, 1);
    xa(0, 0) = 1.0;
    xb(0, 0) = 2.0;
    a.add_snapshot(tri, xa);
    b.add_snapshot(tri, xb);
    CHECK(wl_test(a, b).verdict == Verdict::NonIsomorphic);
    CHECK(wl_test(a, b).separating_step == 0);
    CHECK_THROWS(wl_test(a, featureless(4, {{}})));
}

TEST_CASE("property: refinement never coarsens and stabilizes within N*T steps") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const Dtdg g = random_dtdg(rng);
        const int cap = g.nodes() * g.steps();
        std::vector<ColoringState> states{init_colors(g)};
        for (int l = 0; l < cap + 1; ++l) states.push_back(refine(g, states.back()));
        for (std::size_t l = 0; l + 1 < states.size(); ++l) {
            const auto& a = states[l];
            const auto& b = states[l + 1];
            for (int t = 0; t < g.steps(); ++t)
                for (int u = 0; u < g.nodes(); ++u)
                    for (int v = 0; v < g.nodes(); ++v)
                        if (b.color(u, t) == b.color(v, t)) REQUIRE(a.color(u, t) == a.color(v, t));
            REQUIRE(b.distinct() >= a.distinct());
        }
        // Once stable within the cap the count stays put.
        CHECK(states[cap].distinct() == states[cap + 1].distinct());
        const auto stable = refine_until_stable(g);
        CHECK(static_cast<int>(stable.size()) <= cap + 1);
        CHECK(stable.back().distinct() == states[cap].distinct());
    }
}

TEST_CASE("property: isomorphic graphs are never separated") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const Dtdg g = random_dtdg(rng);
        const auto perm = random_permutation(g.nodes(), rng);
        const Dtdg h = g.permuted(perm);
        CHECK(wl_test(g, h).verdict == Verdict::Inconclusive);
        const auto cg = refine_until_stable(g).back();
        const auto ch = refine_until_stable(h).back();
        for (int t = 0; t < g.steps(); ++t)
            for (int u = 0; u < g.nodes(); ++u)
                for (int v = 0; v < g.nodes(); ++v)
                    CHECK((cg.color(u, t) == cg.color(v, t)) == (ch.color(perm[u], t) == ch.color(perm[v], t)));
    }
}

TEST_CASE("text format round trip and parse errors") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Dtdg g = random_dtdg(rng);
        std::ostringstream os;
        write_dtdg(os, g);
        std::istringstream is(os.str());
        const Dtdg back = parse_dtdg(is);
        REQUIRE(back.steps() == g.steps());
        for (int t = 0; t < g.steps(); ++t) {
            CHECK(back.snapshot(t).edges == g.snapshot(t).edges);
            CHECK(back.snapshot(t).features == g.snapshot(t).features);
        }
    }

    const Dtdg dup = from_text("3 1\n1 0\n0 1\n#\n");
    CHECK(dup.snapshot(0).edges == std::vector<std::pair<int, int>>{{0, 1}});

    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            from_text(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("3 1\n0 1\n0 7\n#\n") == 3);
    CHECK(line_of("3 1\n0 x\n#\n") == 2);
    CHECK(line_of("3 1\n1 1\n#\n") == 2);
    CHECK(line_of("3 x\n") == 1);
    CHECK(line_of("2 1 1\n#\n0.5\n") > 0);
    CHECK(line_of("2 2\n0 1\n#\n") > 0);
    CHECK_THROWS_AS(load_dtdg("/nonexistent.dtdg"), DataError);
}

TEST_CASE("spectral conditions") {
    Dtdg k2(2, 1);
    k2.add_snapshot({{0, 1}}, Matrix::Ones(2, 1));
    const auto r2 = check_spectral_conditions(k2);
    CHECK_FALSE(r2.repeated_eigenvalues);
    REQUIRE(r2.missing.size() == 1);
    CHECK(r2.missing[0].eigenvalue == doctest::Approx(2.0));

    const Dtdg k3 = featureless(3, {{{0, 1}, {1, 2}, {0, 2}}});
    const auto r3 = check_spectral_conditions(k3);
    CHECK(r3.repeated_eigenvalues);
    CHECK(r3.eigenvalues[1] == doctest::Approx(1.5));
    CHECK(r3.eigenvalues[2] == doctest::Approx(1.5));

    std::mt19937_64 rng(24);
    std::normal_distribution<double> normal(0.0, 1.0);
    int clean = 0;
    for (int trial = 0; trial < 50; ++trial) {
        Dtdg path(6, 1);
        for (int t = 0; t < 2; ++t) {
            Matrix x(6, 1);
            for (int i = 0; i < 6; ++i) x(i, 0) = normal(rng);
            path.add_snapshot({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, x);
        }
        const auto r = check_spectral_conditions(path);
        CHECK_FALSE(r.repeated_eigenvalues);
        if (r.missing.empty()) ++clean;
    }
    CHECK(clean >= 48);

    CHECK_THROWS(check_spectral_conditions(load_dtdg("fixtures/fig5_left.dtdg")));
}

TEST_CASE("color table export") {
    const Dtdg path = featureless(3, {{{0, 1}, {1, 2}}});
    std::ostringstream os;
    write_color_table(os, refine_until_stable(path));
    const std::string csv = os.str();
    CHECK(csv.rfind("step,t,node,color\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 1 + 3 * 2);
}

TEST_CASE("nodes exchanged by an automorphism get equal embeddings") {
    // Path 0-1-2 with symmetric features: swapping 0 and 2 is an automorphism.
    using namespace spectemp::model;
    ModelConfig c;
    c.nodes = 3;
    c.lookback = 6;
    c.horizon = 2;
    c.blocks = 2;
    c.modes = 3;
    c.basis = graph::BasisSpec::gegenbauer(2, 1.0);
    c.adjacency_mode = AdjacencyMode::Provided;
    c.share_phi_nodes = true;
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = a(1, 0) = a(1, 2) = a(2, 1) = 1.0;
    std::mt19937_64 rng(25);
    ModelState s = init_state(c, a, rng);
    std::normal_distribution<double> normal(0.0, 0.3);
    for (auto& [name, m] : s.params)
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += normal(rng);

    Tensor3 x(3, 6, 1);
    Dtdg g(3, 1);
    for (int t = 0; t < 6; ++t) {
        const double side = normal(rng), mid = normal(rng);
        x(0, t, 0) = x(2, t, 0) = side;
        x(1, t, 0) = mid;
        Matrix f(3, 1);
        f << side, mid, side;
        g.add_snapshot({{0, 1}, {1, 2}}, f);
    }
    CHECK_FALSE(distinguishable(g, 0, 2, 5, c.basis.degree + 1));
    const Tensor3 z = embed(x, s, c);
    for (int t = 0; t < 6; ++t) CHECK(std::abs(z(0, t, 0) - z(2, t, 0)) < 1e-8);
}
