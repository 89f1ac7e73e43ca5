#include "doctest.h"
#include "support.hpp"

#include "spectemp/errors.hpp"
#include "spectemp/model.hpp"

#include <cstdio>
#include <filesystem>

using namespace spectemp;
using namespace spectemp::model;
using testing_support::gaussian_tensor;
using testing_support::permutation_matrix;
using testing_support::random_graph;

namespace {

ModelConfig small_config(Variant variant = Variant::Linear, AdjacencyMode mode = AdjacencyMode::Provided) {
    ModelConfig c;
    c.nodes = 4;
    c.lookback = 8;
    c.horizon = 3;
    c.dims = 2;
    c.blocks = 2;
    c.basis = graph::BasisSpec::gegenbauer(3, 1.0);
    c.modes = 4;
    c.decomp_window = 3;
    c.variant = variant;
    c.adjacency_mode = mode;
    return c;
}

// Moves parameters off the identity so that every path contributes.
void perturb(ModelState& s, std::mt19937_64& rng, double scale = 0.3) {
    std::normal_distribution<double> normal(0.0, scale);
    for (auto& [name, m] : s.params) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += normal(rng);
    }
}

Tensor3 permute_nodes(const Tensor3& x, const std::vector<int>& perm) {
    Tensor3 out(x.nodes(), x.steps(), x.dims());
    for (int n = 0; n < x.nodes(); ++n)
        for (int t = 0; t < x.steps(); ++t)
            for (int d = 0; d < x.dims(); ++d) out(perm[n], t, d) = x(n, t, d);
    return out;
}

} // namespace

TEST_CASE("pearson adjacency") {
    std::mt19937_64 rng(1);
    Tensor3 x = gaussian_tensor(3, 50, 1, rng);
    for (int t = 0; t < 50; ++t) x(1, t, 0) = x(0, t, 0);
    for (int t = 0; t < 50; ++t) x(2, t, 0) = -2.0 * x(0, t, 0) + 1.0;
    const Matrix a = pearson_adjacency(x);
    CHECK(a(0, 1) == doctest::Approx(1.0));
    CHECK(a(0, 2) == doctest::Approx(1.0));
    for (int i = 0; i < 3; ++i) CHECK(a(i, i) == 0.0);

    const Tensor3 noise = gaussian_tensor(2, 2000, 1, rng);
    CHECK(pearson_adjacency(noise)(0, 1) < 0.1);

    Tensor3 flat = gaussian_tensor(3, 20, 2, rng);
    for (int t = 0; t < 20; ++t)
        for (int d = 0; d < 2; ++d) flat(2, t, d) = 4.0;
    const Matrix b = pearson_adjacency(flat);
    CHECK(b(2, 0) == 0.0);
    CHECK(b(1, 2) == 0.0);
    CHECK((b - b.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(b.minCoeff() >= 0.0);
    CHECK(b.maxCoeff() <= 1.0);

    CHECK_THROWS_AS(pearson_adjacency(Tensor3(2, 1, 1)), ShapeError);
}

TEST_CASE("learned adjacency is a symmetric row-stochastic average") {
    std::mt19937_64 rng(2);
    auto c = small_config(Variant::Linear, AdjacencyMode::Learned);
    const ModelState s = init_state(c, Matrix(), rng);
    const Matrix a = learned_adjacency(s, c, gaussian_tensor(4, 8, 2, rng));
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(a.minCoeff() >= 0.0);
    CHECK(a.maxCoeff() <= 1.0);
    CHECK(a.sum() == doctest::Approx(4.0));
}

TEST_CASE("identity-initialized block is close to the identity map") {
    std::mt19937_64 rng(3);
    for (auto basis : graph::kAllBases) {
        auto c = small_config();
        c.blocks = 1;
        c.modes = c.lookback;
        c.basis.kind = basis;
        c.basis.jacobi_a = c.basis.jacobi_b = 0.5;
        CAPTURE(graph::to_string(basis));
        const ModelState s = init_state(c, random_graph(4, 0.6, rng), rng);
        const Tensor3 x = gaussian_tensor(4, 8, 2, rng);
        const Tensor3 z = embed(x, s, c);
        CHECK(std::sqrt((z - x).squared_norm() / x.squared_norm()) < 0.05);
    }
}

TEST_CASE("linear variant obeys superposition with a fixed graph") {
    std::mt19937_64 rng(4);
    for (auto mode : {AdjacencyMode::Provided, AdjacencyMode::Pearson}) {
        auto c = small_config(Variant::Linear, mode);
        ModelState s = init_state(c, random_graph(4, 0.7, rng), rng);
        perturb(s, rng);
        const Tensor3 x1 = gaussian_tensor(4, 8, 2, rng);
        const Tensor3 x2 = gaussian_tensor(4, 8, 2, rng);
        const Tensor3 lhs = forward(0.7 * x1 + (-1.3) * x2, s, c);
        const Tensor3 rhs = 0.7 * forward(x1, s, c) + (-1.3) * forward(x2, s, c);
        CHECK(max_abs_diff(lhs, rhs) < 1e-8);
    }
}

TEST_CASE("forward shapes, determinism and head") {
    std::mt19937_64 rng(5);
    for (auto variant : {Variant::Linear, Variant::Nonlinear}) {
        auto c = small_config(variant);
        ModelState s = init_state(c, random_graph(4, 0.7, rng), rng);
        perturb(s, rng, 0.1);
        const Tensor3 x = gaussian_tensor(4, 8, 2, rng);
        const Tensor3 y = forward(x, s, c);
        CHECK(y.nodes() == 4);
        CHECK(y.steps() == 3);
        CHECK(y.dims() == 2);
        CHECK(y.data() == forward(x, s, c).data());
        const Tensor3 z = embed(x, s, c);
        CHECK(z.same_shape(x));
        CHECK(s.all_finite());

        // The head is a plain linear map of the packed representation.
        const Matrix want = z.packed() * s.params.at("head");
        CHECK((Tensor3::from_packed(want, 3, 2).data() == y.data()));

        s.params["head"].setZero();
        CHECK(forward(x, s, c).squared_norm() == 0.0);
        CHECK_THROWS_AS(forward(gaussian_tensor(4, 7, 2, rng), s, c), ShapeError);
        CHECK_THROWS_AS(forward(gaussian_tensor(3, 8, 2, rng), s, c), ShapeError);
    }
}

TEST_CASE("config validation") {
    auto c = small_config();
    c.blocks = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.modes = 9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.horizon = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.basis.degree = -1;
    CHECK_THROWS(c.validate());

    const auto round = config_from_json(to_json(small_config(Variant::Nonlinear)));
    CHECK(to_json(round) == to_json(small_config(Variant::Nonlinear)));
}

TEST_CASE("loss") {
    Tensor3 y(2, 3, 1, 0.5);
    CHECK(loss(y, y) == 0.0);
    Tensor3 shifted = y + Tensor3(2, 3, 1, 1.0);
    CHECK(loss(shifted, y) == doctest::Approx(2.0));
    std::mt19937_64 rng(6);
    for (int i = 0; i < 20; ++i) CHECK(loss(gaussian_tensor(2, 3, 2, rng), gaussian_tensor(2, 3, 2, rng)) >= 0.0);
    CHECK_THROWS_AS(loss(y, Tensor3(2, 2, 1)), ShapeError);
}

TEST_CASE("batched forward matches per-window forward") {
    std::mt19937_64 rng(7);
    auto c = small_config(Variant::Nonlinear, AdjacencyMode::Learned);
    ModelState s = init_state(c, Matrix(), rng);
    perturb(s, rng, 0.1);
    std::vector<Tensor3> xs{gaussian_tensor(4, 8, 2, rng), gaussian_tensor(4, 8, 2, rng)};
    ad::Tape tape;
    const auto params = bind_parameters(tape, s, false);
    const auto out = forward_graph(tape, params, s, c, pack_batch(xs));
    const auto preds = unpack_batch(out.prediction.value(), 4, 3, 2);
    for (int b = 0; b < 2; ++b) CHECK(max_abs_diff(preds[b], forward(xs[b], s, c)) < 1e-12);
}

TEST_CASE("permuting variables and adjacency permutes the forecast") {
    std::mt19937_64 rng(8);
    for (auto variant : {Variant::Linear, Variant::Nonlinear}) {
        auto c = small_config(variant);
        // Per-node spectral weights are tied to node identity, so share them.
        c.share_phi_nodes = true;
        const Matrix a = random_graph(4, 0.7, rng);
        ModelState s = init_state(c, a, rng);
        perturb(s, rng, 0.2);
        const std::vector<int> perm{2, 0, 3, 1};
        const Matrix p = permutation_matrix(perm);
        ModelState sp = s;
        set_adjacency(sp, p * a * p.transpose());
        const Tensor3 x = gaussian_tensor(4, 8, 2, rng);
        const Tensor3 y = forward(x, s, c);
        const Tensor3 yp = forward(permute_nodes(x, perm), sp, c);
        CHECK(max_abs_diff(yp, permute_nodes(y, perm)) < 1e-10);
    }
}

TEST_CASE("checkpoint round trip") {
    std::mt19937_64 rng(9);
    for (auto mode : {AdjacencyMode::Provided, AdjacencyMode::Learned}) {
        auto c = small_config(Variant::Nonlinear, mode);
        c.projector = ProjectorKind::Random;
        ModelState s = init_state(c, random_graph(4, 0.7, rng), rng);
        perturb(s, rng, 0.1);
        const auto path = std::filesystem::temp_directory_path() / "spectemp_test_model.ckpt";
        save_checkpoint(path.string(), c, s);
        const auto [c2, s2] = load_checkpoint(path.string());
        CHECK(to_json(c2) == to_json(c));
        CHECK(s2.params.size() == s.params.size());
        for (const auto& [name, m] : s.params) CHECK(s2.params.at(name) == m);
        CHECK(s2.modes == s.modes);
        const Tensor3 x = gaussian_tensor(4, 8, 2, rng);
        CHECK(forward(x, s2, c2).data() == forward(x, s, c).data());

        std::FILE* f = std::fopen(path.string().c_str(), "r+b");
        std::fputs("XXXX", f);
        std::fclose(f);
        CHECK_THROWS(load_checkpoint(path.string()));
        std::filesystem::remove(path);
    }
    CHECK_THROWS(load_checkpoint("/nonexistent/model.ckpt"));
}
