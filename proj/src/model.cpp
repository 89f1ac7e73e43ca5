#include "spectemp/model.hpp"

#include "spectemp/errors.hpp"
#include "spectemp/spectral_graph.hpp"

#include <cmath>

namespace spectemp::model {

namespace {

template <class E>
E enum_from(const nlohmann::json& j, const char* key, std::initializer_list<std::pair<const char*, E>> names,
            E fallback) {
    if (!j.contains(key)) return fallback;
    const auto s = j.at(key).get<std::string>();
    for (const auto& [name, value] : names)
        if (s == name) return value;
    std::string valid;
    for (const auto& [name, value] : names) valid += std::string(valid.empty() ? "" : ", ") + name;
    throw ConfigError("unknown value '" + s + "' for " + key + " (valid: " + valid + ")");
}

Matrix block_diag(const Matrix& p, int copies) {
    Matrix out = Matrix::Zero(p.rows() * copies, p.cols() * copies);
    for (int i = 0; i < copies; ++i) out.block(i * p.rows(), i * p.cols(), p.rows(), p.cols()) = p;
    return out;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, sigma);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    return m;
}

int phi_slots(const ModelConfig& c) {
    return (c.share_phi_nodes ? 1 : c.nodes) * (c.share_phi_dims ? 1 : c.dims);
}

struct TapeOps {
    ad::Var shift_matrix;
    int nodes;
    ad::Var shift(const ad::Var& v) { return ad::graph_propagate(shift_matrix, v, nodes); }
    ad::Var scale(double a, const ad::Var& v) { return ad::scale(v, a); }
    ad::Var lin(double a, const ad::Var& u, double b, const ad::Var& w) { return ad::lin(a, u, b, w); }
};

// Constant right-multiplications shared by every block.
struct Projections {
    ad::Var fwd_re, fwd_im, inv_re, inv_im, trend;
};

ad::Var spectral_filter(ad::Var z, ad::Var w_re, ad::Var w_im, const Projections& p, const ModelConfig& c) {
    const int slots_n = c.share_phi_nodes, slots_d = c.share_phi_dims;
    const ad::Var f_re = ad::matmul(z, p.fwd_re);
    const ad::Var f_im = ad::matmul(z, p.fwd_im);
    auto mul = [&](ad::Var f, ad::Var w) {
        return ad::row_block_matmul(f, w, c.nodes, c.dims, c.modes, slots_n, slots_d);
    };
    const ad::Var g_re = mul(f_re, w_re) - mul(f_im, w_im);
    const ad::Var g_im = mul(f_re, w_im) + mul(f_im, w_re);
    return ad::matmul(g_re, p.inv_re) + ad::matmul(g_im, p.inv_im);
}

ad::Var attention(ad::Var trend, ad::Var seasonal, ad::Var wq, ad::Var wk, ad::Var wv, const Projections& p,
                  const ModelConfig& c) {
    auto project = [&](ad::Var x, ad::Var w) {
        ad::Var y = ad::mix_column_blocks(x, w, c.lookback);
        return c.uses_relu() ? ad::relu(y) : y;
    };
    const ad::Var q = project(trend, wq);
    const ad::Var k = project(seasonal, wk);
    const ad::Var v = project(seasonal, wv);
    const ad::Var maps = ad::attention_scores(ad::matmul(q, p.fwd_re), ad::matmul(q, p.fwd_im),
                                              ad::matmul(k, p.fwd_re), ad::matmul(k, p.fwd_im), c.dims, c.modes);
    const ad::Var o_re = ad::attention_apply(maps, ad::matmul(v, p.fwd_re), c.dims, c.modes);
    const ad::Var o_im = ad::attention_apply(maps, ad::matmul(v, p.fwd_im), c.dims, c.modes);
    return ad::matmul(o_re, p.inv_re) + ad::matmul(o_im, p.inv_im);
}

const ad::Var& param(const std::map<std::string, ad::Var>& params, const std::string& name) {
    const auto it = params.find(name);
    if (it == params.end()) throw ConfigError("model state is missing parameter '" + name + "'");
    return it->second;
}

} // namespace

void ModelConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(nodes >= 1, "nodes must be >= 1");
    require(lookback >= 2, "lookback must be >= 2");
    require(horizon >= 1, "horizon must be >= 1");
    require(dims >= 1, "dims must be >= 1");
    require(blocks >= 1, "blocks must be >= 1");
    require(basis.degree >= 0, "degree must be >= 0");
    require(modes >= 1 && modes <= lookback, "modes must lie in [1, lookback]");
    require(decomp_window >= 1 && decomp_window <= lookback, "decomp_window must lie in [1, lookback]");
    require(embed_dim >= 1, "embed_dim must be >= 1");
    try {
        basis.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
}

std::string to_string(Variant v) { return v == Variant::Linear ? "linear" : "nonlinear"; }

std::string to_string(AdjacencyMode m) {
    switch (m) {
    case AdjacencyMode::Pearson: return "pearson";
    case AdjacencyMode::Learned: return "learned";
    case AdjacencyMode::Provided: return "provided";
    }
    return "";
}

std::string to_string(ProjectorKind p) { return p == ProjectorKind::Fourier ? "dft" : "random"; }

nlohmann::json to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["nodes"] = c.nodes;
    j["lookback"] = c.lookback;
    j["horizon"] = c.horizon;
    j["dims"] = c.dims;
    j["blocks"] = c.blocks;
    j["basis"] = std::string(graph::to_string(c.basis.kind));
    j["degree"] = c.basis.degree;
    j["alpha"] = c.basis.alpha;
    j["jacobi_a"] = c.basis.jacobi_a;
    j["jacobi_b"] = c.basis.jacobi_b;
    j["monomial_domain"] = c.basis.monomial_domain == graph::MonomialDomain::Adjacency ? "adjacency" : "laplacian";
    j["modes"] = c.modes;
    j["mode_policy"] = c.mode_policy == ModePolicy::Lowest ? "lowest" : "random";
    j["mode_seed"] = c.mode_seed;
    j["decomp_window"] = c.decomp_window;
    j["variant"] = to_string(c.variant);
    j["adjacency"] = to_string(c.adjacency_mode);
    j["embed_dim"] = c.embed_dim;
    j["residual"] = c.residual;
    j["share_theta_dims"] = c.share_theta_dims;
    j["share_phi_dims"] = c.share_phi_dims;
    j["share_phi_nodes"] = c.share_phi_nodes;
    j["projector"] = to_string(c.projector);
    j["coarse"] = c.coarse;
    j["fine"] = c.fine;
    j["relu"] = c.relu ? nlohmann::json(*c.relu) : nlohmann::json(nullptr);
    j["attention"] = c.attention ? nlohmann::json(*c.attention) : nlohmann::json(nullptr);
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j, ModelConfig c) {
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("nodes", c.nodes);
        get("lookback", c.lookback);
        get("horizon", c.horizon);
        get("dims", c.dims);
        get("blocks", c.blocks);
        if (j.contains("basis")) c.basis.kind = graph::parse_basis(j.at("basis").get<std::string>());
        get("degree", c.basis.degree);
        get("alpha", c.basis.alpha);
        if (c.basis.kind == graph::Basis::Jacobi && j.contains("alpha") && !j.contains("jacobi_a")) {
            c.basis.jacobi_a = c.basis.jacobi_b = c.basis.alpha - 0.5;
        }
        get("jacobi_a", c.basis.jacobi_a);
        get("jacobi_b", c.basis.jacobi_b);
        c.basis.monomial_domain = enum_from<graph::MonomialDomain>(
            j, "monomial_domain",
            {{"adjacency", graph::MonomialDomain::Adjacency}, {"laplacian", graph::MonomialDomain::Laplacian}},
            c.basis.monomial_domain);
        get("modes", c.modes);
        c.mode_policy = enum_from<ModePolicy>(j, "mode_policy",
                                              {{"lowest", ModePolicy::Lowest}, {"random", ModePolicy::Random}},
                                              c.mode_policy);
        get("mode_seed", c.mode_seed);
        get("decomp_window", c.decomp_window);
        c.variant = enum_from<Variant>(j, "variant", {{"linear", Variant::Linear}, {"nonlinear", Variant::Nonlinear}},
                                       c.variant);
        c.adjacency_mode = enum_from<AdjacencyMode>(j, "adjacency",
                                                    {{"pearson", AdjacencyMode::Pearson},
                                                     {"learned", AdjacencyMode::Learned},
                                                     {"provided", AdjacencyMode::Provided}},
                                                    c.adjacency_mode);
        get("embed_dim", c.embed_dim);
        get("residual", c.residual);
        get("share_theta_dims", c.share_theta_dims);
        get("share_phi_dims", c.share_phi_dims);
        get("share_phi_nodes", c.share_phi_nodes);
        c.projector = enum_from<ProjectorKind>(
            j, "projector", {{"dft", ProjectorKind::Fourier}, {"random", ProjectorKind::Random}}, c.projector);
        get("coarse", c.coarse);
        get("fine", c.fine);
        if (j.contains("relu")) c.relu = j.at("relu").is_null() ? std::nullopt : std::optional(j.at("relu").get<bool>());
        if (j.contains("attention")) {
            c.attention = j.at("attention").is_null() ? std::nullopt : std::optional(j.at("attention").get<bool>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    return c;
}

bool ModelState::all_finite() const {
    for (const auto& [name, m] : params)
        if (!m.allFinite()) return false;
    return true;
}

Matrix pearson_adjacency(const Tensor3& x) {
    const int n = x.nodes();
    const int len = x.steps() * x.dims();
    if (x.steps() < 2) throw ShapeError("pearson adjacency needs at least two time steps");
    Matrix centered(n, len);
    Vector norms(n);
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < x.steps(); ++t)
            for (int d = 0; d < x.dims(); ++d) centered(i, t * x.dims() + d) = x(i, t, d);
        centered.row(i).array() -= centered.row(i).mean();
        norms(i) = centered.row(i).norm();
    }
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            // Treat a numerically flat series as constant.
            if (norms(i) <= 1e-12 * std::sqrt(len) || norms(j) <= 1e-12 * std::sqrt(len)) continue;
            const double rho = std::min(1.0, std::abs(centered.row(i).dot(centered.row(j))) / (norms(i) * norms(j)));
            a(i, j) = a(j, i) = rho;
        }
    }
    return a;
}

Matrix windowed_pearson_adjacency(const Tensor3& x, int window) {
    if (window < 2 || window > x.steps()) throw ShapeError("windowed pearson: window must lie in [2, L]");
    Matrix acc = Matrix::Zero(x.nodes(), x.nodes());
    int count = 0;
    for (int start = 0; start + window <= x.steps(); start += window) {
        acc += pearson_adjacency(x.time_slice(start, window));
        ++count;
    }
    return acc / count;
}

void set_adjacency(ModelState& state, const Matrix& adjacency) {
    const graph::Adjacency adj(adjacency);
    state.adjacency = adjacency;
    state.shift = graph::shifted_adjacency(graph::normalized_laplacian(adj));
}

ModelState init_state(const ModelConfig& c, const Matrix& adjacency, std::mt19937_64& rng) {
    c.validate();
    ModelState s;
    if (c.adjacency_mode != AdjacencyMode::Learned) {
        if (adjacency.rows() != c.nodes || adjacency.cols() != c.nodes) {
            throw ShapeError("adjacency must be N x N with N = " + std::to_string(c.nodes));
        }
        set_adjacency(s, adjacency);
    }
    s.modes = c.mode_policy == ModePolicy::Lowest ? temporal::lowest_modes(c.modes)
                                                  : temporal::random_modes(c.lookback, c.modes, c.mode_seed);
    s.projector = c.projector == ProjectorKind::Fourier ? temporal::SpaceProjector::fourier(c.lookback, s.modes)
                                                        : temporal::SpaceProjector::random(c.lookback, c.modes, rng);

    const int theta_cols = c.share_theta_dims ? 1 : c.dims;
    const int slots = phi_slots(c);
    const double noise = 0.01;
    auto complex_identity = [&](const std::string& prefix) {
        Matrix re = gaussian(static_cast<Eigen::Index>(slots) * c.modes, c.modes, noise, rng);
        for (int i = 0; i < slots; ++i) re.block(i * c.modes, 0, c.modes, c.modes) += Matrix::Identity(c.modes, c.modes);
        s.params[prefix + "_re"] = re;
        s.params[prefix + "_im"] = gaussian(static_cast<Eigen::Index>(slots) * c.modes, c.modes, noise, rng);
    };
    for (int m = 0; m < c.blocks; ++m) {
        const std::string b = "block" + std::to_string(m) + "/";
        Matrix theta = Matrix::Zero(c.basis.degree + 1, theta_cols);
        if (c.basis.kind == graph::Basis::Bernstein) {
            theta.setOnes();
        } else {
            theta.row(0).setOnes();
        }
        s.params[b + "theta"] = theta;
        if (c.coarse) complex_identity(b + "phi1");
        if (c.fine) {
            if (c.uses_attention()) {
                for (const char* w : {"attn_q", "attn_k", "attn_v"}) {
                    s.params[b + w] = Matrix::Identity(c.dims, c.dims) + gaussian(c.dims, c.dims, noise, rng);
                }
            } else {
                complex_identity(b + "phi2");
            }
        }
    }
    const int flat = c.lookback * c.dims;
    s.params["head"] = gaussian(flat, static_cast<Eigen::Index>(c.horizon) * c.dims, 1.0 / std::sqrt(flat), rng);
    if (c.adjacency_mode == AdjacencyMode::Learned) {
        s.params["latent/embed"] = gaussian(flat, c.embed_dim, 1.0 / std::sqrt(flat), rng);
    }
    return s;
}

Matrix pack_batch(const std::vector<Tensor3>& samples) {
    if (samples.empty()) throw ShapeError("pack_batch: empty batch");
    const Tensor3& first = samples.front();
    Matrix out(static_cast<Eigen::Index>(samples.size()) * first.nodes(),
               static_cast<Eigen::Index>(first.dims()) * first.steps());
    for (std::size_t b = 0; b < samples.size(); ++b) {
        if (!samples[b].same_shape(first)) throw ShapeError("pack_batch: samples differ in shape");
        out.middleRows(static_cast<Eigen::Index>(b) * first.nodes(), first.nodes()) = samples[b].packed();
    }
    return out;
}

std::vector<Tensor3> unpack_batch(const Matrix& packed, int nodes, int steps, int dims) {
    if (packed.rows() % nodes != 0 || packed.cols() != static_cast<Eigen::Index>(steps) * dims) {
        throw ShapeError("unpack_batch: packed shape does not match (N, T, D)");
    }
    std::vector<Tensor3> out;
    for (Eigen::Index b = 0; b < packed.rows() / nodes; ++b) {
        out.push_back(Tensor3::from_packed(packed.middleRows(b * nodes, nodes), steps, dims));
    }
    return out;
}

std::map<std::string, ad::Var> bind_parameters(ad::Tape& tape, const ModelState& state, bool trainable) {
    std::map<std::string, ad::Var> vars;
    for (const auto& [name, value] : state.params) {
        vars[name] = trainable ? tape.parameter(value) : tape.constant(value);
    }
    return vars;
}

GraphOutputs forward_graph(ad::Tape& tape, const std::map<std::string, ad::Var>& params, const ModelState& state,
                           const ModelConfig& c, const Matrix& x_packed) {
    c.validate();
    const int T = c.lookback;
    if (x_packed.cols() != static_cast<Eigen::Index>(T) * c.dims || x_packed.rows() % c.nodes != 0 ||
        x_packed.rows() == 0) {
        throw ShapeError("forward: input is not a packed (B*N) x (D*T) batch");
    }

    ad::Var shift;
    if (c.adjacency_mode == AdjacencyMode::Learned) {
        const ad::Var x = tape.constant(x_packed);
        const ad::Var emb = ad::matmul(x, param(params, "latent/embed"));
        shift = ad::normalize_adjacency(ad::latent_adjacency(emb, c.nodes), c.nodes);
    } else {
        if (state.shift.rows() != c.nodes) throw ShapeError("forward: state has no N x N adjacency");
        shift = tape.constant(state.shift);
    }

    Projections p;
    p.fwd_re = tape.constant(block_diag(state.projector.forward_re, c.dims));
    p.fwd_im = tape.constant(block_diag(state.projector.forward_im, c.dims));
    p.inv_re = tape.constant(block_diag(state.projector.inverse_re, c.dims));
    p.inv_im = tape.constant(block_diag(state.projector.inverse_im, c.dims));
    if (c.fine) p.trend = tape.constant(block_diag(temporal::moving_average_matrix(T, c.decomp_window), c.dims));

    TapeOps ops{shift, c.nodes};
    ad::Var z = tape.constant(x_packed);
    for (int m = 0; m < c.blocks; ++m) {
        const std::string b = "block" + std::to_string(m) + "/";
        const ad::Var theta = param(params, b + "theta");
        const auto terms = graph::polynomial_terms(c.basis, z, ops);
        ad::Var h = ad::scale_column_blocks(terms[0], theta, 0, T);
        for (int k = 1; k <= c.basis.degree; ++k) h = h + ad::scale_column_blocks(terms[k], theta, k, T);
        if (c.uses_relu()) h = ad::relu(h);
        if (c.coarse) h = spectral_filter(h, param(params, b + "phi1_re"), param(params, b + "phi1_im"), p, c);
        if (c.fine) {
            const ad::Var trend = ad::matmul(h, p.trend);
            const ad::Var seasonal = h - trend;
            if (c.uses_attention()) {
                h = trend + attention(trend, seasonal, param(params, b + "attn_q"), param(params, b + "attn_k"),
                                      param(params, b + "attn_v"), p, c);
            } else {
                h = trend + spectral_filter(seasonal, param(params, b + "phi2_re"), param(params, b + "phi2_im"), p, c);
            }
        }
        z = (c.residual && m > 0) ? h + z : h;
    }
    return {z, ad::matmul(z, param(params, "head"))};
}

ad::Var batch_loss(ad::Var prediction, const Matrix& y_packed, int nodes, int horizon) {
    const Matrix& pv = prediction.value();
    if (pv.rows() != y_packed.rows() || pv.cols() != y_packed.cols()) {
        throw ShapeError("loss: prediction and target shapes differ");
    }
    const double batch = static_cast<double>(pv.rows() / nodes);
    const ad::Var diff = prediction - prediction.tape->constant(y_packed);
    return ad::scale(ad::sum_squares(diff), 1.0 / (horizon * batch));
}

Tensor3 forward(const Tensor3& x, const ModelState& state, const ModelConfig& c) {
    ad::Tape tape;
    const auto vars = bind_parameters(tape, state, false);
    const auto out = forward_graph(tape, vars, state, c, x.packed());
    return Tensor3::from_packed(out.prediction.value(), c.horizon, c.dims);
}

Tensor3 embed(const Tensor3& x, const ModelState& state, const ModelConfig& c) {
    ad::Tape tape;
    const auto vars = bind_parameters(tape, state, false);
    const auto out = forward_graph(tape, vars, state, c, x.packed());
    return Tensor3::from_packed(out.representation.value(), c.lookback, c.dims);
}

Matrix learned_adjacency(const ModelState& state, const ModelConfig& c, const Tensor3& x) {
    ad::Tape tape;
    const auto vars = bind_parameters(tape, state, false);
    const ad::Var emb = ad::matmul(tape.constant(x.packed()), param(vars, "latent/embed"));
    return ad::latent_adjacency(emb, c.nodes).value();
}

double loss(const Tensor3& y_hat, const Tensor3& y) {
    if (!y_hat.same_shape(y)) throw ShapeError("loss: prediction and target shapes differ");
    return (y_hat - y).squared_norm() / y.steps();
}

} // namespace spectemp::model
