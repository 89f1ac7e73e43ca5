#include "spectemp/harness.hpp"

#include "spectemp/basis.hpp"
#include "spectemp/errors.hpp"
#include "spectemp/frequency_temporal.hpp"
#include "spectemp/spectral_graph.hpp"
#include "spectemp/temporal_wl.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace spectemp::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void merge_into(json& base, const json& patch) {
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object()) {
            merge_into(base[it.key()], it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write '" + path.string() + "'");
    return os;
}

void write_json(const fs::path& path, const json& j) {
    auto os = open_out(path);
    os << std::setw(2) << j << '\n';
}

std::uint64_t next_seed(std::mt19937_64& rng) { return rng(); }

// Z for each input window, via the representation node of the forward graph.
std::vector<Tensor3> representations(const model::ModelState& state, const model::ModelConfig& config,
                                     const std::vector<Tensor3>& inputs) {
    std::vector<Tensor3> out;
    const std::size_t batch = 64;
    for (std::size_t start = 0; start < inputs.size(); start += batch) {
        const std::size_t stop = std::min(inputs.size(), start + batch);
        const std::vector<Tensor3> xs(inputs.begin() + start, inputs.begin() + stop);
        ad::Tape tape;
        const auto vars = model::bind_parameters(tape, state, false);
        const auto g = model::forward_graph(tape, vars, state, config, model::pack_batch(xs));
        for (auto& z : model::unpack_batch(g.representation.value(), config.nodes, config.lookback, config.dims)) {
            out.push_back(std::move(z));
        }
    }
    return out;
}

double embedding_silhouette(const Tensor3& z, const std::vector<int>& labels) { return silhouette(z.packed(), labels); }

double mean_window_silhouette(const model::ModelState& state, const model::ModelConfig& config,
                              const data::WindowSet& windows, const std::vector<int>& labels, int max_windows) {
    std::vector<Tensor3> picked;
    const int count = static_cast<int>(windows.size());
    const int take = std::min(count, max_windows);
    for (int i = 0; i < take; ++i) picked.push_back(windows.inputs[static_cast<std::size_t>(i) * count / take]);
    double total = 0.0;
    for (const auto& z : representations(state, config, picked)) total += embedding_silhouette(z, labels);
    return total / take;
}

} // namespace

json default_config() {
    return json::parse(R"({
      "data": {
        "source": "seasonal",
        "nodes": 8, "period": 24, "periods": 20, "noise": 0.05, "coupling": 0.6,
        "n_per_group": 10, "length": 400,
        "path": "", "layout": "time_major", "header": false, "dims": 1, "impute": "strict",
        "adjacency_path": "",
        "normalize": "zscore", "split": [0.6, 0.2, 0.2], "stride": 1
      },
      "model": {
        "lookback": 24, "horizon": 3, "blocks": 1, "basis": "gegenbauer", "degree": 3, "alpha": 1.0,
        "modes": 5, "decomp_window": 3, "variant": "linear", "adjacency": "pearson"
      },
      "train": {"epochs": 100, "batch_size": 32, "lr": 0.001, "patience": 15},
      "ablate": {"axis": "all", "seeds": 1},
      "theory": {
        "lemma": {"nodes": 32, "length": 64, "rank": 4, "samples": 32, "trials": 500, "noise": 0.05},
        "orthogonality": {"degree": 6, "alpha": 1.0},
        "race": {"epochs": 20, "degree": 6, "alpha": 1.0, "shift": 1},
        "model_race": true
      },
      "twl": {"graphs": [], "time": -1, "steps": -1},
      "synth": {"n_per_group": 10, "length": 400, "periods": 20, "noise": 0.5, "corr_window": 0,
                "model_adjacency": "provided", "control_theta": [1.0, 0.5], "max_windows": 32},
      "forecast": {"checkpoint": "", "normalizer": "", "input": "", "layout": "variable_major"}
    })");
}

json load_config(const std::string& path) {
    if (path.empty()) throw ConfigError("--config is required");
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    try {
        return json::parse(is, nullptr, true, true);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

void apply_overrides(json& config, const std::vector<std::string>& overrides) {
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq);
        const std::string raw = item.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw;
        }
        json* node = &config;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (part.empty()) throw ConfigError("override key '" + key + "' has an empty segment");
            if (!node->is_object()) *node = json::object();
            if (dot == std::string::npos) {
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            start = dot + 1;
        }
    }
}

json effective_config(const ExperimentSpec& spec) {
    json cfg = default_config();
    merge_into(cfg, load_config(spec.config_path));
    apply_overrides(cfg, spec.overrides);
    return cfg;
}

double silhouette(const Matrix& points, const std::vector<int>& labels) {
    const Eigen::Index n = points.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) throw ShapeError("silhouette: one label per point required");
    std::vector<int> ids = labels;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) throw ParameterError("silhouette needs at least two clusters");
    std::map<int, int> index;
    for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<int>(i);
    std::vector<int> sizes(ids.size(), 0);
    for (int l : labels) ++sizes[index[l]];

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> sums(ids.size(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) sums[index[labels[j]]] += (points.row(i) - points.row(j)).norm();
        }
        const int own = index[labels[i]];
        if (sizes[own] <= 1) continue;
        const double a = sums[own] / (sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < ids.size(); ++c)
            if (static_cast<int>(c) != own) b = std::min(b, sums[c] / sizes[c]);
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

data::Dataset build_dataset(const json& d, std::uint64_t seed) {
    const std::string source = d.value("source", "seasonal");
    if (source == "seasonal") {
        data::SeasonalOptions o;
        o.nodes = d.value("nodes", o.nodes);
        o.period = d.value("period", o.period);
        o.periods = d.value("periods", o.periods);
        o.noise_sigma = d.value("noise", o.noise_sigma);
        o.coupling = d.value("coupling", o.coupling);
        o.seed = seed;
        return data::synth_seasonal(o);
    }
    if (source == "signed_groups") {
        return data::synth_signed_groups(d.value("n_per_group", 10), d.value("length", 400), d.value("noise", 0.1),
                                         seed, d.value("periods", 20));
    }
    if (source == "csv") {
        data::CsvOptions o;
        const std::string layout = d.value("layout", "time_major");
        if (layout != "time_major" && layout != "variable_major") {
            throw ConfigError("data.layout must be time_major or variable_major");
        }
        o.layout = layout == "time_major" ? data::Layout::TimeMajor : data::Layout::VariableMajor;
        o.header = d.value("header", false);
        o.dims = d.value("dims", 1);
        const std::string impute = d.value("impute", "strict");
        if (impute != "strict" && impute != "ffill") throw ConfigError("data.impute must be strict or ffill");
        o.nan_policy = impute == "ffill" ? data::NanPolicy::ForwardFill : data::NanPolicy::Strict;
        const std::string path = d.value("path", "");
        if (path.empty()) throw ConfigError("data.path is required for csv sources");
        auto ds = data::load_csv(path, o);
        const std::string adj_path = d.value("adjacency_path", "");
        if (!adj_path.empty()) {
            data::CsvOptions ao;
            ao.layout = data::Layout::VariableMajor;
            const auto adj = data::load_csv(adj_path, ao);
            if (adj.nodes() != ds.nodes() || adj.length() != ds.nodes()) {
                throw DataError("adjacency file must be N x N with N = " + std::to_string(ds.nodes()));
            }
            Matrix a(ds.nodes(), ds.nodes());
            for (int i = 0; i < ds.nodes(); ++i)
                for (int j = 0; j < ds.nodes(); ++j) a(i, j) = adj.values(i, j, 0);
            ds.adjacency = a;
        }
        return ds;
    }
    throw ConfigError("unknown data.source '" + source + "' (valid: seasonal, signed_groups, csv)");
}

Prepared prepare(data::Dataset ds, const json& d, int lookback, int horizon, model::AdjacencyMode adjacency) {
    const auto ratios_v = d.value("split", std::vector<double>{0.6, 0.2, 0.2});
    if (ratios_v.size() != 3) throw ConfigError("data.split needs three ratios");
    const std::array<double, 3> ratios{ratios_v[0], ratios_v[1], ratios_v[2]};
    const auto parts = data::split(ds.values, ratios, lookback + horizon);
    Prepared p;
    p.norm = data::Normalizer::fit(parts[0], data::parse_norm_method(d.value("normalize", "zscore")));
    const int stride = d.value("stride", 1);
    p.train_series = p.norm.apply(parts[0]);
    p.train = data::make_windows(p.train_series, lookback, horizon, stride);
    p.validation = data::make_windows(p.norm.apply(parts[1]), lookback, horizon, stride);
    p.test = data::make_windows(p.norm.apply(parts[2]), lookback, horizon, stride);
    switch (adjacency) {
    case model::AdjacencyMode::Pearson: p.adjacency = model::pearson_adjacency(p.train_series); break;
    case model::AdjacencyMode::Provided:
        if (!ds.adjacency) throw ConfigError("adjacency 'provided' needs a dataset graph");
        p.adjacency = *ds.adjacency;
        break;
    case model::AdjacencyMode::Learned: break;
    }
    p.dataset = std::move(ds);
    return p;
}

model::ModelConfig model_config(const json& m, const Prepared& p) {
    model::ModelConfig base;
    base.nodes = p.dataset.nodes();
    base.dims = p.dataset.dims();
    auto c = model::config_from_json(m, base);
    c.nodes = p.dataset.nodes();
    c.dims = p.dataset.dims();
    c.validate();
    return c;
}

train::TrainOptions train_options(const json& t, std::uint64_t seed) {
    train::TrainOptions o;
    o.epochs = t.value("epochs", o.epochs);
    o.batch_size = t.value("batch_size", o.batch_size);
    o.adam.lr = t.value("lr", o.adam.lr);
    o.patience = t.value("patience", o.patience);
    o.seed = seed;
    if (!(o.adam.lr > 0.0)) throw ConfigError("train.lr must be > 0");
    return o;
}

RunResult run_experiment(const Prepared& p, const model::ModelConfig& config, const train::TrainOptions& options,
                         std::uint64_t init_seed) {
    RunResult r;
    r.config = config;
    std::mt19937_64 rng(init_seed);
    r.state = model::init_state(config, p.adjacency, rng);
    r.run = train::fit(r.state, config, p.train, p.validation, p.norm, options);
    r.test = train::evaluate(r.state, config, p.test, p.norm);
    auto baseline = data::persistence_baseline(p.test, config.horizon);
    std::vector<Tensor3> targets;
    for (std::size_t i = 0; i < baseline.size(); ++i) {
        baseline[i] = p.norm.inverse(baseline[i]);
        targets.push_back(p.norm.inverse(p.test.targets[i]));
    }
    r.baseline = data::error_metrics(baseline, targets);
    return r;
}

std::vector<std::string> ablation_axes() { return {"basis", "design", "addons", "all"}; }

std::vector<AblationVariant> ablation_variants(const std::string& axis) {
    std::vector<AblationVariant> basis = {
        {"A.1", "monomial", {{"basis", "monomial"}}},
        {"A.2", "bernstein", {{"basis", "bernstein"}}},
        {"A.3", "chebyshev2", {{"basis", "chebyshev2"}}},
        {"A.4", "gegenbauer", {{"basis", "gegenbauer"}}},
        {"A.5", "jacobi", {{"basis", "jacobi"}}},
    };
    std::vector<AblationVariant> design = {
        {"ref", "linear (full)", json::object()},
        {"B.1", "shared graph coefficients across dims", {{"share_theta_dims", true}}},
        {"B.2", "shared temporal weights across dims", {{"share_phi_dims", true}}},
        {"B.3", "shared temporal weights across variables", {{"share_phi_nodes", true}}},
        {"B.4", "random projection instead of DFT", {{"projector", "random"}}},
        {"B.5", "without coarse temporal filter", {{"coarse", false}}},
        {"B.6", "without fine temporal filter", {{"fine", false}}},
    };
    std::vector<AblationVariant> addons = {
        {"ref+", "nonlinear (full)", {{"variant", "nonlinear"}}},
        {"C.1", "nonlinear without ReLU", {{"variant", "nonlinear"}, {"relu", false}}},
        {"C.2", "nonlinear without attention", {{"variant", "nonlinear"}, {"attention", false}}},
    };
    if (axis == "basis") return basis;
    if (axis == "design") return design;
    if (axis == "addons") return addons;
    if (axis == "all") {
        std::vector<AblationVariant> all = basis;
        all.insert(all.end(), design.begin(), design.end());
        all.insert(all.end(), addons.begin(), addons.end());
        return all;
    }
    throw ConfigError("unknown ablation axis '" + axis + "' (valid: basis, design, addons, all)");
}

std::map<std::string, std::vector<double>> convergence_race(const Prepared& p, const model::ModelConfig& base,
                                                            const train::TrainOptions& options,
                                                            std::uint64_t init_seed) {
    std::map<std::string, std::vector<double>> curves;
    train::TrainOptions o = options;
    o.patience = 0;
    const data::WindowSet no_validation;
    for (graph::Basis b : graph::kAllBases) {
        model::ModelConfig c = base;
        c.basis.kind = b;
        if (b == graph::Basis::Jacobi) c.basis.jacobi_a = c.basis.jacobi_b = c.basis.alpha - 0.5;
        std::mt19937_64 rng(init_seed);
        auto state = model::init_state(c, p.adjacency, rng);
        const auto run = train::fit(state, c, p.train, no_validation, p.norm, o);
        auto& curve = curves[std::string(graph::to_string(b))];
        for (const auto& e : run.history) curve.push_back(e.train_loss);
    }
    return curves;
}

RunSeeds RunSeeds::draw(std::mt19937_64& master) {
    RunSeeds s;
    s.data = next_seed(master);
    s.init = next_seed(master);
    s.train = next_seed(master);
    return s;
}

namespace {

model::AdjacencyMode adjacency_mode_of(const json& model_cfg) {
    return model::config_from_json(json{{"adjacency", model_cfg.value("adjacency", "pearson")}}).adjacency_mode;
}

} // namespace

TrainedRun train_from_config(const json& config, const RunSeeds& seeds) {
    const json& m = config.at("model");
    Prepared p = prepare(build_dataset(config.at("data"), seeds.data), config.at("data"), m.value("lookback", 24),
                         m.value("horizon", 3), adjacency_mode_of(m));
    const auto cfg = model_config(m, p);
    auto result = run_experiment(p, cfg, train_options(config.at("train"), seeds.train), seeds.init);
    return {std::move(p), std::move(result)};
}

std::vector<RunResult> run_variants(const json& config, const std::vector<AblationVariant>& variants,
                                    const RunSeeds& seeds) {
    const json& m = config.at("model");
    const auto ds = build_dataset(config.at("data"), seeds.data);
    std::vector<RunResult> results;
    for (const auto& variant : variants) {
        json mcfg = m;
        merge_into(mcfg, variant.overrides);
        const Prepared p =
            prepare(ds, config.at("data"), mcfg.value("lookback", 24), mcfg.value("horizon", 3), adjacency_mode_of(mcfg));
        const auto cfg = model_config(mcfg, p);
        results.push_back(run_experiment(p, cfg, train_options(config.at("train"), seeds.train), seeds.init));
    }
    return results;
}

std::map<std::string, std::vector<double>> model_race(const json& config, const RunSeeds& seeds) {
    const json& m = config.at("model");
    const auto ds = build_dataset(config.at("data"), seeds.data);
    const auto mode = ds.adjacency ? model::AdjacencyMode::Provided : model::AdjacencyMode::Pearson;
    const Prepared p = prepare(ds, config.at("data"), m.value("lookback", 24), m.value("horizon", 3), mode);
    json mcfg = m;
    mcfg["adjacency"] = model::to_string(mode);
    const auto cfg = model_config(mcfg, p);
    auto opts = train_options(config.at("train"), seeds.train);
    opts.epochs = config.at("theory").at("race").value("epochs", 20);
    return convergence_race(p, cfg, opts, seeds.init);
}

ColumnSamplingResult column_sampling_experiment(const json& l, std::uint64_t seed) {
    const int n = l.value("nodes", 32), t = l.value("length", 64), k = l.value("rank", 4);
    const int samples = l.value("samples", 32), trials = l.value("trials", 500);
    const double noise = l.value("noise", 0.05);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gauss = [&](int r, int c) {
        Matrix g(r, c);
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i) g(i, j) = normal(rng);
        return g;
    };
    const Matrix low = gauss(n, k) * gauss(k, t);
    const Matrix w = gauss(t, t) / std::sqrt(static_cast<double>(t));
    ColumnSamplingResult r;
    r.noisy = temporal::column_sampling_check(low + noise * gauss(n, t), w, k, samples, trials, rng);
    r.exact = temporal::column_sampling_check(low, w, k, samples, trials, rng);
    return r;
}

std::map<std::string, std::vector<double>> filter_race(const Matrix& adjacency, const Tensor3& series, int degree,
                                                       double alpha, int shift, int steps) {
    if (shift < 1 || shift >= series.steps()) throw ConfigError("filter race: shift must lie in [1, L)");
    if (steps < 1) throw ConfigError("filter race: need at least one step");
    const Matrix lap = graph::normalized_laplacian(graph::Adjacency(adjacency));
    const int n = series.nodes();
    const int m = series.steps() - shift;
    std::map<std::string, std::vector<double>> curves;
    for (graph::Basis b : graph::kAllBases) {
        graph::FilterBank bank;
        switch (b) {
        case graph::Basis::Monomial: bank.basis = graph::BasisSpec::monomial(degree); break;
        case graph::Basis::Bernstein: bank.basis = graph::BasisSpec::bernstein(degree); break;
        case graph::Basis::Chebyshev2: bank.basis = graph::BasisSpec::chebyshev2(degree); break;
        case graph::Basis::Gegenbauer: bank.basis = graph::BasisSpec::gegenbauer(degree, alpha); break;
        case graph::Basis::Jacobi: bank.basis = graph::BasisSpec::jacobi(degree, alpha); break;
        }
        std::vector<double> curve(steps + 1, 0.0);
        for (int d = 0; d < series.dims(); ++d) {
            const Matrix x = series.channel(d);
            const Matrix inputs = x.leftCols(m);
            const Eigen::Map<const Vector> y(x.rightCols(m).eval().data(), static_cast<Eigen::Index>(n) * m);
            const Vector target = y;
            Matrix features(static_cast<Eigen::Index>(n) * m, degree + 1);
            for (int k = 0; k <= degree; ++k) {
                bank.coefficients = Matrix::Zero(degree + 1, m);
                bank.coefficients.row(k).setOnes();
                const Matrix fk = graph::graph_conv(bank, lap, inputs);
                features.col(k) = Eigen::Map<const Vector>(fk.data(), fk.size());
            }
            const Matrix gram = features.transpose() * features / m;
            const Vector rhs = features.transpose() * target / m;
            const double yy = target.squaredNorm() / m;
            const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().maxCoeff();
            if (!(lmax > 0.0)) throw NumericalError("filter race: degenerate Hessian for " + std::string(graph::to_string(b)));
            Vector theta = Vector::Zero(degree + 1);
            for (int it = 0; it <= steps; ++it) {
                curve[it] += 0.5 * (theta.dot(gram * theta) - 2.0 * rhs.dot(theta) + yy);
                if (it < steps) theta -= (gram * theta - rhs) / lmax;
            }
        }
        curves[std::string(graph::to_string(b))] = curve;
    }
    return curves;
}

std::vector<OrthogonalityRow> orthogonality_report(int degree, double alpha, double tol) {
    const double ab = alpha - 0.5;
    std::vector<std::pair<graph::BasisSpec, std::pair<double, double>>> cases = {
        {graph::BasisSpec::monomial(degree), {ab, ab}},
        {graph::BasisSpec::bernstein(degree), {ab, ab}},
        {graph::BasisSpec::chebyshev2(degree), {0.5, 0.5}},
        {graph::BasisSpec::gegenbauer(degree, alpha), {ab, ab}},
        {graph::BasisSpec::jacobi(degree, alpha), {ab, ab}},
    };
    std::vector<OrthogonalityRow> rows;
    for (const auto& [spec, w] : cases) {
        OrthogonalityRow r;
        r.basis = std::string(graph::to_string(spec.kind));
        r.residual = graph::orthogonality_residual(spec, w.first, w.second);
        r.orthogonal = r.residual < tol;
        rows.push_back(r);
    }
    return rows;
}

SignedRelationResult signed_relation_experiment(const json& config, std::uint64_t seed) {
    const json& s = config.at("synth");
    std::mt19937_64 master(seed);
    const std::uint64_t data_seed = next_seed(master);
    const std::uint64_t init_seed = next_seed(master);
    const std::uint64_t train_seed = next_seed(master);

    auto ds = data::synth_signed_groups(s.value("n_per_group", 10), s.value("length", 400), s.value("noise", 0.1),
                                        data_seed, s.value("periods", 20));
    const json& m = config.at("model");
    const int lookback = m.value("lookback", 24);
    const int horizon = m.value("horizon", 3);
    Prepared p = prepare(ds, config.at("data"), lookback, horizon, model::AdjacencyMode::Learned);
    // Coupling strength without sign: sine and cosine series swap between
    // positive and negative correlation from one window to the next.
    const int period = std::max(1, s.value("length", 400) / std::max(1, s.value("periods", 20)));
    const int corr_window = s.value("corr_window", 0) > 0 ? s.value("corr_window", 0) : std::max(2, period / 4);
    p.adjacency = model::windowed_pearson_adjacency(p.train_series, corr_window);

    json mcfg = m;
    const std::string graph_mode = s.value("model_adjacency", "provided");
    if (graph_mode != "provided" && graph_mode != "learned") {
        throw ConfigError("synth.model_adjacency must be provided or learned");
    }
    mcfg["adjacency"] = graph_mode;
    const auto cfg = model_config(mcfg, p);
    const auto opts = train_options(config.at("train"), train_seed);
    const int max_windows = s.value("max_windows", 32);

    SignedRelationResult out;
    out.labels = p.dataset.labels;
    const auto full = run_experiment(p, cfg, opts, init_seed);
    out.model_silhouette = mean_window_silhouette(full.state, cfg, p.test, out.labels, max_windows);
    out.model_embedding = representations(full.state, cfg, {p.test.inputs.front()}).front();

    model::ModelConfig control = cfg;
    control.adjacency_mode = model::AdjacencyMode::Provided;
    control.basis = graph::BasisSpec::gegenbauer(1, 1.0);
    control.share_theta_dims = false;
    const auto theta_v = s.value("control_theta", std::vector<double>{1.0, 0.5});
    if (theta_v.size() != 2 || theta_v[0] < 0.0 || theta_v[1] < 0.0) {
        throw ConfigError("synth.control_theta must hold two nonnegative coefficients");
    }
    std::mt19937_64 rng(init_seed);
    auto state = model::init_state(control, p.adjacency, rng);
    train::TrainOptions copts = opts;
    for (int b = 0; b < control.blocks; ++b) {
        const std::string name = "block" + std::to_string(b) + "/theta";
        Matrix& theta = state.params.at(name);
        for (Eigen::Index d = 0; d < theta.cols(); ++d) {
            theta(0, d) = theta_v[0];
            theta(1, d) = theta_v[1];
        }
        copts.frozen.push_back(name);
    }
    train::fit(state, control, p.train, p.validation, p.norm, copts);
    out.control_silhouette = mean_window_silhouette(state, control, p.test, out.labels, max_windows);
    out.control_embedding = representations(state, control, {p.test.inputs.front()}).front();
    return out;
}

void write_embedding_csv(std::ostream& os, const Tensor3& z) {
    os << "node_id,t,dim,value\n";
    os.precision(12);
    for (int n = 0; n < z.nodes(); ++n)
        for (int t = 0; t < z.steps(); ++t)
            for (int d = 0; d < z.dims(); ++d) os << n << ',' << t << ',' << d << ',' << z(n, t, d) << '\n';
}

void write_embedding_vectors_csv(std::ostream& os, const Tensor3& z, const std::vector<int>& labels) {
    const Matrix flat = z.packed();
    os << "node_id,label";
    for (Eigen::Index c = 0; c < flat.cols(); ++c) os << ",v" << c;
    os << '\n';
    os.precision(12);
    for (Eigen::Index n = 0; n < flat.rows(); ++n) {
        os << n << ',' << (static_cast<std::size_t>(n) < labels.size() ? labels[n] : -1);
        for (Eigen::Index c = 0; c < flat.cols(); ++c) os << ',' << flat(n, c);
        os << '\n';
    }
}

int cmd_train(const ExperimentSpec& spec, const json& config, std::ostream& out) {
    std::mt19937_64 master(spec.seed);
    const RunSeeds seeds = RunSeeds::draw(master);
    const auto trained = train_from_config(config, seeds);
    const Prepared& p = trained.prepared;
    const RunResult& result = trained.result;
    const auto& cfg = result.config;
    const std::uint64_t data_seed = seeds.data;

    const fs::path dir(spec.out_dir);
    model::save_checkpoint((dir / "model.ckpt").string(), cfg, result.state);
    {
        auto os = open_out(dir / "history.csv");
        train::write_history_csv(os, result.run);
    }
    write_json(dir / "normalizer.json", p.norm.to_json());
    const auto ratios = config.at("data").value("split", std::vector<double>{0.6, 0.2, 0.2});
    write_json(dir / "dataset.json", data::manifest(p.dataset, p.norm, {ratios[0], ratios[1], ratios[2]}, data_seed));
    json metrics = {{"mae", result.test.mae},
                    {"rmse", result.test.rmse},
                    {"baseline_mae", result.baseline.mae},
                    {"baseline_rmse", result.baseline.rmse},
                    {"epochs_run", result.run.history.size()},
                    {"best_epoch", result.run.best_epoch},
                    {"seed", spec.seed}};
    write_json(dir / "metrics.json", metrics);
    out << "test MAE " << result.test.mae << "  RMSE " << result.test.rmse << "  (persistence MAE "
        << result.baseline.mae << ")\n";
    return kOk;
}

int cmd_ablate(const ExperimentSpec& spec, const json& config, std::ostream& out) {
    const json& a = config.at("ablate");
    const auto variants = ablation_variants(a.value("axis", "all"));
    const int seeds = a.value("seeds", 1);
    if (seeds < 1) throw ConfigError("ablate.seeds must be >= 1");
    const std::string dataset_name = config.at("data").value("source", "seasonal");
    std::mt19937_64 master(spec.seed);

    const fs::path dir(spec.out_dir);
    auto runs_os = open_out(dir / "ablation_runs.csv");
    runs_os << "id,variant,dataset,seed,mae,rmse\n";
    runs_os.precision(10);
    std::vector<double> mae_sum(variants.size(), 0.0), rmse_sum(variants.size(), 0.0);
    for (int s = 0; s < seeds; ++s) {
        const auto results = run_variants(config, variants, RunSeeds::draw(master));
        for (std::size_t v = 0; v < variants.size(); ++v) {
            const auto& r = results[v];
            runs_os << variants[v].id << ',' << variants[v].name << ',' << dataset_name << ',' << s << ','
                    << r.test.mae << ',' << r.test.rmse << '\n';
            mae_sum[v] += r.test.mae;
            rmse_sum[v] += r.test.rmse;
        }
    }
    auto os = open_out(dir / "ablation.csv");
    os << "id,variant,dataset,mae,rmse\n";
    os.precision(10);
    for (std::size_t v = 0; v < variants.size(); ++v) {
        os << variants[v].id << ',' << variants[v].name << ',' << dataset_name << ',' << mae_sum[v] / seeds << ','
           << rmse_sum[v] / seeds << '\n';
        out << std::left << std::setw(5) << variants[v].id << ' ' << std::setw(44) << variants[v].name << " MAE "
            << mae_sum[v] / seeds << "  RMSE " << rmse_sum[v] / seeds << '\n';
    }
    return kOk;
}

int cmd_theory(const ExperimentSpec& spec, const json& config, std::ostream& out) {
    const json& th = config.at("theory");
    std::mt19937_64 master(spec.seed);
    const fs::path dir(spec.out_dir);
    json report;

    {
        const json& l = th.at("lemma");
        const auto lemma = column_sampling_experiment(l, next_seed(master));
        const auto& noisy = lemma.noisy;
        const auto& exact = lemma.exact;
        const int trials = l.value("trials", 500);
        report["lemma"] = {{"epsilon", noisy.epsilon},
                           {"rhs", noisy.rhs},
                           {"violation_rate", noisy.violation_rate},
                           {"max_lhs", noisy.max_lhs},
                           {"exact_rank_max_error", exact.max_lhs}};
        out << "column sampling: violation rate " << noisy.violation_rate << " over " << trials
            << " trials, exact-rank max error " << exact.max_lhs << '\n';
    }

    {
        const json& o = th.at("orthogonality");
        const auto rows = orthogonality_report(o.value("degree", 6), o.value("alpha", 1.0));
        auto os = open_out(dir / "orthogonality.csv");
        os << "basis,residual,orthogonal\n";
        for (const auto& r : rows) {
            os << r.basis << ',' << r.residual << ',' << (r.orthogonal ? "true" : "false") << '\n';
            report["orthogonality"][r.basis] = {{"residual", r.residual}, {"orthogonal", r.orthogonal}};
            out << "orthogonality " << std::left << std::setw(11) << r.basis << " residual " << r.residual
                << (r.orthogonal ? "  orthogonal" : "  not orthogonal") << '\n';
        }
    }

    const json& m = config.at("model");
    const RunSeeds seeds = RunSeeds::draw(master);
    const auto ds = build_dataset(config.at("data"), seeds.data);
    const auto mode = ds.adjacency ? model::AdjacencyMode::Provided : model::AdjacencyMode::Pearson;
    Prepared p = prepare(ds, config.at("data"), m.value("lookback", 24), m.value("horizon", 3), mode);

    {
        const auto spectrum = graph::eigendecompose(graph::normalized_laplacian(graph::Adjacency(p.adjacency)));
        const auto density = graph::signal_density(spectrum, p.train_series.snapshot(0));
        const double alpha = graph::fit_weight_alpha(density);
        auto os = open_out(dir / "density.csv");
        os << "lambda,density,cumulative\n";
        os.precision(12);
        for (std::size_t i = 0; i < density.grid.size(); ++i) {
            os << density.grid[i] << ',' << density.density[i] << ',' << density.cumulative[i] << '\n';
        }
        report["density"] = {{"fitted_alpha", alpha}, {"grid_points", density.grid.size()}};
        out << "signal density: fitted alpha " << alpha << '\n';
    }

    {
        const json& r = th.at("race");
        const auto curves = filter_race(p.adjacency, p.train_series, r.value("degree", 6), r.value("alpha", 1.0),
                                        r.value("shift", 1), r.value("epochs", 20));
        auto os = open_out(dir / "convergence.csv");
        os << "epoch,basis,train_loss\n";
        os.precision(12);
        for (const auto& [name, curve] : curves) {
            for (std::size_t e = 0; e < curve.size(); ++e) os << e << ',' << name << ',' << curve[e] << '\n';
            report["race"][name] = curve.back();
            out << "race " << std::left << std::setw(11) << name << " loss after " << curve.size() - 1
                << " steps " << curve.back() << '\n';
        }
    }

    if (th.value("model_race", false)) {
        const auto curves = model_race(config, seeds);
        auto os = open_out(dir / "model_convergence.csv");
        os << "epoch,basis,train_loss\n";
        os.precision(12);
        for (const auto& [name, curve] : curves) {
            for (std::size_t e = 0; e < curve.size(); ++e) os << e << ',' << name << ',' << curve[e] << '\n';
            report["model_race"][name] = curve.empty() ? 0.0 : curve.back();
        }
    }
    write_json(dir / "report.json", report);
    return kOk;
}

int cmd_twl(const ExperimentSpec& spec, const json& config, std::ostream& out) {
    const json& w = config.at("twl");
    const auto paths = w.value("graphs", std::vector<std::string>{});
    if (paths.empty()) throw ConfigError("twl.graphs must list at least one DTDG file");
    const int steps = w.value("steps", -1);
    const fs::path dir(spec.out_dir);
    json report;
    std::vector<wl::Dtdg> graphs;
    for (const auto& path : paths) graphs.push_back(wl::load_dtdg(path));

    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto& g = graphs[i];
        const std::string name = fs::path(paths[i]).stem().string();
        const int t = w.value("time", -1) < 0 ? g.steps() - 1 : w.value("time", -1);
        if (t >= g.steps()) throw ConfigError("twl.time is beyond the last snapshot of " + paths[i]);
        const auto history = wl::refine_until_stable(g, steps);
        {
            auto os = open_out(dir / ("colors_" + name + ".csv"));
            wl::write_color_table(os, history);
        }
        const auto& final = history.back();
        json pairs = json::array();
        int same = 0;
        for (int u = 0; u < g.nodes(); ++u)
            for (int v = u + 1; v < g.nodes(); ++v) {
                const bool differ = final.color(u, t) != final.color(v, t);
                if (!differ) ++same;
                pairs.push_back({{"u", u}, {"v", v}, {"distinguishable", differ}});
            }
        const auto self = wl::wl_test(g, g, steps);
        json entry = {{"path", paths[i]},
                      {"nodes", g.nodes()},
                      {"steps", g.steps()},
                      {"refinements", final.step},
                      {"time", t},
                      {"pairs", pairs},
                      {"self_test", wl::to_string(self.verdict)}};
        out << name << ": N=" << g.nodes() << " T=" << g.steps() << ", stable after " << final.step
            << " refinements; at t=" << t << ' ' << same << " indistinguishable pair(s)";
        for (const auto& pr : pairs)
            if (!pr["distinguishable"].get<bool>()) out << " (" << pr["u"] << ',' << pr["v"] << ')';
        out << "; self-test " << wl::to_string(self.verdict) << '\n';
        if (g.topology_fixed()) {
            const auto sc = wl::check_spectral_conditions(g);
            entry["spectral"] = {{"repeated_eigenvalues", sc.repeated_eigenvalues},
                                 {"missing_components", sc.missing.size()}};
        }
        report["graphs"].push_back(entry);
    }
    for (std::size_t i = 0; i < graphs.size(); ++i)
        for (std::size_t j = i + 1; j < graphs.size(); ++j) {
            if (graphs[i].nodes() != graphs[j].nodes() || graphs[i].steps() != graphs[j].steps() ||
                graphs[i].dims() != graphs[j].dims()) {
                continue;
            }
            const auto r = wl::wl_test(graphs[i], graphs[j], steps);
            report["comparisons"].push_back({{"first", paths[i]},
                                             {"second", paths[j]},
                                             {"verdict", wl::to_string(r.verdict)},
                                             {"separating_step", r.separating_step}});
            out << paths[i] << " vs " << paths[j] << ": " << wl::to_string(r.verdict);
            if (r.separating_step >= 0) out << " (step " << r.separating_step << ')';
            out << '\n';
        }
    write_json(dir / "twl.json", report);
    return kOk;
}

int cmd_synth(const ExperimentSpec& spec, const json& config, std::ostream& out) {
    const auto r = signed_relation_experiment(config, spec.seed);
    const fs::path dir(spec.out_dir);
    {
        auto os = open_out(dir / "embeddings_model.csv");
        write_embedding_csv(os, r.model_embedding);
    }
    {
        auto os = open_out(dir / "embeddings_control.csv");
        write_embedding_csv(os, r.control_embedding);
    }
    {
        auto os = open_out(dir / "embedding_vectors_model.csv");
        write_embedding_vectors_csv(os, r.model_embedding, r.labels);
    }
    {
        auto os = open_out(dir / "embedding_vectors_control.csv");
        write_embedding_vectors_csv(os, r.control_embedding, r.labels);
    }
    {
        auto os = open_out(dir / "labels.csv");
        os << "node_id,label\n";
        for (std::size_t i = 0; i < r.labels.size(); ++i) os << i << ',' << r.labels[i] << '\n';
    }
    write_json(dir / "silhouette.json",
               {{"model", r.model_silhouette}, {"control", r.control_silhouette}, {"seed", spec.seed}});
    out << "silhouette: model " << r.model_silhouette << "  low-pass control " << r.control_silhouette << '\n';
    return kOk;
}

int cmd_forecast(const ExperimentSpec& spec, const json& config, std::ostream& out) {
    const json& f = config.at("forecast");
    const std::string ckpt = f.value("checkpoint", "");
    const std::string input = f.value("input", "");
    if (ckpt.empty() || input.empty()) throw ConfigError("forecast.checkpoint and forecast.input are required");
    const auto [cfg, state] = model::load_checkpoint(ckpt);
    data::CsvOptions o;
    o.layout = f.value("layout", "variable_major") == "time_major" ? data::Layout::TimeMajor
                                                                    : data::Layout::VariableMajor;
    o.dims = cfg.dims;
    const auto ds = data::load_csv(input, o);
    if (ds.nodes() != cfg.nodes) throw DataError("input has " + std::to_string(ds.nodes()) + " variables, model expects " + std::to_string(cfg.nodes));
    if (ds.length() < cfg.lookback) throw DataError("input is shorter than the lookback window");
    Tensor3 x = ds.values.time_slice(ds.length() - cfg.lookback, cfg.lookback);

    const std::string norm_path = f.value("normalizer", "");
    std::vector<double> offset(cfg.nodes, 0.0), scale(cfg.nodes, 1.0);
    if (!norm_path.empty()) {
        std::ifstream is(norm_path);
        if (!is) throw DataError("cannot open '" + norm_path + "'");
        const json nj = json::parse(is);
        offset = nj.at("offset").get<std::vector<double>>();
        scale = nj.at("scale").get<std::vector<double>>();
        if (static_cast<int>(offset.size()) != cfg.nodes) throw DataError("normalizer does not match the model");
    }
    for (int n = 0; n < x.nodes(); ++n)
        for (int t = 0; t < x.steps(); ++t)
            for (int d = 0; d < x.dims(); ++d) x(n, t, d) = (x(n, t, d) - offset[n]) / scale[n];
    Tensor3 y = model::forward(x, state, cfg);
    for (int n = 0; n < y.nodes(); ++n)
        for (int h = 0; h < y.steps(); ++h)
            for (int d = 0; d < y.dims(); ++d) y(n, h, d) = y(n, h, d) * scale[n] + offset[n];

    auto os = open_out(fs::path(spec.out_dir) / "forecast.csv");
    os << "node_id,h,dim,value\n";
    os.precision(12);
    for (int n = 0; n < y.nodes(); ++n)
        for (int h = 0; h < y.steps(); ++h)
            for (int d = 0; d < y.dims(); ++d) os << n << ',' << h << ',' << d << ',' << y(n, h, d) << '\n';
    out << "wrote " << y.nodes() << " x " << y.steps() << " x " << y.dims() << " forecast\n";
    return kOk;
}

int run(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
    try {
        using Command = int (*)(const ExperimentSpec&, const json&, std::ostream&);
        const std::map<std::string, Command> commands = {{"train", cmd_train}, {"ablate", cmd_ablate},
                                                         {"theory", cmd_theory}, {"twl", cmd_twl},
                                                         {"synth", cmd_synth}, {"forecast", cmd_forecast}};
        const auto it = commands.find(spec.command);
        if (it == commands.end()) {
            throw ConfigError("unknown command '" + spec.command + "' (valid: train, ablate, theory, twl, synth, forecast)");
        }
        const json config = effective_config(spec);
        std::error_code ec;
        fs::create_directories(spec.out_dir, ec);
        if (ec) throw ConfigError("cannot create output directory '" + spec.out_dir + "': " + ec.message());
        write_json(fs::path(spec.out_dir) / "manifest.json", {{"command", spec.command},
                                                               {"config_path", spec.config_path},
                                                               {"seed", spec.seed},
                                                               {"overrides", spec.overrides},
                                                               {"config", config}});
        return it->second(spec, config, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const ParameterError& e) {
        err << "parameter error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const ShapeError& e) {
        err << "shape error: " << e.what() << '\n';
        return kDataError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

} // namespace spectemp::harness
