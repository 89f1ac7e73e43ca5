#include "spectemp/temporal_wl.hpp"

#include "spectemp/errors.hpp"
#include "spectemp/spectral_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace spectemp::wl {

Dtdg::Dtdg(int nodes, int dims) : nodes_(nodes), dims_(dims) {
    if (nodes < 1 || dims < 0) throw ShapeError("DTDG needs N >= 1 and D >= 0");
}

void Dtdg::add_snapshot(std::vector<std::pair<int, int>> edges, Matrix features) {
    if (features.rows() != nodes_ || features.cols() != dims_) {
        throw ShapeError("snapshot features must be N x D");
    }
    for (auto& [u, v] : edges) {
        if (u < 0 || v < 0 || u >= nodes_ || v >= nodes_) throw ShapeError("edge endpoint out of range");
        if (u == v) throw ShapeError("self-loops are not allowed in a DTDG");
        if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::vector<std::vector<int>> adj(nodes_);
    for (const auto& [u, v] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    snapshots_.push_back({std::move(edges), std::move(features)});
    neighbors_.push_back(std::move(adj));
}

bool Dtdg::topology_fixed() const {
    for (const auto& s : snapshots_)
        if (s.edges != snapshots_.front().edges) return false;
    return true;
}

Dtdg Dtdg::permuted(const std::vector<int>& perm) const {
    if (static_cast<int>(perm.size()) != nodes_) throw ShapeError("permutation size must equal N");
    Dtdg out(nodes_, dims_);
    for (const auto& s : snapshots_) {
        std::vector<std::pair<int, int>> edges;
        for (const auto& [u, v] : s.edges) edges.emplace_back(perm[u], perm[v]);
        Matrix f(nodes_, dims_);
        for (int v = 0; v < nodes_; ++v) f.row(perm[v]) = s.features.row(v);
        out.add_snapshot(std::move(edges), std::move(f));
    }
    return out;
}

namespace {

struct LineReader {
    std::istream& is;
    int line_no = 0;
    std::string line;

    // Next nonblank line, or false at end of input.
    bool next() {
        while (std::getline(is, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    }
};

std::vector<double> numbers_on(const std::string& line, int line_no) {
    std::istringstream ss(line);
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ParseError("expected a number, got '" + tok + "'", line_no);
        }
    }
    return out;
}

bool is_integer(double v) { return std::floor(v) == v && std::abs(v) < 1e9; }

} // namespace

Dtdg parse_dtdg(std::istream& is) {
    LineReader r{is, 0, {}};
    if (!r.next()) throw ParseError("missing header 'N T [D]'", 1);
    const auto header = numbers_on(r.line, r.line_no);
    if (header.size() < 2 || header.size() > 3 || !std::all_of(header.begin(), header.end(), is_integer)) {
        throw ParseError("header must be 'N T [D]' with integers", r.line_no);
    }
    const int n = static_cast<int>(header[0]);
    const int steps = static_cast<int>(header[1]);
    const int dims = header.size() == 3 ? static_cast<int>(header[2]) : 0;
    if (n < 1 || steps < 1 || dims < 0) throw ParseError("header needs N >= 1, T >= 1, D >= 0", r.line_no);

    Dtdg g(n, dims);
    for (int t = 0; t < steps; ++t) {
        std::vector<std::pair<int, int>> edges;
        while (true) {
            if (!r.next()) throw ParseError("snapshot " + std::to_string(t) + " is missing its '#' separator", r.line_no);
            if (r.line.find('#') != std::string::npos) break;
            const auto e = numbers_on(r.line, r.line_no);
            if (e.size() != 2 || !is_integer(e[0]) || !is_integer(e[1])) {
                throw ParseError("edge lines must be 'u v'", r.line_no);
            }
            const int u = static_cast<int>(e[0]);
            const int v = static_cast<int>(e[1]);
            if (u < 0 || v < 0 || u >= n || v >= n) throw ParseError("edge endpoint out of range", r.line_no);
            if (u == v) throw ParseError("self-loop", r.line_no);
            edges.emplace_back(u, v);
        }
        Matrix features(n, dims);
        for (int v = 0; v < n && dims > 0; ++v) {
            if (!r.next()) throw ParseError("snapshot " + std::to_string(t) + " has too few feature rows", r.line_no);
            const auto row = numbers_on(r.line, r.line_no);
            if (static_cast<int>(row.size()) != dims) {
                throw ParseError("feature row needs " + std::to_string(dims) + " values", r.line_no);
            }
            for (int d = 0; d < dims; ++d) features(v, d) = row[d];
        }
        g.add_snapshot(std::move(edges), std::move(features));
    }
    if (r.next()) throw ParseError("trailing content after the last snapshot", r.line_no);
    return g;
}

Dtdg load_dtdg(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "'");
    try {
        return parse_dtdg(is);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.reason(), e.line());
    }
}

void write_dtdg(std::ostream& os, const Dtdg& g) {
    os << g.nodes() << ' ' << g.steps();
    if (g.dims() > 0) os << ' ' << g.dims();
    os << '\n';
    os.precision(17);
    for (int t = 0; t < g.steps(); ++t) {
        const auto& s = g.snapshot(t);
        for (const auto& [u, v] : s.edges) os << u << ' ' << v << '\n';
        os << "#\n";
        for (int v = 0; v < g.nodes() && g.dims() > 0; ++v) {
            for (int d = 0; d < g.dims(); ++d) os << (d ? " " : "") << s.features(v, d);
            os << '\n';
        }
    }
}

int Palette::id(const std::vector<long long>& key) {
    const auto [it, inserted] = ids_.try_emplace(key, static_cast<int>(ids_.size()));
    return it->second;
}

int ColoringState::distinct() const {
    std::set<int> seen;
    for (const auto& row : colors) seen.insert(row.begin(), row.end());
    return static_cast<int>(seen.size());
}

ColoringState init_colors(const Dtdg& g, Palette& palette) {
    ColoringState s;
    s.colors.assign(g.steps(), std::vector<int>(g.nodes()));
    for (int t = 0; t < g.steps(); ++t) {
        const Matrix& f = g.snapshot(t).features;
        for (int v = 0; v < g.nodes(); ++v) {
            std::vector<long long> key(g.dims());
            for (int d = 0; d < g.dims(); ++d) key[d] = std::llround(f(v, d) / kFeatureQuantum);
            s.colors[t][v] = palette.id(key);
        }
    }
    return s;
}

ColoringState init_colors(const Dtdg& g) {
    Palette palette;
    return init_colors(g, palette);
}

ColoringState refine(const Dtdg& g, const ColoringState& state, Palette& palette) {
    if (static_cast<int>(state.colors.size()) != g.steps()) throw ShapeError("coloring belongs to another graph");
    ColoringState next;
    next.step = state.step + 1;
    next.colors.assign(g.steps(), std::vector<int>(g.nodes()));
    for (int t = 0; t < g.steps(); ++t) {
        const auto& nbrs = g.neighbors(t);
        for (int v = 0; v < g.nodes(); ++v) {
            std::vector<long long> key;
            key.reserve(nbrs[v].size() + 2);
            key.push_back(state.colors[t][v]);
            key.push_back(t > 0 ? state.colors[t - 1][v] : -1);
            std::vector<long long> around;
            for (int u : nbrs[v]) around.push_back(state.colors[t][u]);
            std::sort(around.begin(), around.end());
            key.insert(key.end(), around.begin(), around.end());
            next.colors[t][v] = palette.id(key);
        }
    }
    return next;
}

ColoringState refine(const Dtdg& g, const ColoringState& state) {
    Palette palette;
    return refine(g, state, palette);
}

std::vector<ColoringState> refine_until_stable(const Dtdg& g, int max_steps) {
    if (max_steps < 0) max_steps = g.nodes() * g.steps();
    std::vector<ColoringState> history{init_colors(g)};
    for (int l = 0; l < max_steps; ++l) {
        history.push_back(refine(g, history.back()));
        if (history.back().distinct() == history[history.size() - 2].distinct()) break;
    }
    return history;
}

std::string to_string(Verdict v) { return v == Verdict::NonIsomorphic ? "non-isomorphic" : "inconclusive"; }

namespace {

std::vector<int> end_multiset(const ColoringState& s) {
    std::vector<int> m = s.colors.back();
    std::sort(m.begin(), m.end());
    return m;
}

int joint_distinct(const ColoringState& a, const ColoringState& b) {
    std::set<int> seen;
    for (const auto* s : {&a, &b})
        for (const auto& row : s->colors) seen.insert(row.begin(), row.end());
    return static_cast<int>(seen.size());
}

} // namespace

WlResult wl_test(const Dtdg& g1, const Dtdg& g2, int steps) {
    if (g1.nodes() != g2.nodes() || g1.steps() != g2.steps() || g1.dims() != g2.dims()) {
        throw ShapeError("wl_test: graphs differ in N, T or D");
    }
    if (steps < 0) steps = g1.nodes() * g1.steps();
    Palette init;
    ColoringState a = init_colors(g1, init);
    ColoringState b = init_colors(g2, init);
    WlResult result;
    for (int l = 0;; ++l) {
        result.steps_run = l;
        if (end_multiset(a) != end_multiset(b)) {
            result.verdict = Verdict::NonIsomorphic;
            result.separating_step = l;
            return result;
        }
        if (l == steps) break;
        const int before = joint_distinct(a, b);
        Palette palette;
        a = refine(g1, a, palette);
        b = refine(g2, b, palette);
        if (joint_distinct(a, b) == before) {
            result.steps_run = l + 1;
            if (end_multiset(a) != end_multiset(b)) {
                result.verdict = Verdict::NonIsomorphic;
                result.separating_step = l + 1;
            }
            return result;
        }
    }
    return result;
}

bool distinguishable(const Dtdg& g, int u, int v, int t, int steps) {
    if (u < 0 || v < 0 || u >= g.nodes() || v >= g.nodes() || t < 0 || t >= g.steps()) {
        throw ShapeError("distinguishable: node or time out of range");
    }
    if (u == v) return false;
    ColoringState s;
    if (steps < 0) {
        s = refine_until_stable(g).back();
    } else {
        s = init_colors(g);
        for (int l = 0; l < steps; ++l) s = refine(g, s);
    }
    return s.color(u, t) != s.color(v, t);
}

SpectralReport check_spectral_conditions(const Dtdg& g, double tol) {
    if (g.steps() == 0) throw ShapeError("spectral check: graph has no snapshots");
    if (!g.topology_fixed()) throw ParameterError("spectral check requires a fixed topology");
    Matrix a = Matrix::Zero(g.nodes(), g.nodes());
    for (const auto& [u, v] : g.snapshot(0).edges) a(u, v) = a(v, u) = 1.0;
    const auto spectrum = graph::eigendecompose(graph::normalized_laplacian(graph::Adjacency(a)));
    SpectralReport report;
    report.repeated_eigenvalues = spectrum.has_repeated_eigenvalues();
    report.eigenvalues.assign(spectrum.eigenvalues.data(), spectrum.eigenvalues.data() + spectrum.size());
    for (int t = 0; t < g.steps(); ++t) {
        const Matrix x = g.dims() > 0 ? g.snapshot(t).features : Matrix::Ones(g.nodes(), 1);
        const Matrix coeffs = spectrum.eigenvectors.transpose() * x;
        for (int i = 0; i < spectrum.size(); ++i) {
            if (coeffs.row(i).norm() < tol) report.missing.push_back({t, i, spectrum.eigenvalues(i)});
        }
    }
    return report;
}

void write_color_table(std::ostream& os, const std::vector<ColoringState>& history) {
    os << "step,t,node,color\n";
    for (const auto& s : history)
        for (std::size_t t = 0; t < s.colors.size(); ++t)
            for (std::size_t v = 0; v < s.colors[t].size(); ++v)
                os << s.step << ',' << t << ',' << v << ',' << s.colors[t][v] << '\n';
}

} // namespace spectemp::wl
