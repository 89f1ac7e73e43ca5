#include "spectemp/dataio.hpp"

#include "spectemp/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace spectemp::data {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_cell(std::string_view cell, int line) {
    cell = trim(cell);
    if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NAN" || cell == "NA") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("non-numeric cell '" + std::string(cell) + "'", line);
    }
    return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

} // namespace

Dataset read_csv(std::istream& is, const CsvOptions& options, const std::string& name) {
    if (options.dims < 1) throw ConfigError("csv: dims must be >= 1");
    std::vector<std::vector<double>> rows;
    std::vector<int> row_lines;
    std::string line;
    int line_no = 0;
    bool header_pending = options.header;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        std::vector<double> row;
        for (auto cell : split_commas(line)) row.push_back(parse_cell(cell, line_no));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError("ragged row: expected " + std::to_string(rows.front().size()) + " cells, got " +
                                 std::to_string(row.size()),
                             line_no);
        }
        if (row.size() % options.dims != 0) {
            throw ParseError("row width " + std::to_string(row.size()) + " is not a multiple of dims", line_no);
        }
        rows.push_back(std::move(row));
        row_lines.push_back(line_no);
    }
    if (rows.empty()) throw DataError("csv: no data rows");

    const int r = static_cast<int>(rows.size());
    const int groups = static_cast<int>(rows.front().size()) / options.dims;
    const int d_count = options.dims;
    const bool time_major = options.layout == Layout::TimeMajor;
    const int n_count = time_major ? groups : r;
    const int l_count = time_major ? r : groups;
    Dataset ds;
    ds.name = name;
    ds.values = Tensor3(n_count, l_count, d_count);
    for (int i = 0; i < r; ++i) {
        for (int g = 0; g < groups; ++g) {
            for (int d = 0; d < d_count; ++d) {
                const double v = rows[i][g * d_count + d];
                if (time_major) {
                    ds.values(g, i, d) = v;
                } else {
                    ds.values(i, g, d) = v;
                }
            }
        }
    }

    for (int n = 0; n < n_count; ++n) {
        for (int d = 0; d < d_count; ++d) {
            for (int t = 0; t < l_count; ++t) {
                if (!std::isnan(ds.values(n, t, d))) continue;
                const int line_of = row_lines[time_major ? t : n];
                if (options.nan_policy == NanPolicy::Strict) {
                    throw ParseError("missing value (variable " + std::to_string(n) + ", step " +
                                         std::to_string(t) + ") under the strict NaN policy",
                                     line_of);
                }
                if (t == 0) throw ParseError("leading missing value cannot be forward-filled", line_of);
                ds.values(n, t, d) = ds.values(n, t - 1, d);
            }
        }
    }
    return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "'");
    return read_csv(is, options, path);
}

void write_csv(std::ostream& os, const Tensor3& values, const CsvOptions& options) {
    const bool time_major = options.layout == Layout::TimeMajor;
    const int rows = time_major ? values.steps() : values.nodes();
    const int groups = time_major ? values.nodes() : values.steps();
    os.precision(17);
    if (options.header) {
        for (int g = 0; g < groups; ++g)
            for (int d = 0; d < values.dims(); ++d)
                os << (g || d ? "," : "") << (time_major ? "var" : "t") << g << "_d" << d;
        os << '\n';
    }
    for (int i = 0; i < rows; ++i) {
        for (int g = 0; g < groups; ++g) {
            for (int d = 0; d < values.dims(); ++d) {
                if (g || d) os << ',';
                os << (time_major ? values(g, i, d) : values(i, g, d));
            }
        }
        os << '\n';
    }
}

void write_csv(const std::string& path, const Tensor3& values, const CsvOptions& options) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    write_csv(os, values, options);
}

NormMethod parse_norm_method(const std::string& name) {
    if (name == "zscore") return NormMethod::ZScore;
    if (name == "minmax") return NormMethod::MinMax;
    if (name == "none") return NormMethod::None;
    throw ConfigError("unknown normalization '" + name + "' (valid: zscore, minmax, none)");
}

std::string to_string(NormMethod m) {
    switch (m) {
    case NormMethod::ZScore: return "zscore";
    case NormMethod::MinMax: return "minmax";
    case NormMethod::None: return "none";
    }
    return "";
}

Normalizer Normalizer::fit(const Tensor3& train, NormMethod method) {
    Normalizer z;
    z.method_ = method;
    const int n_count = train.nodes();
    z.offset_.assign(n_count, 0.0);
    z.scale_.assign(n_count, 1.0);
    if (method == NormMethod::None) return z;
    if (train.steps() == 0) throw DataError("normalizer: empty training split");
    const double count = static_cast<double>(train.steps()) * train.dims();
    for (int n = 0; n < n_count; ++n) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        double sum = 0.0;
        for (int t = 0; t < train.steps(); ++t)
            for (int d = 0; d < train.dims(); ++d) {
                const double v = train(n, t, d);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                sum += v;
            }
        double spread = 0.0;
        if (method == NormMethod::ZScore) {
            const double mean = sum / count;
            double ss = 0.0;
            for (int t = 0; t < train.steps(); ++t)
                for (int d = 0; d < train.dims(); ++d) ss += (train(n, t, d) - mean) * (train(n, t, d) - mean);
            z.offset_[n] = mean;
            spread = std::sqrt(ss / count);
        } else {
            z.offset_[n] = lo;
            spread = hi - lo;
        }
        if (spread > 0.0) {
            z.scale_[n] = spread;
        } else {
            z.flagged_.push_back(n);
        }
    }
    return z;
}

Tensor3 Normalizer::apply(const Tensor3& x) const {
    if (method_ == NormMethod::None && offset_.empty()) return x;
    if (static_cast<std::size_t>(x.nodes()) != offset_.size()) throw ShapeError("normalizer: variable count mismatch");
    Tensor3 y = x;
    for (int n = 0; n < x.nodes(); ++n)
        for (int t = 0; t < x.steps(); ++t)
            for (int d = 0; d < x.dims(); ++d) y(n, t, d) = (x(n, t, d) - offset_[n]) / scale_[n];
    return y;
}

Tensor3 Normalizer::inverse(const Tensor3& y) const {
    if (method_ == NormMethod::None && offset_.empty()) return y;
    if (static_cast<std::size_t>(y.nodes()) != offset_.size()) throw ShapeError("normalizer: variable count mismatch");
    Tensor3 x = y;
    for (int n = 0; n < y.nodes(); ++n)
        for (int t = 0; t < y.steps(); ++t)
            for (int d = 0; d < y.dims(); ++d) x(n, t, d) = y(n, t, d) * scale_[n] + offset_[n];
    return x;
}

nlohmann::json Normalizer::to_json() const {
    return {{"method", to_string(method_)}, {"offset", offset_}, {"scale", scale_}, {"zero_spread_variables", flagged_}};
}

std::array<Tensor3, 3> split(const Tensor3& values, const std::array<double, 3>& ratios, int min_length) {
    double total = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw ConfigError("split ratios must be nonnegative");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    const int len = values.steps();
    const int l0 = static_cast<int>(std::llround(len * ratios[0]));
    const int l1 = std::min(len - l0, static_cast<int>(std::llround(len * ratios[1])));
    const int l2 = len - l0 - l1;
    for (int l : {l0, l1, l2}) {
        if (min_length > 0 && l < min_length) {
            throw DataError("split of length " + std::to_string(l) + " is too short for one window (" +
                            std::to_string(min_length) + " steps)");
        }
    }
    return {values.time_slice(0, l0), values.time_slice(l0, l1), values.time_slice(l0 + l1, l2)};
}

WindowSet make_windows(const Tensor3& values, int lookback, int horizon, int stride) {
    if (lookback < 1 || horizon < 1 || stride < 1) throw ShapeError("windows: T, H and stride must be >= 1");
    const int len = values.steps();
    if (lookback + horizon > len) {
        throw ShapeError("windows: T + H = " + std::to_string(lookback + horizon) + " exceeds series length " +
                         std::to_string(len));
    }
    WindowSet w;
    const int count = (len - lookback - horizon) / stride + 1;
    for (int b = 0; b < count; ++b) {
        const int start = b * stride;
        w.inputs.push_back(values.time_slice(start, lookback));
        w.targets.push_back(values.time_slice(start + lookback, horizon));
        w.origins.push_back(start);
    }
    return w;
}

std::vector<Tensor3> persistence_baseline(const WindowSet& windows, int horizon) {
    std::vector<Tensor3> out;
    out.reserve(windows.size());
    for (const auto& x : windows.inputs) {
        Tensor3 y(x.nodes(), horizon, x.dims());
        const Matrix last = x.snapshot(x.steps() - 1);
        for (int h = 0; h < horizon; ++h) y.set_snapshot(h, last);
        out.push_back(std::move(y));
    }
    return out;
}

ErrorMetrics error_metrics(const std::vector<Tensor3>& predictions, const std::vector<Tensor3>& targets) {
    if (predictions.size() != targets.size() || predictions.empty()) {
        throw ShapeError("metrics: need equally many nonempty predictions and targets");
    }
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (!predictions[i].same_shape(targets[i])) throw ShapeError("metrics: prediction/target shape mismatch");
        const auto& p = predictions[i].data();
        const auto& y = targets[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double e = p[k] - y[k];
            abs_sum += std::abs(e);
            sq_sum += e * e;
        }
        count += static_cast<double>(p.size());
    }
    return {abs_sum / count, std::sqrt(sq_sum / count)};
}

Dataset synth_signed_groups(int n_per_group, int length, double noise_sigma, std::uint64_t seed, int periods) {
    if (n_per_group < 1) throw ParameterError("signed groups: need at least one series per group");
    if (periods < 1 || length < 2 * periods) throw ParameterError("signed groups: need at least 2 samples per period");
    if (noise_sigma < 0.0) throw ParameterError("signed groups: noise sigma must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.5, 2.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    Dataset ds;
    ds.name = "signed_groups";
    ds.values = Tensor3(2 * n_per_group, length, 1);
    const double omega = 2.0 * std::numbers::pi * periods / length;
    for (int n = 0; n < 2 * n_per_group; ++n) {
        const bool cosine = n >= n_per_group;
        const double a = amp(rng);
        for (int t = 0; t < length; ++t) {
            const double base = cosine ? std::cos(omega * t) : std::sin(omega * t);
            ds.values(n, t, 0) = a * base + noise_sigma * noise(rng);
        }
        ds.labels.push_back(cosine ? 1 : 0);
    }
    return ds;
}

Dataset synth_seasonal(const SeasonalOptions& o) {
    if (o.nodes < 2 || o.period < 4 || o.periods < 2) throw ParameterError("seasonal: need N >= 2, period >= 4, >= 2 periods");
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n_count = o.nodes;
    const int len = o.period * o.periods;

    // Ring plus random chords keeps the graph connected.
    Matrix a = Matrix::Zero(n_count, n_count);
    for (int i = 0; i < n_count; ++i) {
        const int j = (i + 1) % n_count;
        if (i != j) a(i, j) = a(j, i) = 1.0;
    }
    for (int i = 0; i < n_count; ++i)
        for (int j = i + 2; j < n_count; ++j)
            if (uni(rng) < 0.2) a(i, j) = a(j, i) = 1.0;
    Vector inv_sqrt(n_count);
    for (int i = 0; i < n_count; ++i) inv_sqrt(i) = 1.0 / std::sqrt(a.row(i).sum());
    const Matrix a_norm = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();

    Matrix latent(n_count, len);
    const double w = 2.0 * std::numbers::pi / o.period;
    for (int n = 0; n < n_count; ++n) {
        const double level = normal(rng);
        const double slope = 0.5 * normal(rng);
        const double a1 = 0.5 + 1.5 * uni(rng);
        const double a2 = 0.2 + 0.6 * uni(rng);
        const double a3 = 0.1 + 0.3 * uni(rng);
        const double p1 = 2.0 * std::numbers::pi * uni(rng);
        const double p2 = 2.0 * std::numbers::pi * uni(rng);
        const double p3 = 2.0 * std::numbers::pi * uni(rng);
        for (int t = 0; t < len; ++t) {
            latent(n, t) = level + slope * t / len + a1 * std::sin(w * t + p1) + a2 * std::sin(2.0 * w * t + p2) +
                           a3 * std::sin(3.0 * w * t + p3);
        }
    }
    const Matrix observed = latent + o.coupling * a_norm * latent;

    Dataset ds;
    ds.name = "seasonal";
    ds.values = Tensor3(n_count, len, 1);
    for (int n = 0; n < n_count; ++n)
        for (int t = 0; t < len; ++t) ds.values(n, t, 0) = observed(n, t) + o.noise_sigma * normal(rng);
    ds.adjacency = a;
    return ds;
}

nlohmann::json manifest(const Dataset& ds, const Normalizer& norm, const std::array<double, 3>& ratios,
                        std::uint64_t seed) {
    return {{"name", ds.name},
            {"shape", {ds.nodes(), ds.length(), ds.dims()}},
            {"normalization", norm.to_json()},
            {"split_ratios", ratios},
            {"seed", seed},
            {"has_adjacency", ds.adjacency.has_value()},
            {"labels", ds.labels}};
}

} // namespace spectemp::data
