#include "spectemp/frequency_temporal.hpp"

#include "spectemp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <ostream>

namespace spectemp::temporal {

SpectrumTensor::SpectrumTensor(int n, int s, int d, int full_length)
    : nodes(n), extent(s), dims(d), length_full(full_length),
      values(static_cast<std::size_t>(n) * s * d, Complex{0.0, 0.0}) {}

double SpectrumTensor::energy() const {
    double e = 0.0;
    for (const auto& v : values) e += std::norm(v);
    return e;
}

SpectrumTensor dft_time(const Tensor3& x) {
    const int n_nodes = x.nodes();
    const int len = x.steps();
    const int dims = x.dims();
    SpectrumTensor out(n_nodes, len, dims, len);
    std::vector<double> series(len);
    for (int n = 0; n < n_nodes; ++n) {
        for (int d = 0; d < dims; ++d) {
            for (int t = 0; t < len; ++t) series[t] = x(n, t, d);
            const auto spec = dft(std::span<const double>(series));
            for (int k = 0; k < len; ++k) out(n, k, d) = spec[k];
        }
    }
    return out;
}

Tensor3 idft_time_real(const SpectrumTensor& spectrum, double* max_imag) {
    if (spectrum.mode_indices || spectrum.extent != spectrum.length_full) {
        throw ShapeError("idft_time_real: spectrum must be full length (pad it first)");
    }
    const int len = spectrum.extent;
    Tensor3 out(spectrum.nodes, len, spectrum.dims);
    std::vector<Complex> series(len);
    double worst = 0.0;
    for (int n = 0; n < spectrum.nodes; ++n) {
        for (int d = 0; d < spectrum.dims; ++d) {
            for (int k = 0; k < len; ++k) series[k] = spectrum(n, k, d);
            const auto time = idft(std::span<const Complex>(series));
            for (int t = 0; t < len; ++t) {
                out(n, t, d) = time[t].real();
                worst = std::max(worst, std::abs(time[t].imag()));
            }
        }
    }
    if (max_imag) *max_imag = worst;
    return out;
}

std::vector<int> lowest_modes(int count) {
    std::vector<int> modes(std::max(count, 0));
    std::iota(modes.begin(), modes.end(), 0);
    return modes;
}

std::vector<int> random_modes(int length, int count, std::uint64_t seed) {
    if (count > length || count < 0) throw ShapeError("random_modes: need 0 <= S <= T");
    std::vector<int> all(length);
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(seed);
    std::vector<int> picked;
    std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
    std::sort(picked.begin(), picked.end());
    return picked;
}

void validate_modes(const std::vector<int>& modes, int length) {
    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (modes[i] < 0 || modes[i] >= length) {
            throw ShapeError("mode index " + std::to_string(modes[i]) + " outside [0, " +
                             std::to_string(length) + ")");
        }
        if (i > 0 && modes[i] <= modes[i - 1]) {
            throw ShapeError("mode indices must be strictly ascending");
        }
    }
}

SpectrumTensor select_modes(const SpectrumTensor& full, const std::vector<int>& modes) {
    if (full.mode_indices) throw ShapeError("select_modes: input is already mode-selected");
    validate_modes(modes, full.extent);
    const int s_count = static_cast<int>(modes.size());
    SpectrumTensor out(full.nodes, s_count, full.dims, full.length_full);
    out.mode_indices = modes;
    for (int n = 0; n < full.nodes; ++n)
        for (int s = 0; s < s_count; ++s)
            for (int d = 0; d < full.dims; ++d) out(n, s, d) = full(n, modes[s], d);
    return out;
}

SpectrumTensor pad_modes(const SpectrumTensor& selected, const std::vector<int>& modes, int length) {
    if (static_cast<int>(modes.size()) != selected.extent) {
        throw ShapeError("pad_modes: mode count does not match the selected extent");
    }
    validate_modes(modes, length);
    SpectrumTensor out(selected.nodes, length, selected.dims, length);
    for (int n = 0; n < selected.nodes; ++n)
        for (int s = 0; s < selected.extent; ++s)
            for (int d = 0; d < selected.dims; ++d) out(n, modes[s], d) = selected(n, s, d);
    return out;
}

std::pair<Tensor3, Tensor3> decompose(const Tensor3& x, int window) {
    if (window < 1) throw ShapeError("decompose: window must be >= 1");
    if (window > x.steps()) throw ShapeError("decompose: window exceeds series length");
    Tensor3 trend(x.nodes(), x.steps(), x.dims());
    for (int n = 0; n < x.nodes(); ++n) {
        for (int d = 0; d < x.dims(); ++d) {
            for (int t = window - 1; t < x.steps(); ++t) {
                double acc = 0.0;
                for (int j = t - window + 1; j <= t; ++j) acc += x(n, j, d);
                trend(n, t, d) = acc / window;
            }
        }
    }
    Tensor3 seasonal = x - trend;
    return {std::move(trend), std::move(seasonal)};
}

SpectralWeights::SpectralWeights(int nodes, int dims, int modes, bool share_nodes, bool share_dims)
    : nodes_(nodes), dims_(dims), modes_(modes), share_nodes_(share_nodes), share_dims_(share_dims) {
    const int count = (share_nodes ? 1 : nodes) * (share_dims ? 1 : dims);
    slots_.assign(count, ComplexMatrix::Zero(modes, modes));
}

SpectralWeights SpectralWeights::identity(int nodes, int dims, int modes, bool share_nodes,
                                          bool share_dims) {
    SpectralWeights w(nodes, dims, modes, share_nodes, share_dims);
    for (auto& s : w.slots_) s = ComplexMatrix::Identity(modes, modes);
    return w;
}

int SpectralWeights::slot_index(int n, int d) const {
    const int node_part = share_nodes_ ? 0 : n;
    const int dim_part = share_dims_ ? 0 : d;
    return node_part * (share_dims_ ? 1 : dims_) + dim_part;
}

namespace {

void check_fdm_params(const Tensor3& z, const TemporalFdmParams& params) {
    validate_modes(params.mode_indices, z.steps());
    const auto& w = params.weights;
    if (w.modes() != static_cast<int>(params.mode_indices.size())) {
        throw ShapeError("temporal filter size does not match the mode count");
    }
    if ((!w.shares_nodes() && w.nodes() != z.nodes()) || (!w.shares_dims() && w.dims() != z.dims())) {
        throw ShapeError("temporal filter bank does not match the signal's variables/dims");
    }
}

} // namespace

Tensor3 coarse_fdm(const Tensor3& z, const TemporalFdmParams& params, double* max_imag) {
    check_fdm_params(z, params);
    const auto selected = select_modes(dft_time(z), params.mode_indices);
    SpectrumTensor filtered = selected;
    const int s_count = selected.extent;
    Eigen::RowVectorXcd row(s_count);
    for (int n = 0; n < z.nodes(); ++n) {
        for (int d = 0; d < z.dims(); ++d) {
            for (int s = 0; s < s_count; ++s) row(s) = selected(n, s, d);
            const Eigen::RowVectorXcd out = row * params.weights.at(n, d);
            for (int s = 0; s < s_count; ++s) filtered(n, s, d) = out(s);
        }
    }
    return idft_time_real(pad_modes(filtered, params.mode_indices, z.steps()), max_imag);
}

Tensor3 fine_fdm(const Tensor3& z, const TemporalFdmParams& params, double* max_imag) {
    auto [trend, seasonal] = decompose(z, params.decomp_window);
    return trend + coarse_fdm(seasonal, params, max_imag);
}

namespace {

Tensor3 project_features(const Tensor3& x, const Matrix& proj, bool rectify) {
    if (proj.rows() != x.dims() || proj.cols() != x.dims()) {
        throw ShapeError("attention projection must be D x D");
    }
    Tensor3 out(x.nodes(), x.steps(), x.dims());
    for (int n = 0; n < x.nodes(); ++n) {
        for (int t = 0; t < x.steps(); ++t) {
            for (int e = 0; e < x.dims(); ++e) {
                double acc = 0.0;
                for (int d = 0; d < x.dims(); ++d) acc += proj(e, d) * x(n, t, d);
                out(n, t, e) = rectify ? std::max(acc, 0.0) : acc;
            }
        }
    }
    return out;
}

struct AttentionParts {
    SpectrumTensor q;
    SpectrumTensor k;
    SpectrumTensor v;
    std::vector<Matrix> maps;
};

AttentionParts attention_parts(const Tensor3& trend, const Tensor3& seasonal, const TemporalFdmParams& params) {
    if (!params.attention) throw ConfigError("spectral attention requires attention weights");
    if (!trend.same_shape(seasonal)) throw ShapeError("trend and seasonal shapes differ");
    validate_modes(params.mode_indices, trend.steps());
    const auto& att = *params.attention;
    AttentionParts parts;
    parts.q = select_modes(dft_time(project_features(trend, att.query, att.rectify)), params.mode_indices);
    parts.k = select_modes(dft_time(project_features(seasonal, att.key, att.rectify)), params.mode_indices);
    parts.v = select_modes(dft_time(project_features(seasonal, att.value, att.rectify)), params.mode_indices);
    const int s_count = parts.q.extent;
    const int dims = trend.dims();
    const double scale = 1.0 / std::sqrt(static_cast<double>(s_count) * dims);
    for (int n = 0; n < trend.nodes(); ++n) {
        Matrix a(s_count, s_count);
        for (int i = 0; i < s_count; ++i) {
            for (int j = 0; j < s_count; ++j) {
                Complex acc{0.0, 0.0};
                for (int d = 0; d < dims; ++d) acc += parts.q(n, i, d) * parts.k(n, j, d);
                a(i, j) = acc.real() * scale;
            }
            const double m = a.row(i).maxCoeff();
            a.row(i) = (a.row(i).array() - m).exp().matrix();
            a.row(i) /= a.row(i).sum();
        }
        parts.maps.push_back(std::move(a));
    }
    return parts;
}

} // namespace

std::vector<Matrix> spectral_attention_maps(const Tensor3& trend, const Tensor3& seasonal,
                                            const TemporalFdmParams& params) {
    return attention_parts(trend, seasonal, params).maps;
}

Tensor3 spectral_attention(const Tensor3& trend, const Tensor3& seasonal, const TemporalFdmParams& params) {
    auto parts = attention_parts(trend, seasonal, params);
    SpectrumTensor mixed = parts.v;
    const int s_count = parts.v.extent;
    for (int n = 0; n < trend.nodes(); ++n) {
        for (int d = 0; d < trend.dims(); ++d) {
            for (int i = 0; i < s_count; ++i) {
                Complex acc{0.0, 0.0};
                for (int j = 0; j < s_count; ++j) acc += parts.maps[n](i, j) * parts.v(n, j, d);
                mixed(n, i, d) = acc;
            }
        }
    }
    return trend + idft_time_real(pad_modes(mixed, params.mode_indices, trend.steps()));
}

void write_spectrum_csv(std::ostream& os, const SpectrumTensor& spectrum) {
    os << "variable,mode,dim,re,im\n";
    os.precision(17);
    for (int n = 0; n < spectrum.nodes; ++n) {
        for (int s = 0; s < spectrum.extent; ++s) {
            const int mode = spectrum.mode_indices ? (*spectrum.mode_indices)[s] : s;
            for (int d = 0; d < spectrum.dims; ++d) {
                const auto v = spectrum(n, s, d);
                os << n << ',' << mode << ',' << d << ',' << v.real() << ',' << v.imag() << '\n';
            }
        }
    }
}

SpaceProjector SpaceProjector::fourier(int length, const std::vector<int>& modes) {
    validate_modes(modes, length);
    const int s_count = static_cast<int>(modes.size());
    SpaceProjector p;
    p.forward_re.resize(length, s_count);
    p.forward_im.resize(length, s_count);
    p.inverse_re.resize(s_count, length);
    p.inverse_im.resize(s_count, length);
    for (int t = 0; t < length; ++t) {
        for (int s = 0; s < s_count; ++s) {
            const long long m = (static_cast<long long>(modes[s]) * t) % length;
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / length;
            const double c = std::cos(angle);
            const double sn = std::sin(angle);
            p.forward_re(t, s) = c;
            p.forward_im(t, s) = -sn;
            p.inverse_re(s, t) = c / length;
            p.inverse_im(s, t) = -sn / length;
        }
    }
    return p;
}

SpaceProjector SpaceProjector::random(int length, int modes, std::mt19937_64& rng) {
    if (modes < 1 || modes > length) throw ShapeError("random projector: need 1 <= S <= T");
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(length)));
    SpaceProjector p;
    p.forward_re.resize(length, modes);
    for (int t = 0; t < length; ++t)
        for (int s = 0; s < modes; ++s) p.forward_re(t, s) = normal(rng);
    p.forward_im = Matrix::Zero(length, modes);
    p.inverse_re = p.forward_re.completeOrthogonalDecomposition().pseudoInverse();
    p.inverse_im = Matrix::Zero(modes, length);
    return p;
}

Matrix moving_average_matrix(int length, int window) {
    if (window < 1 || window > length) throw ShapeError("moving average window must lie in [1, T]");
    Matrix m = Matrix::Zero(length, length);
    for (int t = window - 1; t < length; ++t)
        for (int j = t - window + 1; j <= t; ++j) m(j, t) = 1.0 / window;
    return m;
}

ColumnSamplingReport column_sampling_check(const Matrix& a, const Matrix& w, int k, int samples,
                                           int trials, std::mt19937_64& rng, double c) {
    const int rows = static_cast<int>(a.rows());
    const int cols = static_cast<int>(a.cols());
    if (samples < 1 || samples > cols) throw ShapeError("column sampling: need 1 <= S <= T");
    if (k < 0 || k > std::min(rows, cols)) throw ShapeError("column sampling: need k <= min(N, T)");
    if (w.rows() != cols) throw ShapeError("column sampling: W must have T rows");
    if (trials < 1) throw ShapeError("column sampling: need at least one trial");

    Eigen::BDCSVD<Matrix> svd(a);
    const Vector& sigma = svd.singularValues();
    double tail = 0.0;
    for (Eigen::Index i = k; i < sigma.size(); ++i) tail += sigma(i) * sigma(i);

    ColumnSamplingReport report;
    report.epsilon = c * std::sqrt(static_cast<double>(k) * k / samples);
    report.rhs = (1.0 + report.epsilon) * w.norm() * std::sqrt(tail);

    std::vector<int> all(cols);
    std::iota(all.begin(), all.end(), 0);
    const Matrix aw = a * w;
    int violations = 0;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<int> idx;
        std::sample(all.begin(), all.end(), std::back_inserter(idx), samples, rng);
        Matrix sub(rows, samples);
        for (int s = 0; s < samples; ++s) sub.col(s) = a.col(idx[s]);
        // P_{A'}(A) = A' (A')^+ A, with (A')^+ A as a minimum-norm least-squares solve.
        const Matrix coeffs = sub.completeOrthogonalDecomposition().solve(a);
        const double lhs = (aw - sub * (coeffs * w)).norm();
        report.lhs.push_back(lhs);
        report.max_lhs = std::max(report.max_lhs, lhs);
        if (lhs > report.rhs * (1.0 + 1e-12) + 1e-12) ++violations;
    }
    report.violation_rate = static_cast<double>(violations) / trials;
    return report;
}

} // namespace spectemp::temporal
