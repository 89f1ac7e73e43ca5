#pragma once

#include "spectemp/fourier.hpp"
#include "spectemp/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace spectemp::temporal {

using ComplexMatrix = Eigen::MatrixXcd;

// Complex N x S x D spectrum, [n][s][d]. When `mode_indices` is set the middle
// extent holds only those (ascending) frequencies out of `length_full`.
struct SpectrumTensor {
    int nodes = 0;
    int extent = 0;
    int dims = 0;
    int length_full = 0;
    std::optional<std::vector<int>> mode_indices;
    std::vector<Complex> values;

    SpectrumTensor() = default;
    SpectrumTensor(int n, int s, int d, int full_length);

    Complex& operator()(int n, int s, int d) { return values[index(n, s, d)]; }
    Complex operator()(int n, int s, int d) const { return values[index(n, s, d)]; }

    double energy() const;

private:
    std::size_t index(int n, int s, int d) const {
        return (static_cast<std::size_t>(n) * extent + s) * dims + d;
    }
};

// Transforms along the time axis for every (variable, dim) series.
SpectrumTensor dft_time(const Tensor3& x);
// Inverse transform; returns the real part and, if requested, the largest
// imaginary magnitude that was discarded.
Tensor3 idft_time_real(const SpectrumTensor& spectrum, double* max_imag = nullptr);

// Mode index sets.
std::vector<int> lowest_modes(int count);
std::vector<int> random_modes(int length, int count, std::uint64_t seed);
// Throws ShapeError unless strictly ascending and within [0, length).
void validate_modes(const std::vector<int>& modes, int length);

// F S_hat^T: keeps the listed frequencies.
SpectrumTensor select_modes(const SpectrumTensor& full, const std::vector<int>& modes);
// Scatters a mode-selected spectrum back to full length, zero elsewhere.
SpectrumTensor pad_modes(const SpectrumTensor& selected, const std::vector<int>& modes, int length);

// Trailing moving average with the first w - 1 trend values set to zero.
// Returns (trend, seasonal) with trend + seasonal == x.
std::pair<Tensor3, Tensor3> decompose(const Tensor3& x, int window);

// Complex S x S filters indexed by (variable, dim); sharing collapses either
// axis onto one slot.
class SpectralWeights {
public:
    SpectralWeights() = default;
    SpectralWeights(int nodes, int dims, int modes, bool share_nodes = false, bool share_dims = false);

    static SpectralWeights identity(int nodes, int dims, int modes, bool share_nodes = false,
                                    bool share_dims = false);

    int nodes() const { return nodes_; }
    int dims() const { return dims_; }
    int modes() const { return modes_; }
    bool shares_nodes() const { return share_nodes_; }
    bool shares_dims() const { return share_dims_; }
    int slot_count() const { return static_cast<int>(slots_.size()); }
    int slot_index(int n, int d) const;

    ComplexMatrix& at(int n, int d) { return slots_[slot_index(n, d)]; }
    const ComplexMatrix& at(int n, int d) const { return slots_[slot_index(n, d)]; }
    ComplexMatrix& slot(int i) { return slots_[i]; }
    const ComplexMatrix& slot(int i) const { return slots_[i]; }

private:
    int nodes_ = 0;
    int dims_ = 0;
    int modes_ = 0;
    bool share_nodes_ = false;
    bool share_dims_ = false;
    std::vector<ComplexMatrix> slots_;
};

// Query/key/value feature projections (D x D) for spectral attention.
struct AttentionWeights {
    Matrix query;
    Matrix key;
    Matrix value;
    bool rectify = true;
};

struct TemporalFdmParams {
    std::vector<int> mode_indices;
    SpectralWeights weights;
    int decomp_window = 1;
    std::optional<AttentionWeights> attention;
};

// DFT -> select -> per-series complex filter -> pad -> IDFT -> real part.
Tensor3 coarse_fdm(const Tensor3& z, const TemporalFdmParams& params, double* max_imag = nullptr);

// trend + coarse_fdm(seasonal) after a moving-average decomposition.
Tensor3 fine_fdm(const Tensor3& z, const TemporalFdmParams& params, double* max_imag = nullptr);

// trend + IDFT(Pad(Softmax(Re(Q K^T) / sqrt(S * D)) V)) with Q from the trend
// and K, V from the seasonal part, one attention map per variable.
Tensor3 spectral_attention(const Tensor3& trend, const Tensor3& seasonal, const TemporalFdmParams& params);

// The per-variable S x S attention maps used by spectral_attention.
std::vector<Matrix> spectral_attention_maps(const Tensor3& trend, const Tensor3& seasonal,
                                            const TemporalFdmParams& params);

void write_spectrum_csv(std::ostream& os, const SpectrumTensor& spectrum);

// Real linear maps equivalent to "project, keep S components, back-project,
// take the real part" on a length-T row vector:
//   F_re = x * forward_re, F_im = x * forward_im        (T x S)
//   y    = F_re * inverse_re + F_im * inverse_im        (S x T)
struct SpaceProjector {
    Matrix forward_re;
    Matrix forward_im;
    Matrix inverse_re;
    Matrix inverse_im;

    int length() const { return static_cast<int>(forward_re.rows()); }
    int modes() const { return static_cast<int>(forward_re.cols()); }

    static SpaceProjector fourier(int length, const std::vector<int>& modes);
    // Gaussian T x S projection with its pseudoinverse as the way back.
    static SpaceProjector random(int length, int modes, std::mt19937_64& rng);
};

// T x T matrix M with trend = x * M for a length-T row vector x.
Matrix moving_average_matrix(int length, int window);

struct ColumnSamplingReport {
    std::vector<double> lhs; // ||AW - P_{A'}(A) W||_F per trial
    double rhs = 0.0;        // (1 + eps) ||W||_F ||A - A_k||_F
    double epsilon = 0.0;
    double violation_rate = 0.0;
    double max_lhs = 0.0;
};

// Empirical check of the column-sampling bound: for `trials` uniformly random
// S-column subsets, projects A onto the span of the sampled columns via a
// least-squares solve and compares against the rank-k tail, with
// eps = c * sqrt(k^2 / S).
ColumnSamplingReport column_sampling_check(const Matrix& a, const Matrix& w, int k, int samples,
                                           int trials, std::mt19937_64& rng, double c = 1.0);

} // namespace spectemp::temporal
