#pragma once

#include "spectemp/tensor.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spectemp::data {

struct Dataset {
    std::string name;
    Tensor3 values;                  // N x L x D
    std::optional<Matrix> adjacency; // user-supplied graph, if any
    std::vector<int> labels;         // group labels for synthetic sets

    int nodes() const { return values.nodes(); }
    int length() const { return values.steps(); }
    int dims() const { return values.dims(); }
};

// Time-major: one row per time step, columns n*D + d.
// Variable-major: one row per variable, columns t*D + d.
enum class Layout { TimeMajor, VariableMajor };
enum class NanPolicy { Strict, ForwardFill };

struct CsvOptions {
    Layout layout = Layout::TimeMajor;
    bool header = false;
    int dims = 1;
    NanPolicy nan_policy = NanPolicy::Strict;
};

Dataset load_csv(const std::string& path, const CsvOptions& options = {});
Dataset read_csv(std::istream& is, const CsvOptions& options = {}, const std::string& name = "csv");
void write_csv(std::ostream& os, const Tensor3& values, const CsvOptions& options = {});
void write_csv(const std::string& path, const Tensor3& values, const CsvOptions& options = {});

enum class NormMethod { ZScore, MinMax, None };
NormMethod parse_norm_method(const std::string& name);
std::string to_string(NormMethod m);

// Per-variable affine map y = (x - offset) / scale, fitted on one split.
class Normalizer {
public:
    // Default-constructed: the identity map for any number of variables.
    Normalizer() = default;
    static Normalizer fit(const Tensor3& train, NormMethod method);

    Tensor3 apply(const Tensor3& x) const;
    Tensor3 inverse(const Tensor3& y) const;

    NormMethod method() const { return method_; }
    const std::vector<double>& offset() const { return offset_; }
    const std::vector<double>& scale() const { return scale_; }
    // Variables whose spread was zero; their scale was set to 1.
    const std::vector<int>& flagged() const { return flagged_; }

    nlohmann::json to_json() const;

private:
    NormMethod method_ = NormMethod::None;
    std::vector<double> offset_;
    std::vector<double> scale_;
    std::vector<int> flagged_;
};

// Chronological split; the first two lengths are round(L * ratio) and the last
// takes the remainder. `min_length` (if positive) is the smallest acceptable
// part.
std::array<Tensor3, 3> split(const Tensor3& values, const std::array<double, 3>& ratios, int min_length = 0);

struct WindowSet {
    std::vector<Tensor3> inputs;  // each N x T x D
    std::vector<Tensor3> targets; // each N x H x D
    std::vector<int> origins;     // first input step of each window

    std::size_t size() const { return inputs.size(); }
    bool empty() const { return inputs.empty(); }
};

// B = floor((L - T - H) / stride) + 1 windows.
WindowSet make_windows(const Tensor3& values, int lookback, int horizon, int stride = 1);

// Repeats the last observed step across the horizon.
std::vector<Tensor3> persistence_baseline(const WindowSet& windows, int horizon);

struct ErrorMetrics {
    double mae = 0.0;
    double rmse = 0.0;
};
ErrorMetrics error_metrics(const std::vector<Tensor3>& predictions, const std::vector<Tensor3>& targets);

// Two groups of n_per_group series: a_i sin(2 pi f t) + noise and
// b_i cos(2 pi f t) + noise, amplitudes uniform in [0.5, 2], f = periods / L.
// Labels are 0 for the sine group and 1 for the cosine group.
Dataset synth_signed_groups(int n_per_group, int length, double noise_sigma, std::uint64_t seed, int periods = 20);

struct SeasonalOptions {
    int nodes = 8;
    int period = 24;
    int periods = 20;
    double noise_sigma = 0.05;
    double coupling = 0.6;
    std::uint64_t seed = 0;
};

// Multivariate seasonal series on a random graph: each variable has a slow
// trend plus the first three harmonics of the base period; the observed signal mixes each
// variable with its neighbours' signals. The graph is returned as the
// dataset's adjacency.
Dataset synth_seasonal(const SeasonalOptions& options);

nlohmann::json manifest(const Dataset& ds, const Normalizer& norm, const std::array<double, 3>& ratios,
                        std::uint64_t seed);

} // namespace spectemp::data
